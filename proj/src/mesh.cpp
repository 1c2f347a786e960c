#include "facetrace/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace facetrace {

Vec3 TriMesh::centroid() const
{
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return positions.empty() ? c : Vec3(c / positions.size());
}

double TriMesh::bounds_diagonal() const
{
    if (positions.empty()) return 0.0;
    Vec3 lo = positions[0], hi = positions[0];
    for (const auto& p : positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

void TriMesh::recompute_normals()
{
    std::vector<Vec3> accum(positions.size(), Vec3::Zero());
    for (const auto& t : triangles) {
        const Vec3 fn = (positions[t[1]] - positions[t[0]])
                            .cross(positions[t[2]] - positions[t[0]]);
        accum[t[0]] += fn;
        accum[t[1]] += fn;
        accum[t[2]] += fn;
    }
    normals.resize(positions.size());
    for (size_t i = 0; i < accum.size(); ++i) {
        const double len = accum[i].norm();
        normals[i] = len > 0.0 ? Vec3(accum[i] / len) : Vec3(0, 0, 1);
    }
}

void normals_backward(const TriMesh& mesh,
                      const std::vector<Vec3>& adj_unit_normals,
                      std::vector<Vec3>& adj_positions)
{
    std::vector<Vec3> accum(mesh.positions.size(), Vec3::Zero());
    for (const auto& t : mesh.triangles) {
        const Vec3 fn = (mesh.positions[t[1]] - mesh.positions[t[0]])
                            .cross(mesh.positions[t[2]] - mesh.positions[t[0]]);
        accum[t[0]] += fn;
        accum[t[1]] += fn;
        accum[t[2]] += fn;
    }
    std::vector<Vec3> adj_accum(mesh.positions.size(), Vec3::Zero());
    for (size_t i = 0; i < accum.size(); ++i) {
        const double len = accum[i].norm();
        if (len <= 0.0) continue;
        const Vec3 n = accum[i] / len;
        adj_accum[i] = (adj_unit_normals[i] - n * n.dot(adj_unit_normals[i])) / len;
    }
    for (const auto& t : mesh.triangles) {
        const Vec3 lambda = adj_accum[t[0]] + adj_accum[t[1]] + adj_accum[t[2]];
        const Vec3 e1 = mesh.positions[t[1]] - mesh.positions[t[0]];
        const Vec3 e2 = mesh.positions[t[2]] - mesh.positions[t[0]];
        const Vec3 adj_e1 = e2.cross(lambda);
        const Vec3 adj_e2 = lambda.cross(e1);
        adj_positions[t[1]] += adj_e1;
        adj_positions[t[2]] += adj_e2;
        adj_positions[t[0]] -= adj_e1 + adj_e2;
    }
}

TriMesh load_obj(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open OBJ file: " + path);

    std::vector<Vec3> v, vn;
    std::vector<Vec2> vt;
    TriMesh mesh;
    std::map<std::array<int, 3>, int> dedup;
    bool has_source_normals = false;

    auto resolve = [](int idx, size_t count) -> int {
        if (idx > 0) return idx - 1;
        if (idx < 0) return static_cast<int>(count) + idx;
        return -1;
    };

    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            ss >> p.x() >> p.y() >> p.z();
            v.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            ss >> t.x() >> t.y();
            vt.push_back(t);
        } else if (tag == "vn") {
            Vec3 n;
            ss >> n.x() >> n.y() >> n.z();
            vn.push_back(n);
            has_source_normals = true;
        } else if (tag == "f") {
            std::vector<int> corner;
            std::string word;
            while (ss >> word) {
                int vi = 0, ti = 0, ni = 0;
                if (std::sscanf(word.c_str(), "%d/%d/%d", &vi, &ti, &ni) == 3 ||
                    std::sscanf(word.c_str(), "%d//%d", &vi, &ni) == 2 ||
                    std::sscanf(word.c_str(), "%d/%d", &vi, &ti) >= 1) {
                    std::array<int, 3> key{resolve(vi, v.size()),
                                           resolve(ti, vt.size()),
                                           resolve(ni, vn.size())};
                    auto [it, inserted] = dedup.try_emplace(key, mesh.vertex_count());
                    if (inserted) {
                        if (key[0] < 0 || key[0] >= static_cast<int>(v.size()))
                            throw std::runtime_error("OBJ vertex index out of range: " + path);
                        mesh.positions.push_back(v[key[0]]);
                        mesh.uvs.push_back(key[1] >= 0 ? vt[key[1]] : Vec2(0, 0));
                        mesh.normals.push_back(key[2] >= 0 ? Vec3(vn[key[2]].normalized())
                                                           : Vec3(0, 0, 1));
                    }
                    corner.push_back(it->second);
                }
            }
            for (size_t k = 2; k < corner.size(); ++k) // fan-triangulate
                mesh.triangles.push_back({corner[0], corner[k - 1], corner[k]});
        }
    }
    if (mesh.positions.empty())
        throw std::runtime_error("OBJ file has no faces: " + path);
    if (!has_source_normals)
        mesh.recompute_normals();
    return mesh;
}

void save_obj(const TriMesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write OBJ file: " + path);
    out.precision(17);
    for (const auto& p : mesh.positions)
        out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const auto& t : mesh.uvs)
        out << "vt " << t.x() << ' ' << t.y() << '\n';
    for (const auto& n : mesh.normals)
        out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
    for (const auto& f : mesh.triangles)
        out << "f " << f[0] + 1 << '/' << f[0] + 1 << '/' << f[0] + 1 << ' '
            << f[1] + 1 << '/' << f[1] + 1 << '/' << f[1] + 1 << ' '
            << f[2] + 1 << '/' << f[2] + 1 << '/' << f[2] + 1 << '\n';
}

} // namespace facetrace
