#include "facetrace/morphable.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "facetrace/rng.hpp"
#include "facetrace/sh.hpp"

namespace facetrace {

void MorphableBasis::validate() const
{
    const int n3 = static_cast<int>(mean_shape.size());
    if (n3 <= 0 || n3 % 3 != 0)
        throw std::invalid_argument("basis: mean_shape length must be 3N");
    auto check_rows = [&](const auto& m, const char* name) {
        if (m.rows() != n3)
            throw std::invalid_argument(std::string("basis: row mismatch in ") + name);
    };
    check_rows(shape_basis, "shape_basis");
    check_rows(expr_basis, "expr_basis");
    check_rows(diffuse_basis, "diffuse_basis");
    check_rows(specular_basis, "specular_basis");
    if (mean_diffuse.size() != n3 || mean_specular.size() != n3)
        throw std::invalid_argument("basis: reflectance mean length mismatch");
    if (diffuse_basis.cols() != specular_basis.cols())
        throw std::invalid_argument("basis: diffuse/specular column counts differ");
    const int n = n3 / 3;
    for (const auto& t : triangles)
        for (int k : t)
            if (k < 0 || k >= n)
                throw std::invalid_argument("basis: triangle index out of range");
    if (static_cast<int>(uv_coords.size()) != n)
        throw std::invalid_argument("basis: uv count mismatch");
    for (const auto& uv : uv_coords)
        if (uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 || uv.y() > 1.0)
            throw std::invalid_argument("basis: uv outside [0,1]^2");
    if (static_cast<int>(landmark_vertex_ids.size()) != kNumLandmarks)
        throw std::invalid_argument("basis: landmark list must have 68 entries");
    for (int id : landmark_vertex_ids)
        if (id < 0 || id >= n)
            throw std::invalid_argument("basis: landmark index out of range");
    if (texture_resolution < 1)
        throw std::invalid_argument("basis: bad texture resolution");
}

TriMesh synthesize_geometry(const MorphableBasis& basis, const VecX& alpha,
                            const VecX& delta)
{
    if (alpha.size() != basis.k_shape() || delta.size() != basis.k_expr())
        throw std::invalid_argument("synthesize_geometry: coefficient length mismatch");
    VecX flat = basis.mean_shape;
    if (alpha.size() > 0) flat += basis.shape_basis * alpha;
    if (delta.size() > 0) flat += basis.expr_basis * delta;

    TriMesh mesh;
    const int n = basis.vertex_count();
    mesh.positions.resize(n);
    for (int i = 0; i < n; ++i)
        mesh.positions[i] = flat.segment<3>(3 * i);
    mesh.uvs = basis.uv_coords;
    mesh.triangles = basis.triangles;
    mesh.recompute_normals();
    return mesh;
}

void synthesize_vertex_albedos(const MorphableBasis& basis, const VecX& beta,
                               std::vector<Vec3>& diffuse,
                               std::vector<Vec3>& specular)
{
    if (beta.size() != basis.k_reflectance())
        throw std::invalid_argument("synthesize_vertex_albedos: beta length mismatch");
    VecX c = basis.mean_diffuse;
    VecX s = basis.mean_specular;
    if (beta.size() > 0) {
        c += basis.diffuse_basis * beta;
        s += basis.specular_basis * beta;
    }
    const int n = basis.vertex_count();
    diffuse.resize(n);
    specular.resize(n);
    for (int i = 0; i < n; ++i) {
        diffuse[i] = c.segment<3>(3 * i);
        specular[i] = s.segment<3>(3 * i);
    }
}

UvRasterization rasterize_uv(const MorphableBasis& basis, int resolution)
{
    UvRasterization raster;
    raster.resolution = resolution;
    raster.claims.resize(static_cast<size_t>(resolution) * resolution);

    for (int t = 0; t < static_cast<int>(basis.triangles.size()); ++t) {
        const auto& tri = basis.triangles[t];
        Vec2 a = basis.uv_coords[tri[0]] * resolution;
        Vec2 b = basis.uv_coords[tri[1]] * resolution;
        Vec2 c = basis.uv_coords[tri[2]] * resolution;
        double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        bool flipped = false;
        if (area == 0.0) continue;
        if (area < 0.0) { // normalize to CCW so the fill rule is uniform
            std::swap(b, c);
            area = -area;
            flipped = true;
        }

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));

        auto edge = [](const Vec2& p, const Vec2& q, const Vec2& s) {
            return (q.x() - p.x()) * (s.y() - p.y()) - (q.y() - p.y()) * (s.x() - p.x());
        };
        auto top_left = [](const Vec2& p, const Vec2& q) {
            return (p.y() == q.y() && q.x() < p.x()) || q.y() > p.y();
        };
        const bool tl0 = top_left(a, b), tl1 = top_left(b, c), tl2 = top_left(c, a);

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                auto& claim = raster.claims[static_cast<size_t>(y) * resolution + x];
                if (claim.triangle >= 0) continue; // lowest index wins
                const Vec2 p(x + 0.5, y + 0.5);
                const double e0 = edge(a, b, p);
                const double e1 = edge(b, c, p);
                const double e2 = edge(c, a, p);
                const bool in = (e0 > 0.0 || (e0 == 0.0 && tl0)) &&
                                (e1 > 0.0 || (e1 == 0.0 && tl1)) &&
                                (e2 > 0.0 || (e2 == 0.0 && tl2));
                if (!in) continue;
                claim.triangle = t;
                double w0 = e1 / area; // opposite vertex a
                double w1 = e2 / area;
                double w2 = e0 / area;
                if (flipped) std::swap(w1, w2);
                claim.w0 = w0;
                claim.w1 = w1;
                claim.w2 = w2;
            }
    }
    return raster;
}

AlbedoTextures synthesize_statistical_albedos(const MorphableBasis& basis,
                                              const VecX& beta,
                                              const UvRasterization& raster)
{
    std::vector<Vec3> vc, vs;
    synthesize_vertex_albedos(basis, beta, vc, vs);

    const int m = raster.resolution;
    AlbedoTextures tex;
    tex.diffuse = Image(m, m, 3);
    tex.specular = Image(m, m, 3);
    tex.valid.assign(static_cast<size_t>(m) * m, 0);
    for (int y = 0; y < m; ++y)
        for (int x = 0; x < m; ++x) {
            const auto& claim = raster.claims[static_cast<size_t>(y) * m + x];
            if (claim.triangle < 0) continue;
            const auto& tri = basis.triangles[claim.triangle];
            const Vec3 d = claim.w0 * vc[tri[0]] + claim.w1 * vc[tri[1]] + claim.w2 * vc[tri[2]];
            const Vec3 s = claim.w0 * vs[tri[0]] + claim.w1 * vs[tri[1]] + claim.w2 * vs[tri[2]];
            for (int c = 0; c < 3; ++c) {
                tex.diffuse.at(x, y, c) = static_cast<float>(d(c));
                tex.specular.at(x, y, c) = static_cast<float>(s(c));
            }
            tex.valid[static_cast<size_t>(y) * m + x] = 1;
        }
    return tex;
}

VecX albedo_coeff_adjoint(const MorphableBasis& basis, const UvRasterization& raster,
                          const std::vector<double>& adj_diffuse,
                          const std::vector<double>& adj_specular)
{
    const int m = raster.resolution;
    const int n = basis.vertex_count();
    VecX gd = VecX::Zero(3 * n);
    VecX gs = VecX::Zero(3 * n);
    for (int t = 0; t < m * m; ++t) {
        const auto& claim = raster.claims[t];
        if (claim.triangle < 0) continue;
        const auto& tri = basis.triangles[claim.triangle];
        const double wgt[3] = {claim.w0, claim.w1, claim.w2};
        for (int v = 0; v < 3; ++v)
            for (int c = 0; c < 3; ++c) {
                if (!adj_diffuse.empty())
                    gd(3 * tri[v] + c) += wgt[v] * adj_diffuse[static_cast<size_t>(t) * 3 + c];
                if (!adj_specular.empty())
                    gs(3 * tri[v] + c) += wgt[v] * adj_specular[static_cast<size_t>(t) * 3 + c];
            }
    }
    return basis.diffuse_basis.transpose() * gd + basis.specular_basis.transpose() * gs;
}

AlbedoTextures apply_increments(const AlbedoTextures& stat,
                                const Image& delta_d, const Image& delta_s)
{
    AlbedoTextures out = stat;
    auto add = [&](Image& dst, const Image& inc, const char* name) {
        if (inc.empty()) return;
        if (!dst.same_shape(inc))
            throw std::invalid_argument(std::string("apply_increments: resolution mismatch in ") + name);
        for (size_t i = 0; i < dst.size(); ++i)
            dst.data()[i] += inc.data()[i];
    };
    add(out.diffuse, delta_d, "delta_d");
    add(out.specular, delta_s, "delta_s");
    return out;
}

namespace {

// Smooth random scalar field: a low-order SH expansion with rng weights.
struct ShField {
    int bands;
    std::vector<double> weights;

    ShField(Pcg32& rng, int bands_) : bands(bands_), weights(sh_count(bands_ - 1))
    {
        for (auto& w : weights)
            w = 2.0 * rng.uniform() - 1.0;
    }
    double eval(const Vec3& dir) const
    {
        double y[kNumCoeffs];
        sh_eval(dir, bands - 1, y);
        double acc = 0.0;
        for (size_t k = 0; k < weights.size(); ++k)
            acc += weights[k] * y[k];
        return acc;
    }
};

void orthonormalize(MatX& m)
{
    // Two rounds of modified Gram-Schmidt.
    for (int round = 0; round < 2; ++round)
        for (int j = 0; j < m.cols(); ++j) {
            for (int i = 0; i < j; ++i)
                m.col(j) -= m.col(i).dot(m.col(j)) * m.col(i);
            const double norm = m.col(j).norm();
            if (norm < 1e-12)
                throw std::runtime_error("toy basis: rank-deficient random columns");
            m.col(j) /= norm;
        }
}

MatX random_smooth_basis(Pcg32& rng, const std::vector<Vec3>& dirs, int columns,
                         double rms0, double decay, int channels_interleaved)
{
    const int n = static_cast<int>(dirs.size());
    MatX m(3 * n, columns);
    for (int j = 0; j < columns; ++j) {
        const int bands = 2 + (j % 5); // mix of smoothness scales
        for (int c = 0; c < 3; ++c) {
            ShField field(rng, bands);
            for (int i = 0; i < n; ++i)
                m(3 * i + c, j) = field.eval(dirs[i]);
        }
    }
    orthonormalize(m);
    // Column k scaled so a unit coefficient moves entries by ~rms0*decay^k.
    const double entry_scale = std::sqrt(3.0 * n);
    for (int j = 0; j < columns; ++j)
        m.col(j) *= rms0 * std::pow(decay, j) * entry_scale;
    (void)channels_interleaved;
    return m;
}

} // namespace

MorphableBasis generate_toy_basis(uint64_t seed, int n_vertices, int k_s,
                                  int k_e, int k_r, int texture_resolution)
{
    if (n_vertices < 4)
        throw std::invalid_argument("generate_toy_basis: need at least 4 vertices");

    const double radius = 10.0; // cm
    int rows = std::max(3, static_cast<int>(std::lround(std::sqrt(n_vertices / 2.0))));
    int cols = 2 * rows;

    MorphableBasis basis;
    basis.texture_resolution = texture_resolution;

    std::vector<Vec3> dirs;
    for (int i = 0; i <= rows; ++i)
        for (int j = 0; j <= cols; ++j) {
            const double theta = i * kPi / rows;
            const double phi = j * 2.0 * kPi / cols; // j==cols duplicates the seam
            const Vec3 d(std::sin(theta) * std::cos(phi),
                         std::sin(theta) * std::sin(phi), std::cos(theta));
            dirs.push_back(d);
            basis.uv_coords.emplace_back(static_cast<double>(j) / cols,
                                         static_cast<double>(i) / rows);
        }
    const int n = static_cast<int>(dirs.size());
    basis.mean_shape.resize(3 * n);
    for (int i = 0; i < n; ++i)
        basis.mean_shape.segment<3>(3 * i) = radius * dirs[i];

    auto vid = [cols](int i, int j) { return i * (cols + 1) + j; };
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            // Outward-facing winding; skip the degenerate pole triangles.
            if (i > 0)
                basis.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
            if (i + 1 < rows)
                basis.triangles.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }

    Pcg32 rng(seed, 7);
    basis.shape_basis = random_smooth_basis(rng, dirs, k_s, 0.35, 0.97, 3);
    basis.expr_basis = random_smooth_basis(rng, dirs, k_e, 0.15, 0.97, 3);

    basis.mean_diffuse.resize(3 * n);
    basis.mean_specular.resize(3 * n);
    for (int i = 0; i < n; ++i) {
        basis.mean_diffuse.segment<3>(3 * i) = Vec3(0.72, 0.52, 0.42);
        basis.mean_specular.segment<3>(3 * i) = Vec3(0.04, 0.04, 0.04);
    }
    basis.diffuse_basis = random_smooth_basis(rng, dirs, k_r, 0.05, 0.97, 3);
    basis.specular_basis = random_smooth_basis(rng, dirs, k_r, 0.006, 0.97, 3);

    // Landmarks: spread over the hemisphere facing the default camera (-z).
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i)
        if (dirs[i].z() < -0.35 && basis.uv_coords[i].x() < 1.0)
            candidates.push_back(i);
    if (static_cast<int>(candidates.size()) < kNumLandmarks)
        throw std::runtime_error("toy basis: not enough front-facing vertices for landmarks");
    for (int l = 0; l < kNumLandmarks; ++l)
        basis.landmark_vertex_ids.push_back(
            candidates[(l * candidates.size()) / kNumLandmarks]);

    basis.validate();
    return basis;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_f32(FILE* f, const double* src, size_t count)
{
    std::vector<float> buf(count);
    for (size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(src[i]);
    if (std::fwrite(buf.data(), sizeof(float), count, f) != count)
        throw std::runtime_error("basis write failed");
}

void read_f32(FILE* f, double* dst, size_t count)
{
    std::vector<float> buf(count);
    if (std::fread(buf.data(), sizeof(float), count, f) != count)
        throw std::runtime_error("basis file truncated");
    for (size_t i = 0; i < count; ++i) dst[i] = buf[i];
}

void write_u32(FILE* f, uint32_t v)
{
    if (std::fwrite(&v, sizeof(v), 1, f) != 1)
        throw std::runtime_error("basis write failed");
}

uint32_t read_u32(FILE* f)
{
    uint32_t v;
    if (std::fread(&v, sizeof(v), 1, f) != 1)
        throw std::runtime_error("basis file truncated");
    return v;
}

} // namespace

void save_basis(const MorphableBasis& basis, const std::string& path)
{
    basis.validate();
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write basis file: " + path);
    std::fwrite("FMB1", 1, 4, f.get());
    write_u32(f.get(), static_cast<uint32_t>(basis.vertex_count()));
    write_u32(f.get(), static_cast<uint32_t>(basis.k_shape()));
    write_u32(f.get(), static_cast<uint32_t>(basis.k_expr()));
    write_u32(f.get(), static_cast<uint32_t>(basis.k_reflectance()));
    write_u32(f.get(), kNumLandmarks);
    write_u32(f.get(), static_cast<uint32_t>(basis.texture_resolution));

    write_f32(f.get(), basis.mean_shape.data(), basis.mean_shape.size());
    write_f32(f.get(), basis.shape_basis.data(), basis.shape_basis.size());
    write_f32(f.get(), basis.expr_basis.data(), basis.expr_basis.size());
    write_f32(f.get(), basis.mean_diffuse.data(), basis.mean_diffuse.size());
    write_f32(f.get(), basis.diffuse_basis.data(), basis.diffuse_basis.size());
    write_f32(f.get(), basis.mean_specular.data(), basis.mean_specular.size());
    write_f32(f.get(), basis.specular_basis.data(), basis.specular_basis.size());

    write_u32(f.get(), static_cast<uint32_t>(basis.triangles.size()));
    for (const auto& t : basis.triangles)
        for (int k : t)
            write_u32(f.get(), static_cast<uint32_t>(k));
    {
        std::vector<float> uv(basis.uv_coords.size() * 2);
        for (size_t i = 0; i < basis.uv_coords.size(); ++i) {
            uv[2 * i] = static_cast<float>(basis.uv_coords[i].x());
            uv[2 * i + 1] = static_cast<float>(basis.uv_coords[i].y());
        }
        if (std::fwrite(uv.data(), sizeof(float), uv.size(), f.get()) != uv.size())
            throw std::runtime_error("basis write failed");
    }
    for (int id : basis.landmark_vertex_ids)
        write_u32(f.get(), static_cast<uint32_t>(id));
}

MorphableBasis load_basis(const std::string& path)
{
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open basis file: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "FMB1", 4) != 0)
        throw std::runtime_error("not a FMB1 basis file: " + path);
    const uint32_t n = read_u32(f.get());
    const uint32_t ks = read_u32(f.get());
    const uint32_t ke = read_u32(f.get());
    const uint32_t kr = read_u32(f.get());
    const uint32_t l = read_u32(f.get());
    const uint32_t m = read_u32(f.get());
    if (l != kNumLandmarks)
        throw std::runtime_error("basis file with unexpected landmark count: " + path);

    MorphableBasis basis;
    basis.texture_resolution = static_cast<int>(m);
    basis.mean_shape.resize(3 * n);
    basis.shape_basis.resize(3 * n, ks);
    basis.expr_basis.resize(3 * n, ke);
    basis.mean_diffuse.resize(3 * n);
    basis.diffuse_basis.resize(3 * n, kr);
    basis.mean_specular.resize(3 * n);
    basis.specular_basis.resize(3 * n, kr);
    read_f32(f.get(), basis.mean_shape.data(), basis.mean_shape.size());
    read_f32(f.get(), basis.shape_basis.data(), basis.shape_basis.size());
    read_f32(f.get(), basis.expr_basis.data(), basis.expr_basis.size());
    read_f32(f.get(), basis.mean_diffuse.data(), basis.mean_diffuse.size());
    read_f32(f.get(), basis.diffuse_basis.data(), basis.diffuse_basis.size());
    read_f32(f.get(), basis.mean_specular.data(), basis.mean_specular.size());
    read_f32(f.get(), basis.specular_basis.data(), basis.specular_basis.size());

    const uint32_t tcount = read_u32(f.get());
    basis.triangles.resize(tcount);
    for (auto& t : basis.triangles)
        for (int& k : t)
            k = static_cast<int>(read_u32(f.get()));
    {
        std::vector<float> uv(static_cast<size_t>(n) * 2);
        if (std::fread(uv.data(), sizeof(float), uv.size(), f.get()) != uv.size())
            throw std::runtime_error("basis file truncated: " + path);
        basis.uv_coords.resize(n);
        for (uint32_t i = 0; i < n; ++i)
            basis.uv_coords[i] = Vec2(uv[2 * i], uv[2 * i + 1]);
    }
    basis.landmark_vertex_ids.resize(l);
    for (auto& id : basis.landmark_vertex_ids)
        id = static_cast<int>(read_u32(f.get()));

    basis.validate();
    return basis;
}

} // namespace facetrace
