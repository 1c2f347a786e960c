#pragma once

#include <array>
#include <string>
#include <vector>

#include "facetrace/geom.hpp"

namespace facetrace {

// Indexed triangle mesh. Positions in cm, normals unit, UVs in [0,1]^2.
struct TriMesh {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    std::vector<Vec2> uvs;
    std::vector<std::array<int, 3>> triangles;

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    Vec3 centroid() const;
    double bounds_diagonal() const;

    // Area-weighted vertex normals: each face contributes its unnormalized
    // cross-product normal, vertices normalize the sum.
    void recompute_normals();
};

// Adjoint of recompute_normals: given dL/d(unit vertex normals), adds
// dL/d(positions) into adj_positions. Must be called with the mesh in the
// same state that produced the normals.
void normals_backward(const TriMesh& mesh,
                      const std::vector<Vec3>& adj_unit_normals,
                      std::vector<Vec3>& adj_positions);

// OBJ with v/vt/vn and triangular f records. Vertices are deduplicated on
// the full v/vt/vn index triple.
TriMesh load_obj(const std::string& path);
void save_obj(const TriMesh& mesh, const std::string& path);

} // namespace facetrace
