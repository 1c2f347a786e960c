#pragma once

#include <string>
#include <vector>

#include "facetrace/image.hpp"
#include "facetrace/lighting.hpp"
#include "facetrace/mesh.hpp"

namespace facetrace {

inline constexpr int kNumLandmarks = 68;

// Pinhole camera. World-from-camera is x_w = R x_c + T, so points project
// through C(v) = R^T (v - T). Pixel y grows downward, matching image rows.
struct CameraPose {
    Vec3 rotation = Vec3::Zero(); // axis-angle, radians
    Vec3 translation = Vec3::Zero(); // cm
    double focal_length = 512.0;  // pixels
    Vec2 principal_point = Vec2::Zero(); // pixels

    Mat3 rotation_matrix() const { return axis_angle_to_matrix(rotation); }
};

// Statistical face model: mean + PCA bases for shape, expression and the
// two reflectance channels. Basis columns are scaled so coefficients are
// in units of prior standard deviations.
struct MorphableBasis {
    VecX mean_shape;      // 3N, cm, xyz interleaved per vertex
    MatX shape_basis;     // 3N x K_s
    MatX expr_basis;      // 3N x K_e
    VecX mean_diffuse;    // 3N, rgb interleaved per vertex
    MatX diffuse_basis;   // 3N x K_r
    VecX mean_specular;   // 3N
    MatX specular_basis;  // 3N x K_r
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec2> uv_coords;
    std::vector<int> landmark_vertex_ids; // exactly kNumLandmarks
    int texture_resolution = 256;

    int vertex_count() const { return static_cast<int>(mean_shape.size() / 3); }
    int k_shape() const { return static_cast<int>(shape_basis.cols()); }
    int k_expr() const { return static_cast<int>(expr_basis.cols()); }
    int k_reflectance() const { return static_cast<int>(diffuse_basis.cols()); }

    void validate() const; // throws std::invalid_argument on bad invariants
};

// Full scene parameter vector plus the stage-II texture increments.
// Empty increment images mean zero.
struct SceneParams {
    VecX alpha, delta, beta;
    ShLight gamma;
    CameraPose camera;
    Image delta_d, delta_s; // M x M x 3
};

struct AlbedoTextures {
    Image diffuse;  // M x M x 3
    Image specular; // M x M x 3
    std::vector<uint8_t> valid; // M*M; texels outside the UV atlas are 0

    int resolution() const { return diffuse.width(); }
};

// Which triangle claims each texel, with the barycentric weights of its
// three vertices at the texel center. Top-left fill rule with half-open
// edges; ties go to the lowest triangle index.
struct UvRasterization {
    struct Claim {
        int triangle = -1;
        double w0 = 0.0, w1 = 0.0, w2 = 0.0;
    };
    int resolution = 0;
    std::vector<Claim> claims; // resolution^2, row-major
};

UvRasterization rasterize_uv(const MorphableBasis& basis, int resolution);

TriMesh synthesize_geometry(const MorphableBasis& basis, const VecX& alpha,
                            const VecX& delta);

// Per-vertex linear albedos c = a_r + S_r b and s = a_b + S_b b.
void synthesize_vertex_albedos(const MorphableBasis& basis, const VecX& beta,
                               std::vector<Vec3>& diffuse,
                               std::vector<Vec3>& specular);

AlbedoTextures synthesize_statistical_albedos(const MorphableBasis& basis,
                                              const VecX& beta,
                                              const UvRasterization& raster);

AlbedoTextures apply_increments(const AlbedoTextures& stat,
                                const Image& delta_d, const Image& delta_s);

// Pulls a texel-space adjoint (M*M*3 per channel) back to the albedo
// coefficients through the atlas claims.
VecX albedo_coeff_adjoint(const MorphableBasis& basis, const UvRasterization& raster,
                          const std::vector<double>& adj_diffuse,
                          const std::vector<double>& adj_specular);

// Deterministic synthetic basis on a 10 cm UV-sphere head, used instead of
// the licensed production assets. Basis columns are smooth low-order
// spherical-harmonic fields, orthonormalized, with decaying magnitudes.
MorphableBasis generate_toy_basis(uint64_t seed, int n_vertices, int k_s,
                                  int k_e, int k_r,
                                  int texture_resolution = 256);

// "FMB1" little-endian binary asset format.
void save_basis(const MorphableBasis& basis, const std::string& path);
MorphableBasis load_basis(const std::string& path);

} // namespace facetrace
