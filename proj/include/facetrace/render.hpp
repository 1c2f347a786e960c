#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "facetrace/bvh.hpp"
#include "facetrace/morphable.hpp"

namespace facetrace {

enum class Backend { raytrace, vertex };

enum class LightSampling { independent, stratified };

struct RenderConfig {
    int width = 256, height = 256;
    int spp = 8;
    uint64_t rng_seed = 0;
    int sh_bands = 9; // bands used; 9 means l = 0..8
    Vec3 background = Vec3::Zero();
    double roughness = 0.4;
    int workers = 0; // 0 -> worker_count()
    // Stratifying the env-map CDF dimension cuts light-selection noise;
    // `independent` is plain Monte Carlo with the textbook 1/spp variance.
    LightSampling light_sampling = LightSampling::stratified;

    void validate() const;
};

struct RenderOutput {
    Image color; // H x W x 3, linear radiance
    std::vector<double> radiance; // same values before the float cast
    std::vector<uint8_t> coverage;  // H*W; center-ray face hits
    std::vector<int> hit_triangle;  // H*W; -1 off the face
    std::vector<Vec2> hit_bary;     // H*W; barycentrics of vertices 1, 2

    int pixel_count() const { return static_cast<int>(coverage.size()); }
};

struct GradientRequest {
    bool alpha = true, delta = true, beta = true;
    bool gamma = true, camera = true;
    bool delta_d = false, delta_s = false;

    bool wants_geometry() const { return alpha || delta || camera; }
    bool wants_textures() const { return beta || delta_d || delta_s; }
};

struct ParamGradients {
    VecX alpha, delta, beta;
    Eigen::Matrix<double, kNumCoeffs, 3> gamma =
        Eigen::Matrix<double, kNumCoeffs, 3>::Zero();
    Vec3 rotation = Vec3::Zero();
    Vec3 translation = Vec3::Zero();
    std::vector<double> delta_d, delta_s; // M*M*3, row-major rgb
    int texture_resolution = 0;
};

// Differentiable image formation over scene parameters. `render` with
// capture=true stores per-sample records; `backward` replays them against
// a per-pixel adjoint (dLoss/dColor, H*W*3) and returns parameter
// gradients. Both backends satisfy this contract.
class DiffRenderer {
public:
    virtual ~DiffRenderer() = default;
    virtual RenderOutput render(const SceneParams& params, const RenderConfig& cfg,
                                bool capture = false) = 0;
    virtual ParamGradients backward(const std::vector<double>& adjoint,
                                    const GradientRequest& request) = 0;
    // State from the last forward pass.
    virtual const TriMesh& mesh() const = 0;
    virtual const AlbedoTextures& textures() const = 0;             // D-hat / S-hat
    virtual const AlbedoTextures& statistical_textures() const = 0; // D / S
    virtual const UvRasterization& rasterization() const = 0;
};

std::unique_ptr<DiffRenderer> make_renderer(Backend backend,
                                            const MorphableBasis& basis);

// Stand-alone ray-traced image formation (Monte Carlo, shadow rays).
RenderOutput render(const TriMesh& mesh, const AlbedoTextures& textures,
                    const ShLight& light, const CameraPose& camera,
                    const RenderConfig& cfg);
RenderOutput render_env(const TriMesh& mesh, const AlbedoTextures& textures,
                        const EnvMap& env, const CameraPose& camera,
                        const RenderConfig& cfg);
inline RenderOutput relight(const TriMesh& mesh, const AlbedoTextures& textures,
                            const CameraPose& camera, const RenderConfig& cfg,
                            const ShLight& new_light)
{
    return render(mesh, textures, new_light, camera, cfg);
}
inline RenderOutput relight(const TriMesh& mesh, const AlbedoTextures& textures,
                            const CameraPose& camera, const RenderConfig& cfg,
                            const EnvMap& new_light)
{
    return render_env(mesh, textures, new_light, camera, cfg);
}

// Vertex-based image formation: per-vertex SH irradiance interpolated over
// the pixel footprint, no visibility.
RenderOutput render_vertex(const TriMesh& mesh, const AlbedoTextures& textures,
                           const ShLight& light, const CameraPose& camera,
                           const RenderConfig& cfg);

// Unlit albedo projection through the camera (no shading); used by the
// photometric evaluation protocol.
RenderOutput projected_albedo_image(const TriMesh& mesh, const Image& texture,
                                    const CameraPose& camera,
                                    const RenderConfig& cfg);

namespace detail {

// Camera-space direction of an image point (pixel y grows downward).
inline Vec3 pixel_camera_dir(const CameraPose& cam, double px, double py)
{
    return Vec3((px - cam.principal_point.x()) / cam.focal_length,
                (py - cam.principal_point.y()) / cam.focal_length, 1.0)
        .normalized();
}

struct BilinearSample {
    int x0, y0, x1, y1;
    double fx, fy;
};

inline BilinearSample bilinear_setup(const Vec2& uv, int m)
{
    BilinearSample b;
    const double x = uv.x() * m - 0.5;
    const double y = uv.y() * m - 0.5;
    const double xf = std::floor(x);
    const double yf = std::floor(y);
    b.fx = x - xf;
    b.fy = y - yf;
    b.x0 = std::clamp(static_cast<int>(xf), 0, m - 1);
    b.y0 = std::clamp(static_cast<int>(yf), 0, m - 1);
    b.x1 = std::min(b.x0 + 1, m - 1);
    b.y1 = std::min(b.y0 + 1, m - 1);
    return b;
}

inline Vec3 bilinear_fetch(const Image& img, const BilinearSample& b)
{
    Vec3 out;
    for (int c = 0; c < 3; ++c) {
        const double v00 = img.at(b.x0, b.y0, c), v10 = img.at(b.x1, b.y0, c);
        const double v01 = img.at(b.x0, b.y1, c), v11 = img.at(b.x1, b.y1, c);
        out(c) = (1 - b.fy) * ((1 - b.fx) * v00 + b.fx * v10) +
                 b.fy * ((1 - b.fx) * v01 + b.fx * v11);
    }
    return out;
}

} // namespace detail

} // namespace facetrace
