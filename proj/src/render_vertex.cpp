#include <cmath>
#include <stdexcept>

#include "facetrace/parallel.hpp"
#include "facetrace/render.hpp"
#include "facetrace/shading.hpp"

#include "render_internal.hpp"

namespace facetrace {

namespace {

// Slot layout of the per-vertex shading dual.
enum { kSlotN = 0, kSlotView = 3, kSlotCd = 6, kSlotCs = 9, kSlots = 12 };
using D = Dual<kSlots>;

template <typename T>
TVec3<T> reflect_t(const TVec3<T>& v, const TVec3<T>& n)
{
    const T s = n.dot(v) * T(2.0);
    return {n.x * s - v.x, n.y * s - v.y, n.z * s - v.z};
}

template <typename T>
T clamp01(const T& x)
{
    if (x > T(1.0)) return T(1.0);
    if (T(0.0) > x) return T(0.0);
    return x;
}

// B = (1 - s) B_d + s B_s on dual numbers, mirroring vertex_irradiance.
template <typename T>
std::array<T, 3> vertex_radiance_t(const ShLight& light, const TVec3<T>& n,
                                   const TVec3<T>& view, const std::array<T, 3>& cd,
                                   const std::array<T, 3>& cs, double roughness,
                                   int max_band)
{
    const auto wd = diffuse_band_weights(max_band);
    const auto ws = specular_band_weights(roughness, max_band);
    const auto rd = sh_convolved_radiance(light, wd, n);
    const auto rs = sh_convolved_radiance(light, ws, reflect_t(view, n));
    const T lum = T(0.2126) * cs[0] + T(0.7152) * cs[1] + T(0.0722) * cs[2];
    const T s = clamp01(lum);
    std::array<T, 3> out;
    for (int c = 0; c < 3; ++c)
        out[c] = (T(1.0) - s) * facetrace::max(rd[c], 0.0) * cd[c] +
                 s * facetrace::max(rs[c], 0.0);
    return out;
}

struct VertexShade {
    std::vector<Vec3> b;    // per-vertex outgoing radiance
    std::vector<Vec3> cd, cs;
    std::vector<Vec3> view;
};

VertexShade shade_vertices(const TriMesh& mesh, const AlbedoTextures& tex,
                           const ShLight& light, const CameraPose& cam,
                           const RenderConfig& cfg, int workers)
{
    const int n = mesh.vertex_count();
    VertexShade vs;
    vs.b.resize(n);
    vs.cd.resize(n);
    vs.cs.resize(n);
    vs.view.resize(n);
    parallel_for(0, n, workers, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const auto bil = detail::bilinear_setup(mesh.uvs[i], tex.resolution());
            vs.cd[i] = detail::bilinear_fetch(tex.diffuse, bil);
            vs.cs[i] = detail::bilinear_fetch(tex.specular, bil);
            vs.view[i] = (cam.translation - mesh.positions[i]).normalized();
            vs.b[i] = vertex_irradiance(light, mesh.normals[i], vs.cd[i], vs.cs[i],
                                        vs.view[i], cfg.roughness, cfg.sh_bands - 1);
        }
    });
    return vs;
}

RenderOutput rasterize(const TriMesh& mesh, const Bvh& bvh,
                       const std::vector<Vec3>& bvals, const CameraPose& cam,
                       const RenderConfig& cfg, int workers)
{
    const int w = cfg.width, h = cfg.height;
    RenderOutput out;
    out.color = Image(w, h, 3);
    out.radiance.assign(static_cast<size_t>(w) * h * 3, 0.0);
    out.coverage.assign(static_cast<size_t>(w) * h, 0);
    out.hit_triangle.assign(static_cast<size_t>(w) * h, -1);
    out.hit_bary.assign(static_cast<size_t>(w) * h, Vec2::Zero());
    const Mat3 rot = cam.rotation_matrix();
    parallel_for(0, w * h, workers, [&](int begin, int end) {
        for (int pix = begin; pix < end; ++pix) {
            const int x = pix % w, y = pix / w;
            Ray ray;
            ray.origin = cam.translation;
            ray.dir = rot * detail::pixel_camera_dir(cam, x + 0.5, y + 0.5);
            const Hit hit = bvh.closest_hit(ray);
            out.hit_triangle[pix] = hit.triangle;
            out.hit_bary[pix] = Vec2(hit.u, hit.v);
            Vec3 col = cfg.background;
            if (hit.valid()) {
                out.coverage[pix] = 1;
                const auto& tri = mesh.triangles[hit.triangle];
                col = (1.0 - hit.u - hit.v) * bvals[tri[0]] +
                      hit.u * bvals[tri[1]] + hit.v * bvals[tri[2]];
            }
            for (int c = 0; c < 3; ++c) {
                out.color.at(x, y, c) = static_cast<float>(col(c));
                out.radiance[static_cast<size_t>(pix) * 3 + c] = col(c);
            }
        }
    });
    return out;
}

class VertexRenderer final : public DiffRenderer {
public:
    explicit VertexRenderer(const MorphableBasis& basis) : basis_(basis)
    {
        basis_.validate();
        raster_ = rasterize_uv(basis_, basis_.texture_resolution);
    }

    RenderOutput render(const SceneParams& params, const RenderConfig& cfg,
                        bool capture) override
    {
        cfg.validate();
        params_ = params;
        cfg_ = cfg;
        mesh_ = synthesize_geometry(basis_, params.alpha, params.delta);
        stat_ = synthesize_statistical_albedos(basis_, params.beta, raster_);
        tex_ = apply_increments(stat_, params.delta_d, params.delta_s);
        light_ = params.gamma.truncated(cfg.sh_bands);
        bvh_ = std::make_unique<Bvh>(mesh_);
        const int workers = worker_count(cfg.workers);
        shade_ = shade_vertices(mesh_, tex_, light_, params.camera, cfg, workers);
        last_ = rasterize(mesh_, *bvh_, shade_.b, params.camera, cfg, workers);
        captured_ = capture;
        return last_;
    }

    ParamGradients backward(const std::vector<double>& adjoint,
                            const GradientRequest& request) override;

    const TriMesh& mesh() const override { return mesh_; }
    const AlbedoTextures& textures() const override { return tex_; }
    const AlbedoTextures& statistical_textures() const override { return stat_; }
    const UvRasterization& rasterization() const override { return raster_; }

private:
    MorphableBasis basis_;
    UvRasterization raster_;
    SceneParams params_;
    RenderConfig cfg_;
    TriMesh mesh_;
    AlbedoTextures stat_, tex_;
    ShLight light_;
    std::unique_ptr<Bvh> bvh_;
    VertexShade shade_;
    RenderOutput last_;
    bool captured_ = false;
};

ParamGradients VertexRenderer::backward(const std::vector<double>& adjoint,
                                        const GradientRequest& request)
{
    if (!captured_)
        throw std::logic_error("backward: no captured forward pass");
    const int w = cfg_.width, h = cfg_.height;
    if (adjoint.size() != static_cast<size_t>(w) * h * 3)
        throw std::invalid_argument("backward: adjoint size mismatch");

    const int n_verts = mesh_.vertex_count();
    const int m = tex_.resolution();
    const int n_coeffs = sh_count(cfg_.sh_bands - 1);
    const Mat3 rot = params_.camera.rotation_matrix();
    std::array<Mat3, 3> drot;
    axis_angle_jacobian(params_.camera.rotation, drot.data());

    std::vector<Vec3> adj_b(n_verts, Vec3::Zero());
    std::vector<Vec3> adj_pos(n_verts, Vec3::Zero());
    std::vector<Vec3> adj_vnormal(n_verts, Vec3::Zero());
    std::vector<double> adj_texd, adj_texs;
    if (request.wants_textures()) {
        adj_texd.assign(static_cast<size_t>(m) * m * 3, 0.0);
        adj_texs.assign(static_cast<size_t>(m) * m * 3, 0.0);
    }
    ParamGradients grads;

    // Pixel pass: split the adjoint between the vertex radiances and the
    // barycentric coordinates of the primary hit.
    for (int pix = 0; pix < w * h; ++pix) {
        const int t = last_.hit_triangle[pix];
        if (t < 0) continue;
        const Vec3 abar(adjoint[static_cast<size_t>(pix) * 3 + 0],
                        adjoint[static_cast<size_t>(pix) * 3 + 1],
                        adjoint[static_cast<size_t>(pix) * 3 + 2]);
        if (abar.isZero(0.0)) continue;
        const auto& tri = mesh_.triangles[t];
        const double b1 = last_.hit_bary[pix].x(), b2 = last_.hit_bary[pix].y();
        const double b0 = 1.0 - b1 - b2;
        adj_b[tri[0]] += b0 * abar;
        adj_b[tri[1]] += b1 * abar;
        adj_b[tri[2]] += b2 * abar;

        if (!request.wants_geometry()) continue;
        const int x = pix % w, y = pix / w;
        const Vec3 dc = detail::pixel_camera_dir(params_.camera, x + 0.5, y + 0.5);
        Ray ray;
        ray.origin = params_.camera.translation;
        ray.dir = rot * dc;
        const Vec3& p0 = mesh_.positions[tri[0]];
        const Vec3& p1 = mesh_.positions[tri[1]];
        const Vec3& p2 = mesh_.positions[tri[2]];
        Hit hit;
        if (!intersect_triangle(ray, p0, p1, p2, hit)) continue;

        const double adj_b0 = shade_.b[tri[0]].dot(abar);
        const double adj_b1 = shade_.b[tri[1]].dot(abar);
        const double adj_b2 = shade_.b[tri[2]].dot(abar);
        const Vec3 j0 = ray.dir, j1 = p0 - p1, j2 = p0 - p2;
        const double det = j0.dot(j1.cross(j2));
        if (std::abs(det) < 1e-18) continue;
        const Vec3 lambda(0.0, adj_b1 - adj_b0, adj_b2 - adj_b0);
        const Vec3 mu = (lambda.y() * j2.cross(j0) + lambda.z() * j0.cross(j1)) / det;
        adj_pos[tri[0]] += b0 * mu;
        adj_pos[tri[1]] += b1 * mu;
        adj_pos[tri[2]] += b2 * mu;
        if (request.camera) {
            grads.translation -= mu;
            const Vec3 adj_dir = -hit.t * mu;
            for (int k = 0; k < 3; ++k)
                grads.rotation(k) += adj_dir.dot(drot[k] * dc);
        }
    }

    // Vertex pass: push the accumulated radiance adjoints through the
    // shading dual and the analytic light jacobian.
    const auto wd = diffuse_band_weights(cfg_.sh_bands - 1);
    const auto ws = specular_band_weights(cfg_.roughness, cfg_.sh_bands - 1);
    for (int i = 0; i < n_verts; ++i) {
        const Vec3& ab = adj_b[i];
        if (ab.isZero(0.0)) continue;
        const Vec3& n = mesh_.normals[i];
        const Vec3& view = shade_.view[i];
        const Vec3& cd = shade_.cd[i];
        const Vec3& cs = shade_.cs[i];

        TVec3<D> n_d(D::var(n.x(), kSlotN), D::var(n.y(), kSlotN + 1),
                     D::var(n.z(), kSlotN + 2));
        TVec3<D> v_d(D::var(view.x(), kSlotView), D::var(view.y(), kSlotView + 1),
                     D::var(view.z(), kSlotView + 2));
        std::array<D, 3> cd_d{D::var(cd.x(), kSlotCd), D::var(cd.y(), kSlotCd + 1),
                              D::var(cd.z(), kSlotCd + 2)};
        std::array<D, 3> cs_d{D::var(cs.x(), kSlotCs), D::var(cs.y(), kSlotCs + 1),
                              D::var(cs.z(), kSlotCs + 2)};
        const auto b = vertex_radiance_t<D>(light_, n_d, v_d, cd_d, cs_d,
                                            cfg_.roughness, cfg_.sh_bands - 1);

        std::array<double, kSlots> slot{};
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < kSlots; ++j)
                slot[j] += ab(c) * b[c].d[j];

        if (request.wants_geometry()) {
            adj_vnormal[i] += Vec3(slot[kSlotN], slot[kSlotN + 1], slot[kSlotN + 2]);
            const Vec3 adj_view(slot[kSlotView], slot[kSlotView + 1], slot[kSlotView + 2]);
            const Vec3 q = params_.camera.translation - mesh_.positions[i];
            const double len = q.norm();
            if (len > 0.0) {
                const Vec3 adj_q = (adj_view - view * view.dot(adj_view)) / len;
                adj_pos[i] -= adj_q;
                if (request.camera) grads.translation += adj_q;
            }
        }

        if (request.wants_textures()) {
            const auto bil = detail::bilinear_setup(mesh_.uvs[i], m);
            const double wq[4] = {(1 - bil.fx) * (1 - bil.fy), bil.fx * (1 - bil.fy),
                                  (1 - bil.fx) * bil.fy, bil.fx * bil.fy};
            const int tex_idx[4] = {bil.y0 * m + bil.x0, bil.y0 * m + bil.x1,
                                    bil.y1 * m + bil.x0, bil.y1 * m + bil.x1};
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < 4; ++k) {
                    adj_texd[static_cast<size_t>(tex_idx[k]) * 3 + c] +=
                        wq[k] * slot[kSlotCd + c];
                    adj_texs[static_cast<size_t>(tex_idx[k]) * 3 + c] +=
                        wq[k] * slot[kSlotCs + c];
                }
        }

        if (request.gamma) {
            const double s = std::clamp(luminance(cs), 0.0, 1.0);
            const auto rd = sh_convolved_radiance(light_, wd, TVec3<double>(n));
            const Vec3 refl = reflect(view, n);
            const auto rs = sh_convolved_radiance(light_, ws, TVec3<double>(refl));
            double yn[kNumCoeffs], yr[kNumCoeffs];
            sh_eval(n.x(), n.y(), n.z(), cfg_.sh_bands - 1, yn);
            sh_eval(refl.x(), refl.y(), refl.z(), cfg_.sh_bands - 1, yr);
            for (int l = 0; l < cfg_.sh_bands; ++l)
                for (int mm = -l; mm <= l; ++mm) {
                    const int k = sh_index(l, mm);
                    for (int c = 0; c < 3; ++c) {
                        double dB = 0.0;
                        if (rd[c] > 0.0) dB += (1.0 - s) * cd(c) * wd[l] * yn[k];
                        if (rs[c] > 0.0) dB += s * ws[l] * yr[k];
                        grads.gamma(k, c) += ab(c) * dB;
                    }
                }
        }
    }

    if (request.wants_geometry()) {
        normals_backward(mesh_, adj_vnormal, adj_pos);
        VecX g = VecX::Zero(3 * n_verts);
        for (int i = 0; i < n_verts; ++i)
            g.segment<3>(3 * i) = adj_pos[i];
        if (request.alpha) grads.alpha = basis_.shape_basis.transpose() * g;
        if (request.delta) grads.delta = basis_.expr_basis.transpose() * g;
    }

    if (request.wants_textures()) {
        grads.texture_resolution = m;
        if (request.beta)
            grads.beta = albedo_coeff_adjoint(basis_, raster_, adj_texd, adj_texs);
        if (request.delta_d) grads.delta_d = std::move(adj_texd);
        if (request.delta_s) grads.delta_s = std::move(adj_texs);
    }
    (void)n_coeffs;
    return grads;
}

} // namespace

std::unique_ptr<DiffRenderer> make_vertex_renderer(const MorphableBasis& basis)
{
    return std::make_unique<VertexRenderer>(basis);
}

RenderOutput render_vertex(const TriMesh& mesh, const AlbedoTextures& textures,
                           const ShLight& light, const CameraPose& camera,
                           const RenderConfig& cfg)
{
    cfg.validate();
    if (mesh.uvs.size() != mesh.positions.size() ||
        mesh.normals.size() != mesh.positions.size())
        throw std::invalid_argument("render_vertex: mesh is missing normals or UVs");
    Bvh bvh(mesh);
    const int workers = worker_count(cfg.workers);
    const ShLight lt = light.truncated(cfg.sh_bands);
    const auto vs = shade_vertices(mesh, textures, lt, camera, cfg, workers);
    return rasterize(mesh, bvh, vs.b, camera, cfg, workers);
}

} // namespace facetrace
