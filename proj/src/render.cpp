#include "facetrace/render.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "facetrace/brdf.hpp"
#include "facetrace/parallel.hpp"
#include "facetrace/rng.hpp"

#include "render_internal.hpp"

namespace facetrace {

void RenderConfig::validate() const
{
    if (width < 1 || height < 1)
        throw std::invalid_argument("RenderConfig: non-positive image size");
    if (spp < 1)
        throw std::invalid_argument("RenderConfig: spp must be >= 1");
    if (sh_bands < 1 || sh_bands > kMaxBand + 1)
        throw std::invalid_argument("RenderConfig: sh_bands out of range");
    if (!(roughness > 0.0) || roughness > 1.0)
        throw std::invalid_argument("RenderConfig: roughness out of (0, 1]");
    if (workers < 0)
        throw std::invalid_argument("RenderConfig: negative worker count");
}

namespace {

// One light-path sample, enough to replay shading exactly in the backward
// pass. Visibility and the chosen env texel stay frozen.
struct SampleRec {
    double px = 0.0, py = 0.0; // jittered image point
    Vec3 wi = Vec3::Zero();
    int triangle = -1;
    int texel = -1;
    uint8_t lit = 0;
};

struct ForwardCtx {
    const TriMesh* mesh = nullptr;
    const Bvh* bvh = nullptr;
    const AlbedoTextures* tex = nullptr;
    const EnvMap* env = nullptr;
    const CameraPose* cam = nullptr;
    RenderConfig cfg;
    Mat3 rot = Mat3::Identity();
    double shadow_eps = 0.0;
};

struct HitPoint {
    Vec3 pos, n;
    Vec2 uv;
    Vec3 cd, cs;
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
};

bool shading_point(const ForwardCtx& ctx, int triangle, const Ray& ray,
                   const Hit& h, HitPoint& sp)
{
    const auto& tri = ctx.mesh->triangles[triangle];
    sp.b1 = h.u;
    sp.b2 = h.v;
    sp.b0 = 1.0 - h.u - h.v;
    sp.pos = ray.origin + h.t * ray.dir;
    const Vec3 nt = sp.b0 * ctx.mesh->normals[tri[0]] +
                    sp.b1 * ctx.mesh->normals[tri[1]] +
                    sp.b2 * ctx.mesh->normals[tri[2]];
    const double len = nt.norm();
    if (len <= 0.0) return false;
    sp.n = nt / len;
    sp.uv = sp.b0 * ctx.mesh->uvs[tri[0]] + sp.b1 * ctx.mesh->uvs[tri[1]] +
            sp.b2 * ctx.mesh->uvs[tri[2]];
    const auto bil = detail::bilinear_setup(sp.uv, ctx.tex->resolution());
    sp.cd = detail::bilinear_fetch(ctx.tex->diffuse, bil);
    sp.cs = detail::bilinear_fetch(ctx.tex->specular, bil);
    return true;
}

bool shadow_visible(const ForwardCtx& ctx, const HitPoint& sp, const Vec3& wi)
{
    Ray sray;
    sray.origin = sp.pos + ctx.shadow_eps * sp.n;
    sray.dir = wi;
    sray.tmin = 1e-9;
    return !ctx.bvh->any_hit(sray);
}

void forward_pixel(const ForwardCtx& ctx, int x, int y, RenderOutput& out,
                   std::vector<SampleRec>* records)
{
    const int pix = y * ctx.cfg.width + x;
    const CameraPose& cam = *ctx.cam;

    // Center ray fixes coverage and the hit ids used by the losses.
    {
        Ray ray;
        ray.origin = cam.translation;
        ray.dir = ctx.rot * detail::pixel_camera_dir(cam, x + 0.5, y + 0.5);
        const Hit h = ctx.bvh->closest_hit(ray);
        out.coverage[pix] = h.valid() ? 1 : 0;
        out.hit_triangle[pix] = h.triangle;
        out.hit_bary[pix] = Vec2(h.u, h.v);
    }

    Pcg32 rng(ctx.cfg.rng_seed, static_cast<uint64_t>(pix));
    Vec3 acc = Vec3::Zero();
    for (int s = 0; s < ctx.cfg.spp; ++s) {
        const double jx = rng.uniform();
        const double jy = rng.uniform();
        double u1 = rng.uniform();
        const double u2 = rng.uniform();
        if (ctx.cfg.light_sampling == LightSampling::stratified)
            u1 = (s + u1) / ctx.cfg.spp;

        SampleRec rec;
        rec.px = x + jx;
        rec.py = y + jy;

        Ray ray;
        ray.origin = cam.translation;
        ray.dir = ctx.rot * detail::pixel_camera_dir(cam, rec.px, rec.py);
        const Hit h = ctx.bvh->closest_hit(ray);
        if (!h.valid()) {
            acc += ctx.cfg.background;
            if (records) (*records)[static_cast<size_t>(pix) * ctx.cfg.spp + s] = rec;
            continue;
        }
        HitPoint sp;
        if (!shading_point(ctx, h.triangle, ray, h, sp)) {
            if (records) (*records)[static_cast<size_t>(pix) * ctx.cfg.spp + s] = rec;
            continue;
        }
        rec.triangle = h.triangle;

        const auto ls = ctx.env->sample(u1, u2);
        rec.texel = ls.texel;
        rec.wi = ls.direction;
        if (ls.pdf > 0.0 && shadow_visible(ctx, sp, ls.direction)) {
            rec.lit = 1;
            const double cos_i = std::max(sp.n.dot(ls.direction), 0.0);
            if (cos_i > 0.0) {
                BrdfParams mat;
                mat.roughness = ctx.cfg.roughness;
                mat.diffuse = sp.cd;
                mat.specular = sp.cs;
                const Vec3 f = eval_brdf(mat, sp.n, ls.direction, -ray.dir);
                acc += f.cwiseProduct(ls.radiance) * (cos_i / ls.pdf);
            }
        }
        if (records) (*records)[static_cast<size_t>(pix) * ctx.cfg.spp + s] = rec;
    }
    acc /= ctx.cfg.spp;
    for (int c = 0; c < 3; ++c) {
        out.color.at(x, y, c) = static_cast<float>(acc(c));
        out.radiance[static_cast<size_t>(pix) * 3 + c] = acc(c);
    }
}

RenderOutput forward(const ForwardCtx& ctx, std::vector<SampleRec>* records)
{
    const int w = ctx.cfg.width, h = ctx.cfg.height;
    RenderOutput out;
    out.color = Image(w, h, 3);
    out.radiance.assign(static_cast<size_t>(w) * h * 3, 0.0);
    out.coverage.assign(static_cast<size_t>(w) * h, 0);
    out.hit_triangle.assign(static_cast<size_t>(w) * h, -1);
    out.hit_bary.assign(static_cast<size_t>(w) * h, Vec2::Zero());
    if (records)
        records->assign(static_cast<size_t>(w) * h * ctx.cfg.spp, SampleRec{});

    const int workers = worker_count(ctx.cfg.workers);
    parallel_for(0, w * h, workers, [&](int begin, int end) {
        for (int pix = begin; pix < end; ++pix)
            forward_pixel(ctx, pix % w, pix / w, out, records);
    });
    return out;
}

ForwardCtx make_ctx(const TriMesh& mesh, const Bvh& bvh,
                    const AlbedoTextures& tex, const EnvMap& env,
                    const CameraPose& cam, const RenderConfig& cfg)
{
    cfg.validate();
    if (mesh.uvs.size() != mesh.positions.size() ||
        mesh.normals.size() != mesh.positions.size())
        throw std::invalid_argument("render: mesh is missing normals or UVs");
    ForwardCtx ctx;
    ctx.mesh = &mesh;
    ctx.bvh = &bvh;
    ctx.tex = &tex;
    ctx.env = &env;
    ctx.cam = &cam;
    ctx.cfg = cfg;
    ctx.rot = cam.rotation_matrix();
    ctx.shadow_eps = 1e-3 * std::max(bvh.scene_diagonal(), 1e-6);
    return ctx;
}

// Differentiable backend: forward with sample capture, then a strictly
// sequential replay of the records against the adjoint image. The shading
// kernel runs on 12-slot duals (normal, view, two albedos); everything
// upstream of those slots uses hand-written adjoints.
class RaytraceRenderer final : public DiffRenderer {
public:
    explicit RaytraceRenderer(const MorphableBasis& basis) : basis_(basis)
    {
        basis_.validate();
        raster_ = rasterize_uv(basis_, basis_.texture_resolution);
    }

    RenderOutput render(const SceneParams& params, const RenderConfig& cfg,
                        bool capture) override
    {
        params_ = params;
        cfg_ = cfg;
        mesh_ = synthesize_geometry(basis_, params.alpha, params.delta);
        stat_ = synthesize_statistical_albedos(basis_, params.beta, raster_);
        tex_ = apply_increments(stat_, params.delta_d, params.delta_s);
        light_ = params.gamma.truncated(cfg.sh_bands);
        env_ = EnvMap::from_sh(light_);
        bvh_ = std::make_unique<Bvh>(mesh_);
        auto ctx = make_ctx(mesh_, *bvh_, tex_, env_, params_.camera, cfg_);
        captured_ = capture;
        return forward(ctx, capture ? &records_ : nullptr);
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
    EnvMap env_;
    std::unique_ptr<Bvh> bvh_;
    std::vector<SampleRec> records_;
    bool captured_ = false;
};

// Slot layout of the shading dual.
enum { kSlotN = 0, kSlotWo = 3, kSlotCd = 6, kSlotCs = 9, kSlots = 12 };

ParamGradients RaytraceRenderer::backward(const std::vector<double>& adjoint,
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
    const auto& ytab = envmap_basis_table();
    const Vec3 lum_w(0.2126, 0.7152, 0.0722);
    const double total = env_.total_luminance();

    // d(total luminance)/d(gamma), fixed by the current clamp pattern.
    Eigen::Matrix<double, Eigen::Dynamic, 3> dtotal =
        Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n_coeffs, 3);
    for (int t = 0; t < EnvMap::texel_count(); ++t) {
        const Vec3 rad = env_.texel_radiance(t);
        const double omega = env_.solid_angle(t / EnvMap::kSize);
        for (int c = 0; c < 3; ++c) {
            if (!(rad(c) > 0.0)) continue;
            const double f = omega * lum_w(c);
            for (int k = 0; k < n_coeffs; ++k)
                dtotal(k, c) += f * ytab[static_cast<size_t>(t) * kNumCoeffs + k];
        }
    }

    std::vector<Vec3> adj_pos(n_verts, Vec3::Zero());
    std::vector<Vec3> adj_vnormal(n_verts, Vec3::Zero());
    std::vector<double> adj_texd, adj_texs;
    if (request.wants_textures()) {
        adj_texd.assign(static_cast<size_t>(m) * m * 3, 0.0);
        adj_texs.assign(static_cast<size_t>(m) * m * 3, 0.0);
    }
    std::vector<Vec3> texel_coef(EnvMap::texel_count(), Vec3::Zero());
    double total_coef = 0.0;
    ParamGradients grads;

    using D = Dual<kSlots>;
    const double inv_spp = 1.0 / cfg_.spp;
    const double eps = 1e-12;

    for (size_t r = 0; r < records_.size(); ++r) {
        const SampleRec& rec = records_[r];
        if (rec.triangle < 0 || !rec.lit) continue;
        const int pix = static_cast<int>(r / cfg_.spp);
        Vec3 abar(adjoint[static_cast<size_t>(pix) * 3 + 0],
                  adjoint[static_cast<size_t>(pix) * 3 + 1],
                  adjoint[static_cast<size_t>(pix) * 3 + 2]);
        abar *= inv_spp;
        if (abar.isZero(0.0)) continue;

        const Vec3 rad = env_.texel_radiance(rec.texel);
        const double lum = lum_w.dot(rad);
        if (!(lum > eps)) continue;
        const double inv_pdf = total / lum;

        // Recreate the forward hit on the recorded triangle.
        const Vec3 dc = detail::pixel_camera_dir(params_.camera, rec.px, rec.py);
        Ray ray;
        ray.origin = params_.camera.translation;
        ray.dir = rot * dc;
        const auto& tri = mesh_.triangles[rec.triangle];
        const Vec3& p0 = mesh_.positions[tri[0]];
        const Vec3& p1 = mesh_.positions[tri[1]];
        const Vec3& p2 = mesh_.positions[tri[2]];
        Hit hit;
        if (!intersect_triangle(ray, p0, p1, p2, hit)) continue;
        const double b1 = hit.u, b2 = hit.v, b0 = 1.0 - hit.u - hit.v;

        const Vec3 nt = b0 * mesh_.normals[tri[0]] + b1 * mesh_.normals[tri[1]] +
                        b2 * mesh_.normals[tri[2]];
        const double nlen = nt.norm();
        if (!(nlen > 0.0)) continue;
        const Vec3 n = nt / nlen;
        const Vec2 uv = b0 * mesh_.uvs[tri[0]] + b1 * mesh_.uvs[tri[1]] +
                        b2 * mesh_.uvs[tri[2]];
        const auto bil = detail::bilinear_setup(uv, m);
        const Vec3 cd = detail::bilinear_fetch(tex_.diffuse, bil);
        const Vec3 cs = detail::bilinear_fetch(tex_.specular, bil);
        const Vec3 wo = -ray.dir;

        // Shading dual: G_c = f_c * max(n.wi, 0).
        TVec3<D> n_d(D::var(n.x(), kSlotN), D::var(n.y(), kSlotN + 1),
                     D::var(n.z(), kSlotN + 2));
        TVec3<D> wo_d(D::var(wo.x(), kSlotWo), D::var(wo.y(), kSlotWo + 1),
                      D::var(wo.z(), kSlotWo + 2));
        TVec3<D> wi_d{D(rec.wi.x()), D(rec.wi.y()), D(rec.wi.z())};
        std::array<D, 3> cd_d{D::var(cd.x(), kSlotCd), D::var(cd.y(), kSlotCd + 1),
                              D::var(cd.z(), kSlotCd + 2)};
        std::array<D, 3> cs_d{D::var(cs.x(), kSlotCs), D::var(cs.y(), kSlotCs + 1),
                              D::var(cs.z(), kSlotCs + 2)};
        auto f = brdf_eval_t<D>(cfg_.roughness, n_d, wi_d, wo_d, cd_d, cs_d);
        const D cos_i = facetrace::max(n_d.dot(wi_d), 0.0);
        std::array<D, 3> g;
        for (int c = 0; c < 3; ++c) g[c] = f[c] * cos_i;

        // Light gradient: direct radiance term, the per-texel pdf term and
        // the normalization term, all against the fixed texel choice.
        if (request.gamma) {
            double tmp = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double ag = abar(c) * g[c].v;
                if (rad(c) > 0.0)
                    texel_coef[rec.texel](c) += ag * inv_pdf;
                tmp += ag * rad(c);
            }
            total_coef += tmp / lum;
            const double s = tmp * total / (lum * lum);
            for (int c = 0; c < 3; ++c)
                if (rad(c) > 0.0)
                    texel_coef[rec.texel](c) -= s * lum_w(c);
        }

        // Pull the dual partials back through abar and the light factor.
        std::array<double, kSlots> slot{};
        for (int c = 0; c < 3; ++c) {
            const double k = abar(c) * rad(c) * inv_pdf;
            for (int j = 0; j < kSlots; ++j)
                slot[j] += k * g[c].d[j];
        }
        const Vec3 adj_cd(slot[kSlotCd], slot[kSlotCd + 1], slot[kSlotCd + 2]);
        const Vec3 adj_cs(slot[kSlotCs], slot[kSlotCs + 1], slot[kSlotCs + 2]);
        const Vec3 adj_n(slot[kSlotN], slot[kSlotN + 1], slot[kSlotN + 2]);
        const Vec3 adj_wo(slot[kSlotWo], slot[kSlotWo + 1], slot[kSlotWo + 2]);

        Vec2 adj_uv = Vec2::Zero();
        auto scatter = [&](std::vector<double>& dst, const Image& img,
                           const Vec3& adj) {
            const double fx = bil.fx, fy = bil.fy;
            for (int c = 0; c < 3; ++c) {
                if (!dst.empty()) {
                    dst[(static_cast<size_t>(bil.y0) * m + bil.x0) * 3 + c] +=
                        (1 - fx) * (1 - fy) * adj(c);
                    dst[(static_cast<size_t>(bil.y0) * m + bil.x1) * 3 + c] +=
                        fx * (1 - fy) * adj(c);
                    dst[(static_cast<size_t>(bil.y1) * m + bil.x0) * 3 + c] +=
                        (1 - fx) * fy * adj(c);
                    dst[(static_cast<size_t>(bil.y1) * m + bil.x1) * 3 + c] +=
                        fx * fy * adj(c);
                }
                const double v00 = img.at(bil.x0, bil.y0, c);
                const double v10 = img.at(bil.x1, bil.y0, c);
                const double v01 = img.at(bil.x0, bil.y1, c);
                const double v11 = img.at(bil.x1, bil.y1, c);
                const double dvdx = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
                const double dvdy = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
                adj_uv.x() += adj(c) * dvdx * m;
                adj_uv.y() += adj(c) * dvdy * m;
            }
        };
        if (request.wants_textures() || request.wants_geometry()) {
            scatter(adj_texd, tex_.diffuse, adj_cd);
            scatter(adj_texs, tex_.specular, adj_cs);
        }

        if (!request.wants_geometry()) continue;

        // Barycentric adjoints from UV interpolation and the normal chain.
        double adj_b0 = adj_uv.dot(mesh_.uvs[tri[0]]);
        double adj_b1 = adj_uv.dot(mesh_.uvs[tri[1]]);
        double adj_b2 = adj_uv.dot(mesh_.uvs[tri[2]]);
        const Vec3 adj_nt = (adj_n - n * n.dot(adj_n)) / nlen;
        adj_vnormal[tri[0]] += b0 * adj_nt;
        adj_vnormal[tri[1]] += b1 * adj_nt;
        adj_vnormal[tri[2]] += b2 * adj_nt;
        adj_b0 += adj_nt.dot(mesh_.normals[tri[0]]);
        adj_b1 += adj_nt.dot(mesh_.normals[tri[1]]);
        adj_b2 += adj_nt.dot(mesh_.normals[tri[2]]);

        // Intersection adjoint: (t, b1, b2) solves J (t, b1, b2) = p0 - o
        // with J = [d, -(p1-p0), -(p2-p0)]; mu = J^{-T} lambda gives the
        // sensitivities to the vertices, the origin and the direction.
        const Vec3 e1 = p1 - p0, e2 = p2 - p0;
        const Vec3 j0 = ray.dir, j1 = -e1, j2 = -e2;
        const double det = j0.dot(j1.cross(j2));
        if (std::abs(det) < 1e-18) continue;
        const Vec3 lambda(0.0, adj_b1 - adj_b0, adj_b2 - adj_b0);
        const Vec3 mu = (lambda.y() * j2.cross(j0) + lambda.z() * j0.cross(j1)) / det;

        adj_pos[tri[0]] += b0 * mu;
        adj_pos[tri[1]] += b1 * mu;
        adj_pos[tri[2]] += b2 * mu;
        Vec3 adj_dir = -hit.t * mu;
        adj_dir -= adj_wo;
        if (request.camera) {
            grads.translation -= mu;
            for (int k = 0; k < 3; ++k)
                grads.rotation(k) += adj_dir.dot(drot[k] * dc);
        }
    }

    // Contract the per-texel coefficients against the basis table.
    if (request.gamma) {
        for (int t = 0; t < EnvMap::texel_count(); ++t) {
            const Vec3& coef = texel_coef[t];
            if (coef.isZero(0.0)) continue;
            for (int k = 0; k < n_coeffs; ++k) {
                const double y = ytab[static_cast<size_t>(t) * kNumCoeffs + k];
                for (int c = 0; c < 3; ++c)
                    grads.gamma(k, c) += coef(c) * y;
            }
        }
        grads.gamma.topRows(n_coeffs) += total_coef * dtotal;
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
    return grads;
}

} // namespace

std::unique_ptr<DiffRenderer> make_raytrace_renderer(const MorphableBasis& basis)
{
    return std::make_unique<RaytraceRenderer>(basis);
}

std::unique_ptr<DiffRenderer> make_renderer(Backend backend,
                                            const MorphableBasis& basis)
{
    return backend == Backend::raytrace ? make_raytrace_renderer(basis)
                                        : make_vertex_renderer(basis);
}

RenderOutput render_env(const TriMesh& mesh, const AlbedoTextures& textures,
                        const EnvMap& env, const CameraPose& camera,
                        const RenderConfig& cfg)
{
    Bvh bvh(mesh);
    auto ctx = make_ctx(mesh, bvh, textures, env, camera, cfg);
    return forward(ctx, nullptr);
}

RenderOutput render(const TriMesh& mesh, const AlbedoTextures& textures,
                    const ShLight& light, const CameraPose& camera,
                    const RenderConfig& cfg)
{
    return render_env(mesh, textures, EnvMap::from_sh(light.truncated(cfg.sh_bands)),
                      camera, cfg);
}

RenderOutput projected_albedo_image(const TriMesh& mesh, const Image& texture,
                                    const CameraPose& camera,
                                    const RenderConfig& cfg)
{
    cfg.validate();
    const int w = cfg.width, h = cfg.height;
    RenderOutput out;
    out.color = Image(w, h, 3);
    out.radiance.assign(static_cast<size_t>(w) * h * 3, 0.0);
    out.coverage.assign(static_cast<size_t>(w) * h, 0);
    out.hit_triangle.assign(static_cast<size_t>(w) * h, -1);
    out.hit_bary.assign(static_cast<size_t>(w) * h, Vec2::Zero());

    Bvh bvh(mesh);
    const Mat3 rot = camera.rotation_matrix();
    const int workers = worker_count(cfg.workers);
    parallel_for(0, w * h, workers, [&](int begin, int end) {
        for (int pix = begin; pix < end; ++pix) {
            const int x = pix % w, y = pix / w;
            Ray ray;
            ray.origin = camera.translation;
            ray.dir = rot * detail::pixel_camera_dir(camera, x + 0.5, y + 0.5);
            const Hit hit = bvh.closest_hit(ray);
            out.hit_triangle[pix] = hit.triangle;
            out.hit_bary[pix] = Vec2(hit.u, hit.v);
            Vec3 col = cfg.background;
            if (hit.valid()) {
                out.coverage[pix] = 1;
                const auto& tri = mesh.triangles[hit.triangle];
                const double b0 = 1.0 - hit.u - hit.v;
                const Vec2 uv = b0 * mesh.uvs[tri[0]] + hit.u * mesh.uvs[tri[1]] +
                                hit.v * mesh.uvs[tri[2]];
                col = detail::bilinear_fetch(texture,
                                             detail::bilinear_setup(uv, texture.width()));
            }
            for (int c = 0; c < 3; ++c) {
                out.color.at(x, y, c) = static_cast<float>(col(c));
                out.radiance[static_cast<size_t>(pix) * 3 + c] = col(c);
            }
        }
    });
    return out;
}

} // namespace facetrace
