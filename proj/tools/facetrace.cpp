#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "facetrace/eval_geometry.hpp"
#include "facetrace/eval_image.hpp"
#include "facetrace/fitter.hpp"
#include "facetrace/scene_io.hpp"

namespace fs = std::filesystem;
using namespace facetrace;

namespace {

struct CommonFlags {
    std::string backend = "raytrace";
    int spp = -1;
    int bands = -1;
    int64_t seed = -1;
    int workers = -1;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--backend", backend, "raytrace or vertex")
            ->check(CLI::IsMember({"raytrace", "vertex"}));
        cmd->add_option("--spp", spp, "samples per pixel")->check(CLI::PositiveNumber);
        cmd->add_option("--bands", bands, "SH bands 1..9")->check(CLI::Range(1, 9));
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--workers", workers, "worker threads (0 = hardware)");
    }

    Backend backend_enum() const
    {
        return backend == "vertex" ? Backend::vertex : Backend::raytrace;
    }

    void apply(RenderConfig& cfg) const
    {
        if (spp > 0)
            cfg.spp = spp;
        if (bands > 0)
            cfg.sh_bands = bands;
        if (seed >= 0)
            cfg.rng_seed = static_cast<uint64_t>(seed);
        if (workers >= 0)
            cfg.workers = workers;
    }
};

void save_output_image(const Image& img, const std::string& path)
{
    if (fs::path(path).extension() == ".png")
        save_png(img, path);
    else
        save_pfm(img, path);
}

std::string stem_with(const std::string& path, const char* suffix)
{
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

Image coverage_image(const RenderOutput& out)
{
    Image m(out.color.width(), out.color.height(), 1);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            m.at(x, y) = out.coverage[static_cast<size_t>(y) * m.width() + x] ? 1.0f : 0.0f;
    return m;
}

int cmd_render(const std::string& scene_path, const std::string& out_path,
               const CommonFlags& flags)
{
    SceneDocument doc = load_scene(scene_path);
    flags.apply(doc.config);
    const MorphableBasis basis =
        load_basis(resolve_scene_path(scene_path, doc.basis_path));

    auto renderer = make_renderer(flags.backend_enum(), basis);
    const auto t0 = std::chrono::steady_clock::now();
    const RenderOutput out = renderer->render(doc.params, doc.config);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_output_image(out.color, out_path);
    save_png(coverage_image(out), stem_with(out_path, "_coverage.png"));
    const long long rays =
        static_cast<long long>(doc.config.width) * doc.config.height *
        (flags.backend == "vertex" ? 1 : doc.config.spp);
    std::printf("spp=%d time=%.3fs rays=%lld\n", doc.config.spp, secs, rays);
    return 0;
}

// Per-iteration loss-curve CSV: iteration, total, then one column per term.
void write_loss_csv(const FitReport& report, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("io-error: cannot write " + path);
    out << "iteration,total";
    for (const auto& [name, trace] : report.term_traces)
        out << ',' << name;
    out << '\n';
    char buf[32];
    for (size_t i = 0; i < report.loss_trace.size(); ++i) {
        out << i;
        std::snprintf(buf, sizeof(buf), ",%.9g", report.loss_trace[i]);
        out << buf;
        for (const auto& [name, trace] : report.term_traces) {
            std::snprintf(buf, sizeof(buf), ",%.9g",
                          i < trace.size() ? trace[i] : 0.0);
            out << buf;
        }
        out << '\n';
    }
}

int cmd_fit(const std::string& target_path, const std::string& landmark_path,
            const std::string& basis_path, const std::string& config_path,
            const std::string& out_path, bool stage1_only, double focal,
            const CommonFlags& flags)
{
    const LandmarkSet landmarks = load_landmarks(landmark_path);
    const Image target = load_image(target_path);
    const MorphableBasis basis = load_basis(basis_path);

    FitConfig cfg;
    if (!config_path.empty())
        cfg = load_fit_config(config_path);
    flags.apply(cfg.render);
    cfg.render.width = target.width();
    cfg.render.height = target.height();

    CameraPose intrinsics;
    intrinsics.focal_length = focal;
    intrinsics.principal_point = Vec2(target.width() / 2.0, target.height() / 2.0);

    auto renderer = make_renderer(flags.backend_enum(), basis);
    const SceneParams init =
        init_scene(basis, target, landmarks, intrinsics, cfg.schedule);
    FitReport stage1 = fit_stage1(*renderer, basis, target, landmarks, init,
                                  cfg.render, cfg.weights, cfg.schedule);
    const RenderOutput base = renderer->render(stage1.params, cfg.render);
    save_pfm(base.color, stem_with(out_path, "_base.pfm"));

    FitReport final_report = stage1;
    if (!stage1_only && !stage1.aborted)
        final_report = fit_stage2(*renderer, basis, target, landmarks,
                                  stage1.params, cfg.render, cfg.weights,
                                  cfg.schedule);

    const RenderOutput last = renderer->render(final_report.params, cfg.render);
    save_pfm(last.color, stem_with(out_path, "_final.pfm"));
    Image residual(target.width(), target.height(), 3);
    for (int y = 0; y < target.height(); ++y)
        for (int x = 0; x < target.width(); ++x)
            for (int c = 0; c < 3; ++c)
                residual.at(x, y, c) =
                    std::abs(last.color.at(x, y, c) - target.at(x, y, std::min(c, target.channels() - 1)));
    save_pfm(residual, stem_with(out_path, "_residual.pfm"));

    SceneDocument doc;
    doc.basis_path = fs::absolute(basis_path).string();
    doc.params = final_report.params;
    doc.config = cfg.render;
    save_scene(doc, out_path);
    save_fit_report(final_report, stem_with(out_path, "_report.json"));
    write_loss_csv(final_report, stem_with(out_path, "_losses.csv"));

    if (final_report.aborted) {
        std::cerr << "fit-error: " << final_report.message << '\n';
        return 3;
    }
    std::printf("final_loss=%.9g wall=%.1fs\n",
                final_report.loss_trace.empty() ? 0.0 : final_report.loss_trace.back(),
                final_report.wall_seconds);
    return 0;
}

int cmd_relight(const std::string& scene_path, const std::string& light_path,
                const std::string& out_path, const CommonFlags& flags)
{
    SceneDocument doc = load_scene(scene_path);
    flags.apply(doc.config);
    const MorphableBasis basis =
        load_basis(resolve_scene_path(scene_path, doc.basis_path));

    const TriMesh mesh =
        synthesize_geometry(basis, doc.params.alpha, doc.params.delta);
    const UvRasterization raster = rasterize_uv(basis, basis.texture_resolution);
    const AlbedoTextures textures = apply_increments(
        synthesize_statistical_albedos(basis, doc.params.beta, raster),
        doc.params.delta_d, doc.params.delta_s);

    RenderOutput out;
    if (fs::path(light_path).extension() == ".pfm")
        out = relight(mesh, textures, doc.params.camera, doc.config,
                      EnvMap::from_image(load_pfm(light_path)));
    else
        out = relight(mesh, textures, doc.params.camera, doc.config,
                      load_sh_text(light_path));
    save_output_image(out.color, out_path);
    save_png(coverage_image(out), stem_with(out_path, "_coverage.png"));
    return 0;
}

int cmd_eval_geom(const std::string& recon_path, const std::string& gt_path,
                  const std::string& corr_path, const std::string& report_path,
                  const std::string& csv_path, bool no_scale)
{
    const TriMesh recon = load_obj(recon_path);
    const TriMesh gt = load_obj(gt_path);
    const CorrespondenceSet corr = load_correspondences(corr_path);
    const GeomErrorReport report = geometry_report(recon, gt, corr, !no_scale);
    save_geometry_report(report, report_path, csv_path);
    std::printf("Position error μ (cm): %.9g\n", report.position_mean);
    std::printf("Normal error μ (rad): %.9g\n", report.normal_mean);
    return 0;
}

int cmd_eval_image(const std::string& a_path, const std::string& b_path,
                   const std::string& mask_path, const std::string& report_path,
                   const std::string& colorspace, double peak)
{
    Image a = load_image(a_path);
    Image b = load_image(b_path);
    Image mask;
    if (!mask_path.empty())
        mask = load_png(mask_path, true);
    if (colorspace == "srgb") {
        for (size_t i = 0; i < a.size(); ++i)
            a.data()[i] = linear_to_srgb(a.data()[i]);
        for (size_t i = 0; i < b.size(); ++i)
            b.data()[i] = linear_to_srgb(b.data()[i]);
    }

    ImageMetricsReport report;
    LayerMetrics m;
    m.ssim = ssim(a, b, mask, peak);
    const PsnrResult p = psnr(a, b, mask, peak);
    m.psnr_db = p.db;
    m.psnr_infinite = p.infinite;
    report.layers["image"] = m;
    report.mask_description =
        mask_path.empty() ? "full frame" : "mask " + mask_path;
    if (!report_path.empty())
        save_image_report(report, report_path);
    if (p.infinite)
        std::printf("ssim=%.9g psnr_db=inf\n", m.ssim);
    else
        std::printf("ssim=%.9g psnr_db=%.9g\n", m.ssim, m.psnr_db);
    return 0;
}

int cmd_make_toy(const std::string& out_path, const std::string& scene_path,
                 uint64_t seed, int vertices, int ks, int ke, int kr, int texres)
{
    const MorphableBasis basis =
        generate_toy_basis(seed, vertices, ks, ke, kr, texres);
    save_basis(basis, out_path);
    if (!scene_path.empty()) {
        SceneDocument doc;
        doc.basis_path = fs::absolute(out_path).string();
        doc.params.alpha = VecX::Zero(basis.k_shape());
        doc.params.delta = VecX::Zero(basis.k_expr());
        doc.params.beta = VecX::Zero(basis.k_reflectance());
        doc.params.gamma = ShLight::dc(Vec3(2.0, 2.0, 2.0));
        doc.params.camera.translation = Vec3(0.0, 0.0, -60.0);
        doc.params.camera.focal_length = 512.0;
        doc.params.camera.principal_point = Vec2(128.0, 128.0);
        save_scene(doc, scene_path);
    }
    std::printf("vertices=%d triangles=%zu\n", basis.vertex_count(),
                basis.triangles.size());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"monocular face reconstruction toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    std::string scene_path, out_path;
    auto* render = app.add_subcommand("render", "render a scene document");
    render->add_option("scene", scene_path)->required();
    render->add_option("-o,--output", out_path)->required();
    flags.add(render);

    std::string target_path, landmark_path, basis_path, config_path;
    bool stage1_only = false;
    double focal = 512.0;
    auto* fit = app.add_subcommand("fit", "fit scene parameters to a photo");
    fit->add_option("target", target_path)->required();
    fit->add_option("--landmarks", landmark_path)->required();
    fit->add_option("--basis", basis_path)->required();
    fit->add_option("--config", config_path);
    fit->add_option("-o,--output", out_path)->required();
    fit->add_option("--focal", focal);
    fit->add_flag("--stage1-only", stage1_only);
    flags.add(fit);

    std::string light_path;
    auto* rel = app.add_subcommand("relight", "re-render under a new light");
    rel->add_option("scene", scene_path)->required();
    rel->add_option("--light", light_path, "SH text (.txt) or env map (.pfm)")->required();
    rel->add_option("-o,--output", out_path)->required();
    flags.add(rel);

    std::string gt_path, corr_path, report_path, csv_path;
    bool no_scale = false;
    auto* eg = app.add_subcommand("eval-geom", "mesh error report");
    eg->add_option("recon", scene_path)->required();
    eg->add_option("gt", gt_path)->required();
    eg->add_option("--corr", corr_path)->required();
    eg->add_option("--report", report_path)->required();
    eg->add_option("--csv", csv_path);
    eg->add_flag("--no-scale", no_scale);

    std::string b_path, mask_path, colorspace = "srgb";
    double peak = 1.0;
    auto* ei = app.add_subcommand("eval-image", "SSIM / PSNR report");
    ei->add_option("a", scene_path)->required();
    ei->add_option("b", b_path)->required();
    ei->add_option("--mask", mask_path);
    ei->add_option("--report", report_path);
    ei->add_option("--colorspace", colorspace)
        ->check(CLI::IsMember({"srgb", "linear"}));
    ei->add_option("--peak", peak);

    uint64_t toy_seed = 7;
    int vertices = 2500, ks = 8, ke = 4, kr = 6, texres = 128;
    auto* mk = app.add_subcommand("make-toy", "generate a synthetic basis");
    mk->add_option("-o,--output", out_path)->required();
    mk->add_option("--scene", scene_path, "also write a default scene here");
    mk->add_option("--seed", toy_seed);
    mk->add_option("--vertices", vertices);
    mk->add_option("--k-shape", ks);
    mk->add_option("--k-expr", ke);
    mk->add_option("--k-reflectance", kr);
    mk->add_option("--texture-resolution", texres);

    CLI11_PARSE(app, argc, argv);

    try {
        if (render->parsed())
            return cmd_render(scene_path, out_path, flags);
        if (fit->parsed())
            return cmd_fit(target_path, landmark_path, basis_path, config_path,
                           out_path, stage1_only, focal, flags);
        if (rel->parsed())
            return cmd_relight(scene_path, light_path, out_path, flags);
        if (eg->parsed())
            return cmd_eval_geom(scene_path, gt_path, corr_path, report_path,
                                 csv_path, no_scale);
        if (ei->parsed())
            return cmd_eval_image(scene_path, b_path, mask_path, report_path,
                                  colorspace, peak);
        if (mk->parsed())
            return cmd_make_toy(out_path, scene_path, toy_seed, vertices, ks,
                                ke, kr, texres);
    } catch (const std::exception& e) {
        std::string what = e.what();
        if (what.find(':') == std::string::npos)
            what = "error: " + what;
        std::cerr << what << '\n';
        return 2;
    }
    return 0;
}
