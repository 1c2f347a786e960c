#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "facetrace/scene_io.hpp"
#include "fixtures.hpp"

using namespace facetrace;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name)
{
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("scene document round-trips exactly, sidecars included")
{
    const fs::path dir = fresh_dir("ft_scene_rt");
    const testfix::ToyScene toy = testfix::make_toy_scene(5);
    save_basis(toy.basis, (dir / "basis.fmb").string());

    SceneDocument doc;
    doc.basis_path = "basis.fmb";
    doc.params = toy.params;
    doc.config = toy.cfg;
    const int m = toy.basis.texture_resolution;
    doc.params.delta_d = Image(m, m, 3);
    doc.params.delta_s = Image(m, m, 3);
    Pcg32 rng(17, 0);
    for (size_t i = 0; i < doc.params.delta_d.size(); ++i) {
        doc.params.delta_d.data()[i] = float(rng.uniform() - 0.5);
        doc.params.delta_s.data()[i] = float(rng.uniform() - 0.5);
    }

    const std::string path = (dir / "scene.json").string();
    save_scene(doc, path);
    CHECK(fs::exists(dir / "scene_delta_d.pfm"));
    CHECK(fs::exists(dir / "scene_delta_s.pfm"));

    const SceneDocument back = load_scene(path);
    CHECK(back.version == 1);
    CHECK((back.params.alpha - doc.params.alpha).norm() == 0.0);
    CHECK((back.params.delta - doc.params.delta).norm() == 0.0);
    CHECK((back.params.beta - doc.params.beta).norm() == 0.0);
    CHECK((back.params.gamma.coeffs - doc.params.gamma.coeffs).norm() == 0.0);
    CHECK((back.params.camera.rotation - doc.params.camera.rotation).norm() == 0.0);
    CHECK((back.params.camera.translation - doc.params.camera.translation).norm() == 0.0);
    CHECK(back.params.camera.focal_length == doc.params.camera.focal_length);
    CHECK((back.params.camera.principal_point - doc.params.camera.principal_point).norm() == 0.0);
    CHECK(back.config.width == doc.config.width);
    CHECK(back.config.spp == doc.config.spp);
    CHECK(back.config.sh_bands == doc.config.sh_bands);
    REQUIRE(back.params.delta_d.size() == doc.params.delta_d.size());
    for (size_t i = 0; i < doc.params.delta_d.size(); ++i) {
        CHECK(back.params.delta_d.data()[i] == doc.params.delta_d.data()[i]);
        CHECK(back.params.delta_s.data()[i] == doc.params.delta_s.data()[i]);
    }
    // basis path resolves relative to the document
    const MorphableBasis basis =
        load_basis(resolve_scene_path(path, back.basis_path));
    CHECK(basis.vertex_count() == toy.basis.vertex_count());
    fs::remove_all(dir);
}

TEST_CASE("scene loading reports missing or malformed inputs")
{
    const fs::path dir = fresh_dir("ft_scene_err");
    const testfix::ToyScene toy = testfix::make_toy_scene(6);

    SceneDocument doc;
    doc.basis_path = "nowhere.fmb";
    doc.params = toy.params;
    doc.config = toy.cfg;
    const std::string path = (dir / "scene.json").string();
    save_scene(doc, path);
    CHECK_THROWS_WITH_AS(load_scene(path),
                         doctest::Contains("nowhere.fmb"), std::runtime_error);

    std::ofstream(dir / "garbage.json") << "{ not json";
    CHECK_THROWS(load_scene((dir / "garbage.json").string()));

    save_basis(toy.basis, (dir / "basis.fmb").string());
    doc.basis_path = "basis.fmb";
    save_scene(doc, path);
    CHECK_NOTHROW(load_scene(path));

    // unknown version is rejected
    {
        std::ifstream in(path);
        nlohmann::json j = nlohmann::json::parse(in);
        j["version"] = 9;
        std::ofstream(path) << j.dump(2);
    }
    CHECK_THROWS(load_scene(path));
    fs::remove_all(dir);
}

TEST_CASE("spherical-harmonic light text round-trips exactly")
{
    const fs::path dir = fresh_dir("ft_sh_text");
    const ShLight light = testfix::random_sky(33);
    const std::string path = (dir / "light.txt").string();
    save_sh_text(light, path);
    const ShLight back = load_sh_text(path);
    CHECK((back.coeffs - light.coeffs).norm() == 0.0);

    // truncated file rejected
    std::ifstream in(path);
    std::string line;
    std::ofstream out((dir / "short.txt").string());
    for (int i = 0; i < 40 && std::getline(in, line); ++i)
        out << line << "\n";
    out.close();
    CHECK_THROWS(load_sh_text((dir / "short.txt").string()));
    fs::remove_all(dir);
}

TEST_CASE("fit config: defaults, overrides, validation")
{
    const fs::path dir = fresh_dir("ft_fitcfg");
    const std::string path = (dir / "cfg.json").string();

    std::ofstream(path) << "{}\n";
    const FitConfig defaults = load_fit_config(path);
    CHECK(defaults.schedule.stage1_iters == FitSchedule{}.stage1_iters);
    CHECK(defaults.weights.w_1 == LossWeights{}.w_1);

    std::ofstream(path) << R"({
        "schedule": {"stage1_iters": 17, "w2d_decay": 0.25,
                     "stage2_round_iters": [5, 6]},
        "weights": {"w_3": 0.5},
        "render": {"spp": 2, "width": 32, "height": 32}
    })";
    const FitConfig cfg = load_fit_config(path);
    CHECK(cfg.schedule.stage1_iters == 17);
    CHECK(cfg.schedule.w2d_decay == 0.25);
    CHECK(cfg.schedule.stage2_round_iters == std::vector<int>{5, 6});
    CHECK(cfg.weights.w_3 == 0.5);
    CHECK(cfg.weights.w_1 == LossWeights{}.w_1); // untouched default
    CHECK(cfg.render.spp == 2);

    std::ofstream(path) << R"({"weights": {"w_3": -1.0}})";
    CHECK_THROWS(load_fit_config(path));
    std::ofstream(path) << R"({"schedule": {"stage1_iters": -4}})";
    CHECK_THROWS(load_fit_config(path));
    fs::remove_all(dir);
}

TEST_CASE("fit report serialization carries traces")
{
    const fs::path dir = fresh_dir("ft_report");
    FitReport rep;
    rep.loss_trace = {3.0, 2.0, 1.5};
    rep.term_traces["photo"] = {2.5, 1.8, 1.4};
    rep.w2d_trace = {0.5, 0.25};
    rep.wall_seconds = 1.25;
    rep.message = "converged";
    const std::string path = (dir / "report.json").string();
    save_fit_report(rep, path);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("loss_trace") != std::string::npos);
    CHECK(text.find("photo") != std::string::npos);
    CHECK(text.find("converged") != std::string::npos);
    fs::remove_all(dir);
}
