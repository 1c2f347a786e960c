#include "facetrace/scene_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace facetrace {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_to_json(const VecX& v)
{
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i)
        arr.push_back(v(i));
    return arr;
}

VecX json_to_vec(const json& arr)
{
    VecX v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i)
        v(static_cast<int>(i)) = arr[i].get<double>();
    return v;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_to_vec3(const json& a)
{
    return Vec3(a.at(0).get<double>(), a.at(1).get<double>(),
                a.at(2).get<double>());
}

std::string sidecar_name(const std::string& scene_path, const char* suffix)
{
    return fs::path(scene_path).stem().string() + suffix;
}

void require_exists(const std::string& path)
{
    if (!fs::exists(path))
        throw std::runtime_error("io-error: missing file " + path);
}

template <typename T>
void maybe(const json& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

} // namespace

std::string resolve_scene_path(const std::string& scene_path,
                               const std::string& ref)
{
    fs::path p(ref);
    if (p.is_absolute())
        return ref;
    return (fs::path(scene_path).parent_path() / p).string();
}

void save_scene(const SceneDocument& doc, const std::string& path)
{
    json j;
    j["version"] = doc.version;
    j["basis"] = doc.basis_path;

    json p;
    p["alpha"] = vec_to_json(doc.params.alpha);
    p["delta"] = vec_to_json(doc.params.delta);
    p["beta"] = vec_to_json(doc.params.beta);
    json gamma = json::array();
    for (int i = 0; i < kNumCoeffs; ++i)
        gamma.push_back(json::array({doc.params.gamma.coeffs(i, 0),
                                     doc.params.gamma.coeffs(i, 1),
                                     doc.params.gamma.coeffs(i, 2)}));
    p["gamma"] = gamma;
    p["rotation"] = vec3_to_json(doc.params.camera.rotation);
    p["translation"] = vec3_to_json(doc.params.camera.translation);
    p["focal_length"] = doc.params.camera.focal_length;
    p["principal_point"] = json::array({doc.params.camera.principal_point.x(),
                                        doc.params.camera.principal_point.y()});
    if (!doc.params.delta_d.empty()) {
        const std::string name = sidecar_name(path, "_delta_d.pfm");
        save_pfm(doc.params.delta_d, resolve_scene_path(path, name));
        p["delta_d"] = name;
    }
    if (!doc.params.delta_s.empty()) {
        const std::string name = sidecar_name(path, "_delta_s.pfm");
        save_pfm(doc.params.delta_s, resolve_scene_path(path, name));
        p["delta_s"] = name;
    }
    j["params"] = p;

    json c;
    c["width"] = doc.config.width;
    c["height"] = doc.config.height;
    c["spp"] = doc.config.spp;
    c["rng_seed"] = doc.config.rng_seed;
    c["sh_bands"] = doc.config.sh_bands;
    c["background"] = vec3_to_json(doc.config.background);
    c["roughness"] = doc.config.roughness;
    c["workers"] = doc.config.workers;
    c["light_sampling"] =
        doc.config.light_sampling == LightSampling::stratified ? "stratified"
                                                               : "independent";
    j["render"] = c;

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("io-error: cannot open " + path);
    out << j.dump(2) << '\n';
}

SceneDocument load_scene(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("io-error: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("parse-error: " + path + ": " + e.what());
    }
    if (!j.contains("version"))
        throw std::runtime_error("parse-error: " + path + ": missing version");

    SceneDocument doc;
    doc.version = j.at("version").get<int>();
    if (doc.version != 1)
        throw std::runtime_error("parse-error: unsupported scene version");
    doc.basis_path = j.at("basis").get<std::string>();
    require_exists(resolve_scene_path(path, doc.basis_path));

    const json& p = j.at("params");
    doc.params.alpha = json_to_vec(p.at("alpha"));
    doc.params.delta = json_to_vec(p.at("delta"));
    doc.params.beta = json_to_vec(p.at("beta"));
    const json& gamma = p.at("gamma");
    if (gamma.size() != kNumCoeffs)
        throw std::runtime_error("parse-error: gamma must have 81 rows");
    for (int i = 0; i < kNumCoeffs; ++i)
        for (int c = 0; c < 3; ++c)
            doc.params.gamma.coeffs(i, c) = gamma[i].at(c).get<double>();
    doc.params.camera.rotation = json_to_vec3(p.at("rotation"));
    doc.params.camera.translation = json_to_vec3(p.at("translation"));
    doc.params.camera.focal_length = p.at("focal_length").get<double>();
    doc.params.camera.principal_point =
        Vec2(p.at("principal_point").at(0).get<double>(),
             p.at("principal_point").at(1).get<double>());
    if (p.contains("delta_d")) {
        const std::string f = resolve_scene_path(path, p.at("delta_d").get<std::string>());
        require_exists(f);
        doc.params.delta_d = load_pfm(f);
    }
    if (p.contains("delta_s")) {
        const std::string f = resolve_scene_path(path, p.at("delta_s").get<std::string>());
        require_exists(f);
        doc.params.delta_s = load_pfm(f);
    }

    const json& c = j.at("render");
    doc.config.width = c.at("width").get<int>();
    doc.config.height = c.at("height").get<int>();
    doc.config.spp = c.at("spp").get<int>();
    doc.config.rng_seed = c.at("rng_seed").get<uint64_t>();
    doc.config.sh_bands = c.at("sh_bands").get<int>();
    doc.config.background = json_to_vec3(c.at("background"));
    doc.config.roughness = c.at("roughness").get<double>();
    doc.config.workers = c.at("workers").get<int>();
    const std::string ls = c.at("light_sampling").get<std::string>();
    if (ls == "stratified")
        doc.config.light_sampling = LightSampling::stratified;
    else if (ls == "independent")
        doc.config.light_sampling = LightSampling::independent;
    else
        throw std::runtime_error("parse-error: bad light_sampling " + ls);
    doc.config.validate();
    return doc;
}

ShLight load_sh_text(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("io-error: cannot open " + path);
    ShLight light;
    std::vector<bool> seen(kNumCoeffs, false);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        std::istringstream ss(line);
        int l, m;
        double r, g, b;
        if (!(ss >> l))
            continue;
        if (!(ss >> m >> r >> g >> b))
            throw std::runtime_error("parse-error: " + path + ": bad SH line");
        if (l < 0 || l >= (kMaxBand + 1) || m < -l || m > l)
            throw std::runtime_error("parse-error: " + path + ": bad l/m");
        const int idx = l * l + l + m;
        light.coeffs(idx, 0) = r;
        light.coeffs(idx, 1) = g;
        light.coeffs(idx, 2) = b;
        seen[idx] = true;
        ++rows;
    }
    if (rows != kNumCoeffs)
        throw std::runtime_error("parse-error: " + path + ": expected 81 SH lines");
    for (bool s : seen)
        if (!s)
            throw std::runtime_error("parse-error: " + path + ": missing or duplicate SH line");
    return light;
}

void save_sh_text(const ShLight& light, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("io-error: cannot open " + path);
    char buf[160];
    for (int l = 0; l < (kMaxBand + 1); ++l)
        for (int m = -l; m <= l; ++m) {
            const int idx = l * l + l + m;
            std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g %.17g\n", l, m,
                          light.coeffs(idx, 0), light.coeffs(idx, 1),
                          light.coeffs(idx, 2));
            out << buf;
        }
}

FitConfig load_fit_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("io-error: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("parse-error: " + path + ": " + e.what());
    }

    FitConfig cfg;
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        maybe(s, "stage1_iters", cfg.schedule.stage1_iters);
        maybe(s, "stage2_round_iters", cfg.schedule.stage2_round_iters);
        maybe(s, "joint_iters", cfg.schedule.joint_iters);
        maybe(s, "w2d_start", cfg.schedule.w2d_start);
        maybe(s, "w2d_decay", cfg.schedule.w2d_decay);
        maybe(s, "lr_alpha", cfg.schedule.lr_alpha);
        maybe(s, "lr_delta", cfg.schedule.lr_delta);
        maybe(s, "lr_beta", cfg.schedule.lr_beta);
        maybe(s, "lr_gamma", cfg.schedule.lr_gamma);
        maybe(s, "lr_rotation", cfg.schedule.lr_rotation);
        maybe(s, "lr_translation", cfg.schedule.lr_translation);
        maybe(s, "lr_increment", cfg.schedule.lr_increment);
        maybe(s, "camera_prefit_iters", cfg.schedule.camera_prefit_iters);
        maybe(s, "lr_prefit", cfg.schedule.lr_prefit);
    }
    if (j.contains("weights")) {
        const json& w = j["weights"];
        maybe(w, "alpha_1", cfg.weights.alpha_1);
        maybe(w, "w_1", cfg.weights.w_1);
        maybe(w, "w_2d", cfg.weights.w_2d);
        maybe(w, "w_2s", cfg.weights.w_2s);
        maybe(w, "w_3", cfg.weights.w_3);
        maybe(w, "w_4", cfg.weights.w_4);
        maybe(w, "w_shape_prior", cfg.weights.w_shape_prior);
        maybe(w, "w_albedo_prior", cfg.weights.w_albedo_prior);
    }
    if (j.contains("render")) {
        const json& r = j["render"];
        maybe(r, "width", cfg.render.width);
        maybe(r, "height", cfg.render.height);
        maybe(r, "spp", cfg.render.spp);
        maybe(r, "rng_seed", cfg.render.rng_seed);
        maybe(r, "sh_bands", cfg.render.sh_bands);
        maybe(r, "roughness", cfg.render.roughness);
        maybe(r, "workers", cfg.render.workers);
    }
    cfg.schedule.validate();
    cfg.weights.validate();
    cfg.render.validate();
    return cfg;
}

void save_fit_report(const FitReport& report, const std::string& path)
{
    json j;
    j["loss_trace"] = report.loss_trace;
    json terms;
    for (const auto& [name, trace] : report.term_traces)
        terms[name] = trace;
    j["term_traces"] = terms;
    j["w2d_trace"] = report.w2d_trace;
    j["wall_seconds"] = report.wall_seconds;
    j["aborted"] = report.aborted;
    j["message"] = report.message;

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("io-error: cannot open " + path);
    out << j.dump(2) << '\n';
}

} // namespace facetrace
