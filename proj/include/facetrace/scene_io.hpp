#pragma once

#include <string>

#include "facetrace/fitter.hpp"
#include "facetrace/render.hpp"

namespace facetrace {

// Versioned on-disk scene: coefficients inline (exact decimal), texture
// increments as PFM sidecars next to the document, basis by relative path.
struct SceneDocument {
    int version = 1;
    std::string basis_path; // relative to the document's directory
    SceneParams params;
    RenderConfig config;
};

SceneDocument load_scene(const std::string& path);
void save_scene(const SceneDocument& doc, const std::string& path);

// Resolves a path stored inside a scene document against the document's
// directory. Absolute refs pass through.
std::string resolve_scene_path(const std::string& scene_path,
                               const std::string& ref);

// 81 lines of "l m r g b".
ShLight load_sh_text(const std::string& path);
void save_sh_text(const ShLight& light, const std::string& path);

// JSON with optional "schedule", "weights" and "render" objects whose keys
// override the defaults.
struct FitConfig {
    FitSchedule schedule;
    LossWeights weights;
    RenderConfig render;
};
FitConfig load_fit_config(const std::string& path);

void save_fit_report(const FitReport& report, const std::string& path);

} // namespace facetrace
