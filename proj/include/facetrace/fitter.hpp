#pragma once

#include <map>
#include <string>
#include <vector>

#include "facetrace/losses.hpp"

namespace facetrace {

struct FitSchedule {
    int stage1_iters = 200;
    std::vector<int> stage2_round_iters = {40, 40, 40};
    int joint_iters = 40;
    double w2d_start = 0.5;
    double w2d_decay = 0.5;

    double lr_alpha = 0.05;
    double lr_delta = 0.05;
    double lr_beta = 0.05;
    double lr_gamma = 0.02;
    double lr_rotation = 0.01;
    double lr_translation = 0.05;
    double lr_increment = 0.002;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    int camera_prefit_iters = 200;
    double lr_prefit = 0.02;

    void validate() const; // throws std::invalid_argument
};

struct FitReport {
    std::vector<double> loss_trace; // total objective per iteration
    std::map<std::string, std::vector<double>> term_traces;
    std::vector<double> w2d_trace;  // per stage-II round
    SceneParams params;
    double wall_seconds = 0.0;
    bool aborted = false;    // NaN/Inf objective
    std::string message;
};

// Closed-form similarity guess from the mean head's landmarks (depth from
// the spread ratio, translation from the centroid ray) refined by a few
// landmark-only Adam iterations over rotation and translation.
CameraPose camera_prefit(const MorphableBasis& basis, const LandmarkSet& landmarks,
                         const CameraPose& intrinsics, const FitSchedule& schedule);

// Default bootstrap: zero coefficients, DC light matched to the target's
// mean luminance, camera from camera_prefit.
SceneParams init_scene(const MorphableBasis& basis, const Image& target,
                       const LandmarkSet& landmarks, const CameraPose& intrinsics,
                       const FitSchedule& schedule);

// Stage I: Adam over {alpha, delta, camera, gamma, beta} against the
// stage-I energy. Increments in `init` are held at zero.
FitReport fit_stage1(DiffRenderer& renderer, const MorphableBasis& basis,
                     const Image& target, const LandmarkSet& landmarks,
                     const SceneParams& init, const RenderConfig& cfg,
                     const LossWeights& weights, const FitSchedule& schedule);

// Stage II: per-round optimization of (delta_d, delta_s) with the diffuse
// consistency weight annealed as w2d_start * w2d_decay^round, then a joint
// phase updating every group.
FitReport fit_stage2(DiffRenderer& renderer, const MorphableBasis& basis,
                     const Image& target, const LandmarkSet& landmarks,
                     const SceneParams& stage1_result, const RenderConfig& cfg,
                     const LossWeights& weights, const FitSchedule& schedule);

} // namespace facetrace
