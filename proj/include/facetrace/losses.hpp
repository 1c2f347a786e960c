#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "facetrace/render.hpp"

namespace facetrace {

struct LossWeights {
    double alpha_1 = 1.0;       // landmark term
    double w_1 = 20.0;          // symmetry
    double w_2d = 0.5;          // diffuse chromaticity consistency (annealed)
    double w_2s = 0.01;         // specular chromaticity consistency
    double w_3 = 1e-4;          // smoothness
    double w_4 = 1.0;           // box on the incremented textures
    double w_shape_prior = 0.002;
    double w_albedo_prior = 0.01;

    void validate() const; // throws on negative weights
};

struct Landmark {
    Vec2 position = Vec2::Zero(); // pixels
    double confidence = 1.0;
};

struct LandmarkSet {
    std::array<Landmark, kNumLandmarks> points;
};

// Text format: 68 lines of "x y confidence".
LandmarkSet load_landmarks(const std::string& path);
void save_landmarks(const LandmarkSet& set, const std::string& path);

// Perspective projection of a world point: camera frame R^T (v - T), then
// focal * (x/z, y/z) + principal point. in_front gets z > 0.
Vec2 project_point(const CameraPose& camera, const Vec3& v, bool* in_front = nullptr);

// L1 photo term over covered pixels. The adjoint (dLoss/dRadiance,
// H*W*3) is resized and overwritten when non-null.
double photo_loss(const RenderOutput& render, const Image& target,
                  std::vector<double>* adjoint = nullptr);

struct LandmarkLossGrads {
    std::array<Vec3, kNumLandmarks> d_vertex{}; // zero for skipped points
    Vec3 d_rotation = Vec3::Zero();
    Vec3 d_translation = Vec3::Zero();
};

// Confidence-weighted squared reprojection error. Points behind the camera
// are skipped; their indices are reported through `skipped`.
double landmark_loss(const TriMesh& mesh, const std::vector<int>& landmark_ids,
                     const CameraPose& camera, const LandmarkSet& detected,
                     LandmarkLossGrads* grads = nullptr,
                     std::vector<int>* skipped = nullptr);

// Tikhonov prior on standardized coefficients.
double prior_loss(const VecX& alpha, const VecX& beta, double w_shape,
                  double w_albedo, VecX* grad_alpha = nullptr,
                  VecX* grad_beta = nullptr);

// Quadratic hinge keeping values in [lo, hi]; adjoint is accumulated.
double box_loss(const double* values, size_t count, double lo, double hi,
                double* adjoint = nullptr);
double box_loss(const Image& texture, double lo, double hi,
                std::vector<double>* adjoint = nullptr);

// L1 mismatch against the horizontal flip, over texels valid under both
// orientations. Adjoints are accumulated into M*M*3 buffers.
double symmetry_loss(const Image& texture, const std::vector<uint8_t>& valid,
                     std::vector<double>* adjoint = nullptr);

// L1 chromaticity difference with kappa(p) = p / (sum(p) + 1e-4).
double chromaticity_consistency_loss(const Image& new_tex, const Image& ref_tex,
                                     const std::vector<uint8_t>& valid,
                                     std::vector<double>* adj_new = nullptr,
                                     std::vector<double>* adj_ref = nullptr);

// Squared texel difference over ordered 4-neighborhood pairs, both valid.
double smoothness_loss(const Image& texture, const std::vector<uint8_t>& valid,
                       std::vector<double>* adjoint = nullptr);

struct ObjectiveResult {
    double total = 0.0;
    std::map<std::string, double> terms;
    ParamGradients grads;
    RenderOutput render;
};

// E_ph + alpha_1 E_land + priors + box(delta): the stage-I energy with
// gradients over {alpha, delta, camera, gamma, beta}. Renders internally
// (with capture) through the supplied backend.
ObjectiveResult stage1_objective(DiffRenderer& renderer, const MorphableBasis& basis,
                                 const SceneParams& params, const RenderConfig& cfg,
                                 const Image& target, const LandmarkSet& landmarks,
                                 const LossWeights& weights);

// The stage-II energy over the incremented textures; gradients cover
// (delta_d, delta_s) and, when joint is set, all stage-I groups as well.
ObjectiveResult stage2_objective(DiffRenderer& renderer, const MorphableBasis& basis,
                                 const SceneParams& params, const RenderConfig& cfg,
                                 const Image& target, const LandmarkSet& landmarks,
                                 const LossWeights& weights, bool joint = false);

} // namespace facetrace
