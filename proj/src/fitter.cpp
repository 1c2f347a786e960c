#include "facetrace/fitter.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace facetrace {

void FitSchedule::validate() const
{
    if (stage1_iters < 1 || joint_iters < 0 || camera_prefit_iters < 0)
        throw std::invalid_argument("FitSchedule: non-positive iteration count");
    for (int it : stage2_round_iters)
        if (it < 1)
            throw std::invalid_argument("FitSchedule: non-positive round length");
    if (!(w2d_decay > 0.0) || w2d_decay > 1.0)
        throw std::invalid_argument("FitSchedule: w2d_decay out of (0, 1]");
    for (double lr : {lr_alpha, lr_delta, lr_beta, lr_gamma, lr_rotation,
                      lr_translation, lr_increment, lr_prefit})
        if (!(lr > 0.0))
            throw std::invalid_argument("FitSchedule: step sizes must be > 0");
}

namespace {

// Flat-vector Adam with bias correction, one state per parameter group.
struct Adam {
    VecX m, v;
    int t = 0;

    void step(VecX& x, const VecX& g, double lr, const FitSchedule& s)
    {
        if (m.size() != x.size()) {
            m = VecX::Zero(x.size());
            v = VecX::Zero(x.size());
        }
        ++t;
        const double c1 = 1.0 - std::pow(s.adam_beta1, t);
        const double c2 = 1.0 - std::pow(s.adam_beta2, t);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            m(i) = s.adam_beta1 * m(i) + (1.0 - s.adam_beta1) * g(i);
            v(i) = s.adam_beta2 * v(i) + (1.0 - s.adam_beta2) * g(i) * g(i);
            x(i) -= lr * (m(i) / c1) / (std::sqrt(v(i) / c2) + s.adam_eps);
        }
    }
};

struct ImageAdam {
    std::vector<double> m, v;
    int t = 0;

    void step(Image& x, const std::vector<double>& g, double lr, const FitSchedule& s)
    {
        if (m.size() != g.size()) {
            m.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        ++t;
        const double c1 = 1.0 - std::pow(s.adam_beta1, t);
        const double c2 = 1.0 - std::pow(s.adam_beta2, t);
        for (size_t i = 0; i < g.size(); ++i) {
            m[i] = s.adam_beta1 * m[i] + (1.0 - s.adam_beta1) * g[i];
            v[i] = s.adam_beta2 * v[i] + (1.0 - s.adam_beta2) * g[i] * g[i];
            x.data()[i] -= static_cast<float>(lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.adam_eps));
        }
    }
};

void record(FitReport& report, const ObjectiveResult& obj)
{
    report.loss_trace.push_back(obj.total);
    for (const auto& [name, value] : obj.terms)
        report.term_traces[name].push_back(value);
}

bool abort_on_nan(FitReport& report, double total, const char* phase)
{
    if (std::isfinite(total)) return false;
    report.aborted = true;
    report.message = std::string("objective diverged (non-finite) during ") + phase;
    return true;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

CameraPose camera_prefit(const MorphableBasis& basis, const LandmarkSet& landmarks,
                         const CameraPose& intrinsics, const FitSchedule& schedule)
{
    schedule.validate();
    const TriMesh mesh = synthesize_geometry(basis, VecX::Zero(basis.k_shape()),
                                             VecX::Zero(basis.k_expr()));
    Vec3 c3 = Vec3::Zero();
    Vec2 c2 = Vec2::Zero();
    double conf_sum = 0.0;
    for (int l = 0; l < kNumLandmarks; ++l) {
        const double w = landmarks.points[l].confidence;
        c3 += w * mesh.positions[basis.landmark_vertex_ids[l]];
        c2 += w * landmarks.points[l].position;
        conf_sum += w;
    }
    if (conf_sum <= 0.0)
        throw std::invalid_argument("camera_prefit: all landmark confidences are zero");
    c3 /= conf_sum;
    c2 /= conf_sum;
    double s3 = 0.0, s2 = 0.0;
    for (int l = 0; l < kNumLandmarks; ++l) {
        const double w = landmarks.points[l].confidence;
        const Vec3& v = mesh.positions[basis.landmark_vertex_ids[l]];
        s3 += w * (v - c3).head<2>().squaredNorm();
        s2 += w * (landmarks.points[l].position - c2).squaredNorm();
    }
    s3 = std::sqrt(s3 / conf_sum);
    s2 = std::sqrt(s2 / conf_sum);
    if (s2 <= 0.0)
        throw std::invalid_argument("camera_prefit: degenerate landmark spread");

    CameraPose cam = intrinsics;
    cam.rotation = Vec3::Zero();
    const double depth = cam.focal_length * s3 / s2;
    cam.translation = c3 - Vec3((c2.x() - cam.principal_point.x()) * depth / cam.focal_length,
                                (c2.y() - cam.principal_point.y()) * depth / cam.focal_length,
                                depth);

    Adam rot_opt, trans_opt;
    for (int it = 0; it < schedule.camera_prefit_iters; ++it) {
        LandmarkLossGrads lg;
        landmark_loss(mesh, basis.landmark_vertex_ids, cam, landmarks, &lg);
        VecX r = cam.rotation, t = cam.translation;
        rot_opt.step(r, VecX(lg.d_rotation), schedule.lr_prefit, schedule);
        trans_opt.step(t, VecX(lg.d_translation), schedule.lr_prefit * 10.0, schedule);
        cam.rotation = r;
        cam.translation = t;
    }
    return cam;
}

SceneParams init_scene(const MorphableBasis& basis, const Image& target,
                       const LandmarkSet& landmarks, const CameraPose& intrinsics,
                       const FitSchedule& schedule)
{
    SceneParams p;
    p.alpha = VecX::Zero(basis.k_shape());
    p.delta = VecX::Zero(basis.k_expr());
    p.beta = VecX::Zero(basis.k_reflectance());
    double mean = 0.0;
    for (size_t i = 0; i < target.size(); ++i) mean += target.data()[i];
    mean /= std::max<size_t>(1, target.size());
    // DC radiance reproducing the target's mean under a mean-gray albedo.
    const double dc = std::max(0.1, mean) * 2.0 * std::sqrt(kPi);
    p.gamma = ShLight::dc(Vec3(dc, dc, dc));
    p.camera = camera_prefit(basis, landmarks, intrinsics, schedule);
    return p;
}

FitReport fit_stage1(DiffRenderer& renderer, const MorphableBasis& basis,
                     const Image& target, const LandmarkSet& landmarks,
                     const SceneParams& init, const RenderConfig& cfg,
                     const LossWeights& weights, const FitSchedule& schedule)
{
    schedule.validate();
    weights.validate();
    const auto t0 = Clock::now();
    FitReport report;
    report.params = init;
    report.params.delta_d = Image();
    report.params.delta_s = Image();

    Adam o_alpha, o_delta, o_beta, o_gamma, o_rot, o_trans;
    for (int it = 0; it < schedule.stage1_iters; ++it) {
        auto obj = stage1_objective(renderer, basis, report.params, cfg, target,
                                    landmarks, weights);
        record(report, obj);
        if (abort_on_nan(report, obj.total, "stage 1")) break;
        auto& p = report.params;
        o_alpha.step(p.alpha, obj.grads.alpha, schedule.lr_alpha, schedule);
        o_delta.step(p.delta, obj.grads.delta, schedule.lr_delta, schedule);
        o_beta.step(p.beta, obj.grads.beta, schedule.lr_beta, schedule);
        VecX g = VecX::Map(obj.grads.gamma.data(), obj.grads.gamma.size());
        VecX x = VecX::Map(p.gamma.coeffs.data(), p.gamma.coeffs.size());
        o_gamma.step(x, g, schedule.lr_gamma, schedule);
        Eigen::Map<Eigen::Matrix<double, kNumCoeffs, 3>>(p.gamma.coeffs.data()) =
            Eigen::Map<Eigen::Matrix<double, kNumCoeffs, 3>>(x.data());
        VecX r = p.camera.rotation, t = p.camera.translation;
        o_rot.step(r, VecX(obj.grads.rotation), schedule.lr_rotation, schedule);
        o_trans.step(t, VecX(obj.grads.translation), schedule.lr_translation, schedule);
        p.camera.rotation = r;
        p.camera.translation = t;
    }
    report.wall_seconds = seconds_since(t0);
    return report;
}

FitReport fit_stage2(DiffRenderer& renderer, const MorphableBasis& basis,
                     const Image& target, const LandmarkSet& landmarks,
                     const SceneParams& stage1_result, const RenderConfig& cfg,
                     const LossWeights& weights, const FitSchedule& schedule)
{
    schedule.validate();
    weights.validate();
    const auto t0 = Clock::now();
    const int m = basis.texture_resolution;
    FitReport report;
    report.params = stage1_result;
    if (report.params.delta_d.empty()) report.params.delta_d = Image(m, m, 3);
    if (report.params.delta_s.empty()) report.params.delta_s = Image(m, m, 3);

    LossWeights w = weights;
    ImageAdam o_dd, o_ds;
    bool done = false;
    for (size_t round = 0; round < schedule.stage2_round_iters.size() && !done; ++round) {
        w.w_2d = schedule.w2d_start * std::pow(schedule.w2d_decay, static_cast<double>(round));
        report.w2d_trace.push_back(w.w_2d);
        for (int it = 0; it < schedule.stage2_round_iters[round]; ++it) {
            auto obj = stage2_objective(renderer, basis, report.params, cfg, target,
                                        landmarks, w, false);
            record(report, obj);
            if (abort_on_nan(report, obj.total, "stage 2 rounds")) {
                done = true;
                break;
            }
            o_dd.step(report.params.delta_d, obj.grads.delta_d, schedule.lr_increment, schedule);
            o_ds.step(report.params.delta_s, obj.grads.delta_s, schedule.lr_increment, schedule);
        }
    }

    Adam o_alpha, o_delta, o_beta, o_gamma, o_rot, o_trans;
    for (int it = 0; it < schedule.joint_iters && !report.aborted; ++it) {
        auto obj = stage2_objective(renderer, basis, report.params, cfg, target,
                                    landmarks, w, true);
        record(report, obj);
        if (abort_on_nan(report, obj.total, "stage 2 joint")) break;
        auto& p = report.params;
        o_dd.step(p.delta_d, obj.grads.delta_d, schedule.lr_increment, schedule);
        o_ds.step(p.delta_s, obj.grads.delta_s, schedule.lr_increment, schedule);
        o_alpha.step(p.alpha, obj.grads.alpha, schedule.lr_alpha, schedule);
        o_delta.step(p.delta, obj.grads.delta, schedule.lr_delta, schedule);
        o_beta.step(p.beta, obj.grads.beta, schedule.lr_beta, schedule);
        VecX g = VecX::Map(obj.grads.gamma.data(), obj.grads.gamma.size());
        VecX x = VecX::Map(p.gamma.coeffs.data(), p.gamma.coeffs.size());
        o_gamma.step(x, g, schedule.lr_gamma, schedule);
        Eigen::Map<Eigen::Matrix<double, kNumCoeffs, 3>>(p.gamma.coeffs.data()) =
            Eigen::Map<Eigen::Matrix<double, kNumCoeffs, 3>>(x.data());
        VecX r = p.camera.rotation, t = p.camera.translation;
        o_rot.step(r, VecX(obj.grads.rotation), schedule.lr_rotation, schedule);
        o_trans.step(t, VecX(obj.grads.translation), schedule.lr_translation, schedule);
        p.camera.rotation = r;
        p.camera.translation = t;
    }
    report.wall_seconds = seconds_since(t0);
    return report;
}

} // namespace facetrace
