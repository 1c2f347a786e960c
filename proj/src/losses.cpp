#include "facetrace/losses.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace facetrace {

void LossWeights::validate() const
{
    for (double w : {alpha_1, w_1, w_2d, w_2s, w_3, w_4, w_shape_prior, w_albedo_prior})
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
}

LandmarkSet load_landmarks(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open landmark file: " + path);
    LandmarkSet set;
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double x, y, conf;
        if (!(ss >> x >> y >> conf))
            throw std::runtime_error("malformed landmark line in " + path + ": " + line);
        if (count >= kNumLandmarks)
            throw std::runtime_error("landmark file has more than 68 points: " + path);
        set.points[count].position = Vec2(x, y);
        set.points[count].confidence = conf;
        ++count;
    }
    if (count != kNumLandmarks)
        throw std::runtime_error("landmark file must have exactly 68 points: " + path);
    return set;
}

void save_landmarks(const LandmarkSet& set, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write landmark file: " + path);
    char buf[96];
    for (const auto& p : set.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.position.x(),
                      p.position.y(), p.confidence);
        out << buf;
    }
}

Vec2 project_point(const CameraPose& camera, const Vec3& v, bool* in_front)
{
    const Vec3 pc = camera.rotation_matrix().transpose() * (v - camera.translation);
    if (in_front) *in_front = pc.z() > 1e-9;
    const double z = pc.z() > 1e-9 ? pc.z() : 1e-9;
    return Vec2(camera.focal_length * pc.x() / z + camera.principal_point.x(),
                camera.focal_length * pc.y() / z + camera.principal_point.y());
}

double photo_loss(const RenderOutput& render, const Image& target,
                  std::vector<double>* adjoint)
{
    const int w = render.color.width(), h = render.color.height();
    if (target.width() != w || target.height() != h || target.channels() != 3)
        throw std::invalid_argument("photo_loss: resolution mismatch");
    if (adjoint) adjoint->assign(static_cast<size_t>(w) * h * 3, 0.0);
    double loss = 0.0;
    for (int pix = 0; pix < w * h; ++pix) {
        if (!render.coverage[pix]) continue;
        for (int c = 0; c < 3; ++c) {
            const size_t i = static_cast<size_t>(pix) * 3 + c;
            const double d = render.radiance[i] - target.data()[i];
            loss += std::abs(d);
            if (adjoint && d != 0.0) (*adjoint)[i] = d > 0.0 ? 1.0 : -1.0;
        }
    }
    return loss;
}

double landmark_loss(const TriMesh& mesh, const std::vector<int>& landmark_ids,
                     const CameraPose& camera, const LandmarkSet& detected,
                     LandmarkLossGrads* grads, std::vector<int>* skipped)
{
    if (landmark_ids.size() != kNumLandmarks)
        throw std::invalid_argument("landmark_loss: need exactly 68 vertex ids");
    const Mat3 rot = camera.rotation_matrix();
    std::array<Mat3, 3> drot;
    axis_angle_jacobian(camera.rotation, drot.data());
    if (grads) *grads = LandmarkLossGrads{};
    if (skipped) skipped->clear();

    double loss = 0.0;
    for (int l = 0; l < kNumLandmarks; ++l) {
        const int vid = landmark_ids[l];
        if (vid < 0 || vid >= mesh.vertex_count())
            throw std::invalid_argument("landmark_loss: vertex id out of range");
        const Vec3& v = mesh.positions[vid];
        const Vec3 pc = rot.transpose() * (v - camera.translation);
        if (pc.z() <= 1e-9) {
            if (skipped) skipped->push_back(l);
            continue;
        }
        const double conf = detected.points[l].confidence;
        const double inv_z = 1.0 / pc.z();
        const Vec2 proj(camera.focal_length * pc.x() * inv_z + camera.principal_point.x(),
                        camera.focal_length * pc.y() * inv_z + camera.principal_point.y());
        const Vec2 r = proj - detected.points[l].position;
        loss += conf * r.squaredNorm();
        if (!grads) continue;

        const Vec2 adj_proj = 2.0 * conf * r;
        const Vec3 adj_pc(camera.focal_length * inv_z * adj_proj.x(),
                          camera.focal_length * inv_z * adj_proj.y(),
                          -camera.focal_length * inv_z * inv_z *
                              (pc.x() * adj_proj.x() + pc.y() * adj_proj.y()));
        const Vec3 adj_world = rot * adj_pc;
        grads->d_vertex[l] = adj_world;
        grads->d_translation -= adj_world;
        for (int k = 0; k < 3; ++k)
            grads->d_rotation(k) += adj_pc.dot(drot[k].transpose() * (v - camera.translation));
    }
    return loss;
}

double prior_loss(const VecX& alpha, const VecX& beta, double w_shape,
                  double w_albedo, VecX* grad_alpha, VecX* grad_beta)
{
    const double loss = w_shape * alpha.squaredNorm() + w_albedo * beta.squaredNorm();
    if (grad_alpha) *grad_alpha = 2.0 * w_shape * alpha;
    if (grad_beta) *grad_beta = 2.0 * w_albedo * beta;
    return loss;
}

double box_loss(const double* values, size_t count, double lo, double hi,
                double* adjoint)
{
    double loss = 0.0;
    for (size_t i = 0; i < count; ++i) {
        const double below = lo - values[i];
        const double above = values[i] - hi;
        if (below > 0.0) {
            loss += below * below;
            if (adjoint) adjoint[i] -= 2.0 * below;
        } else if (above > 0.0) {
            loss += above * above;
            if (adjoint) adjoint[i] += 2.0 * above;
        }
    }
    return loss;
}

double box_loss(const Image& texture, double lo, double hi,
                std::vector<double>* adjoint)
{
    if (adjoint && adjoint->size() != texture.size())
        adjoint->assign(texture.size(), 0.0);
    double loss = 0.0;
    for (size_t i = 0; i < texture.size(); ++i) {
        const double x = texture.data()[i];
        const double below = lo - x;
        const double above = x - hi;
        if (below > 0.0) {
            loss += below * below;
            if (adjoint) (*adjoint)[i] -= 2.0 * below;
        } else if (above > 0.0) {
            loss += above * above;
            if (adjoint) (*adjoint)[i] += 2.0 * above;
        }
    }
    return loss;
}

double symmetry_loss(const Image& texture, const std::vector<uint8_t>& valid,
                     std::vector<double>* adjoint)
{
    const int m = texture.width();
    if (texture.height() != m)
        throw std::invalid_argument("symmetry_loss: texture must be square");
    if (valid.size() != static_cast<size_t>(m) * m)
        throw std::invalid_argument("symmetry_loss: mask size mismatch");
    if (adjoint && adjoint->size() != texture.size())
        adjoint->assign(texture.size(), 0.0);
    double loss = 0.0;
    for (int y = 0; y < m; ++y)
        for (int x = 0; x < m; ++x) {
            const int xf = m - 1 - x;
            if (!valid[static_cast<size_t>(y) * m + x] ||
                !valid[static_cast<size_t>(y) * m + xf])
                continue;
            for (int c = 0; c < 3; ++c) {
                const double d = texture.at(x, y, c) - texture.at(xf, y, c);
                loss += std::abs(d);
                if (adjoint && d != 0.0) {
                    const double s = d > 0.0 ? 1.0 : -1.0;
                    (*adjoint)[(static_cast<size_t>(y) * m + x) * 3 + c] += s;
                    (*adjoint)[(static_cast<size_t>(y) * m + xf) * 3 + c] -= s;
                }
            }
        }
    return loss;
}

namespace {

constexpr double kChromaEps = 1e-4;

} // namespace

double chromaticity_consistency_loss(const Image& new_tex, const Image& ref_tex,
                                     const std::vector<uint8_t>& valid,
                                     std::vector<double>* adj_new,
                                     std::vector<double>* adj_ref)
{
    if (!new_tex.same_shape(ref_tex))
        throw std::invalid_argument("chromaticity_consistency_loss: resolution mismatch");
    const int m = new_tex.width();
    if (valid.size() != static_cast<size_t>(m) * new_tex.height())
        throw std::invalid_argument("chromaticity_consistency_loss: mask size mismatch");
    if (adj_new && adj_new->size() != new_tex.size())
        adj_new->assign(new_tex.size(), 0.0);
    if (adj_ref && adj_ref->size() != new_tex.size())
        adj_ref->assign(new_tex.size(), 0.0);

    double loss = 0.0;
    const int count = m * new_tex.height();
    for (int t = 0; t < count; ++t) {
        if (!valid[t]) continue;
        Vec3 pn, pr;
        for (int c = 0; c < 3; ++c) {
            pn(c) = new_tex.data()[static_cast<size_t>(t) * 3 + c];
            pr(c) = ref_tex.data()[static_cast<size_t>(t) * 3 + c];
        }
        const double sn = pn.sum() + kChromaEps;
        const double sr = pr.sum() + kChromaEps;
        const Vec3 kn = pn / sn, kr = pr / sr;
        Vec3 sign = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            const double d = kn(c) - kr(c);
            loss += std::abs(d);
            if (d != 0.0) sign(c) = d > 0.0 ? 1.0 : -1.0;
        }
        // d(kappa_c)/d(p_d) = (delta_cd - kappa_c) / sum
        if (adj_new) {
            const double dot = sign.dot(kn);
            for (int d = 0; d < 3; ++d)
                (*adj_new)[static_cast<size_t>(t) * 3 + d] += (sign(d) - dot) / sn;
        }
        if (adj_ref) {
            const double dot = sign.dot(kr);
            for (int d = 0; d < 3; ++d)
                (*adj_ref)[static_cast<size_t>(t) * 3 + d] -= (sign(d) - dot) / sr;
        }
    }
    return loss;
}

double smoothness_loss(const Image& texture, const std::vector<uint8_t>& valid,
                       std::vector<double>* adjoint)
{
    const int m = texture.width(), h = texture.height();
    if (valid.size() != static_cast<size_t>(m) * h)
        throw std::invalid_argument("smoothness_loss: mask size mismatch");
    if (adjoint && adjoint->size() != texture.size())
        adjoint->assign(texture.size(), 0.0);
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    double loss = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < m; ++x) {
            if (!valid[static_cast<size_t>(y) * m + x]) continue;
            for (int k = 0; k < 4; ++k) {
                const int xn = x + dx[k], yn = y + dy[k];
                if (xn < 0 || xn >= m || yn < 0 || yn >= h) continue;
                if (!valid[static_cast<size_t>(yn) * m + xn]) continue;
                for (int c = 0; c < 3; ++c) {
                    const double d = texture.at(xn, yn, c) - texture.at(x, y, c);
                    loss += d * d;
                    if (adjoint) {
                        (*adjoint)[(static_cast<size_t>(yn) * m + xn) * 3 + c] += 2.0 * d;
                        (*adjoint)[(static_cast<size_t>(y) * m + x) * 3 + c] -= 2.0 * d;
                    }
                }
            }
        }
    return loss;
}

namespace {

void ensure_group_sizes(ParamGradients& g, const MorphableBasis& basis)
{
    if (g.alpha.size() == 0) g.alpha = VecX::Zero(basis.k_shape());
    if (g.delta.size() == 0) g.delta = VecX::Zero(basis.k_expr());
    if (g.beta.size() == 0) g.beta = VecX::Zero(basis.k_reflectance());
}

// Landmark + prior + box(delta): the non-photometric part of the stage-I
// energy, accumulated into the running objective.
void accumulate_stage1_terms(ObjectiveResult& result, const DiffRenderer& renderer,
                             const MorphableBasis& basis, const SceneParams& params,
                             const LandmarkSet& landmarks, const LossWeights& weights)
{
    LandmarkLossGrads lg;
    const double e_land = landmark_loss(renderer.mesh(), basis.landmark_vertex_ids,
                                        params.camera, landmarks, &lg);
    result.terms["landmark"] = weights.alpha_1 * e_land;
    auto& g = result.grads;
    for (int l = 0; l < kNumLandmarks; ++l) {
        if (lg.d_vertex[l].isZero(0.0)) continue;
        const int vid = basis.landmark_vertex_ids[l];
        const Vec3 adj = weights.alpha_1 * lg.d_vertex[l];
        g.alpha += basis.shape_basis.middleRows(3 * vid, 3).transpose() * adj;
        g.delta += basis.expr_basis.middleRows(3 * vid, 3).transpose() * adj;
    }
    g.rotation += weights.alpha_1 * lg.d_rotation;
    g.translation += weights.alpha_1 * lg.d_translation;

    VecX ga, gb;
    result.terms["prior"] = prior_loss(params.alpha, params.beta, weights.w_shape_prior,
                                       weights.w_albedo_prior, &ga, &gb);
    g.alpha += ga;
    g.beta += gb;

    VecX box_adj = VecX::Zero(params.delta.size());
    result.terms["box_delta"] =
        box_loss(params.delta.data(), params.delta.size(), 0.0, 1.0, box_adj.data());
    g.delta += box_adj;
}

} // namespace

ObjectiveResult stage1_objective(DiffRenderer& renderer, const MorphableBasis& basis,
                                 const SceneParams& params, const RenderConfig& cfg,
                                 const Image& target, const LandmarkSet& landmarks,
                                 const LossWeights& weights)
{
    weights.validate();
    ObjectiveResult result;
    result.render = renderer.render(params, cfg, true);
    std::vector<double> adjoint;
    result.terms["photo"] = photo_loss(result.render, target, &adjoint);
    GradientRequest req;
    result.grads = renderer.backward(adjoint, req);
    ensure_group_sizes(result.grads, basis);
    accumulate_stage1_terms(result, renderer, basis, params, landmarks, weights);
    for (const auto& [name, value] : result.terms) result.total += value;
    return result;
}

ObjectiveResult stage2_objective(DiffRenderer& renderer, const MorphableBasis& basis,
                                 const SceneParams& params, const RenderConfig& cfg,
                                 const Image& target, const LandmarkSet& landmarks,
                                 const LossWeights& weights, bool joint)
{
    weights.validate();
    ObjectiveResult result;
    result.render = renderer.render(params, cfg, true);
    std::vector<double> adjoint;
    result.terms["photo"] = photo_loss(result.render, target, &adjoint);

    GradientRequest req;
    req.alpha = req.delta = req.beta = req.gamma = req.camera = joint;
    req.delta_d = req.delta_s = true;
    result.grads = renderer.backward(adjoint, req);
    ensure_group_sizes(result.grads, basis);

    const AlbedoTextures& inc = renderer.textures();        // D-hat / S-hat
    const AlbedoTextures& stat = renderer.statistical_textures();
    const size_t n = inc.diffuse.size();
    std::vector<double> adj_d(n, 0.0), adj_s(n, 0.0);
    std::vector<double> adj_ref_d, adj_ref_s;
    if (joint) {
        adj_ref_d.assign(n, 0.0);
        adj_ref_s.assign(n, 0.0);
    }
    auto weighted = [](std::vector<double>& dst, const std::vector<double>& src,
                       double w) {
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    };

    std::vector<double> tmp(n, 0.0);
    double sym = symmetry_loss(inc.diffuse, inc.valid, &tmp);
    weighted(adj_d, tmp, weights.w_1);
    tmp.assign(n, 0.0);
    sym += symmetry_loss(inc.specular, inc.valid, &tmp);
    weighted(adj_s, tmp, weights.w_1);
    result.terms["symmetry"] = weights.w_1 * sym;

    tmp.assign(n, 0.0);
    std::vector<double> tmp_ref(joint ? n : 0, 0.0);
    result.terms["consistency_d"] = weights.w_2d * chromaticity_consistency_loss(
        inc.diffuse, stat.diffuse, inc.valid, &tmp, joint ? &tmp_ref : nullptr);
    weighted(adj_d, tmp, weights.w_2d);
    if (joint) weighted(adj_ref_d, tmp_ref, weights.w_2d);

    tmp.assign(n, 0.0);
    if (joint) tmp_ref.assign(n, 0.0);
    result.terms["consistency_s"] = weights.w_2s * chromaticity_consistency_loss(
        inc.specular, stat.specular, inc.valid, &tmp, joint ? &tmp_ref : nullptr);
    weighted(adj_s, tmp, weights.w_2s);
    if (joint) weighted(adj_ref_s, tmp_ref, weights.w_2s);

    tmp.assign(n, 0.0);
    double sm = smoothness_loss(inc.diffuse, inc.valid, &tmp);
    weighted(adj_d, tmp, weights.w_3);
    tmp.assign(n, 0.0);
    sm += smoothness_loss(inc.specular, inc.valid, &tmp);
    weighted(adj_s, tmp, weights.w_3);
    result.terms["smoothness"] = weights.w_3 * sm;

    tmp.assign(n, 0.0);
    double bx = box_loss(inc.diffuse, 0.0, 1.0, &tmp);
    weighted(adj_d, tmp, weights.w_4);
    tmp.assign(n, 0.0);
    bx += box_loss(inc.specular, 0.0, 1.0, &tmp);
    weighted(adj_s, tmp, weights.w_4);
    result.terms["box_textures"] = weights.w_4 * bx;

    for (size_t i = 0; i < n; ++i) {
        result.grads.delta_d[i] += adj_d[i];
        result.grads.delta_s[i] += adj_s[i];
    }

    if (joint) {
        // The texture regularizers see beta through both D-hat and the
        // statistical reference.
        for (size_t i = 0; i < n; ++i) {
            adj_d[i] += adj_ref_d[i];
            adj_s[i] += adj_ref_s[i];
        }
        result.grads.beta +=
            albedo_coeff_adjoint(basis, renderer.rasterization(), adj_d, adj_s);
        accumulate_stage1_terms(result, renderer, basis, params, landmarks, weights);
    } else {
        result.terms["landmark"] =
            weights.alpha_1 * landmark_loss(renderer.mesh(), basis.landmark_vertex_ids,
                                            params.camera, landmarks, nullptr);
    }

    for (const auto& [name, value] : result.terms) result.total += value;
    return result;
}

} // namespace facetrace
