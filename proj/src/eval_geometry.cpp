#include "facetrace/eval_geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "facetrace/bvh.hpp"
#include "facetrace/parallel.hpp"

namespace facetrace {

CorrespondenceSet load_correspondences(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("io-error: cannot open " + path);
    CorrespondenceSet corr;
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        std::istringstream ss(line);
        int a, b;
        if (ss >> a >> b)
            corr.pairs.emplace_back(a, b);
    }
    return corr;
}

void save_correspondences(const CorrespondenceSet& corr, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("io-error: cannot open " + path);
    for (const auto& [a, b] : corr.pairs)
        out << a << ' ' << b << '\n';
}

SimilarityTransform umeyama_align(const std::vector<Vec3>& source,
                                  const std::vector<Vec3>& target,
                                  bool with_scale)
{
    const int n = static_cast<int>(source.size());
    if (n < 3 || source.size() != target.size())
        throw std::invalid_argument("alignment-failure: need >= 3 pairs");

    Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        mu_s += source[i];
        mu_t += target[i];
    }
    mu_s /= n;
    mu_t /= n;

    Mat3 cov = Mat3::Zero();
    double var_s = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 xs = source[i] - mu_s;
        const Vec3 xt = target[i] - mu_t;
        cov += xt * xs.transpose();
        var_s += xs.squaredNorm();
    }
    cov /= n;
    var_s /= n;

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(1.0, sv(0)))
        throw std::runtime_error("alignment-failure: degenerate correspondences");

    Vec3 d = Vec3::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
        d(2) = -1.0;

    SimilarityTransform xf;
    xf.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    xf.scale = with_scale ? sv.dot(d) / var_s : 1.0;
    xf.translation = mu_t - xf.scale * (xf.rotation * mu_s);
    return xf;
}

namespace {

void closest_point_pass(const TriMesh& from, const TriMesh& to, int workers,
                        std::vector<double>* dist, std::vector<double>* angle)
{
    if (to.triangle_count() == 0)
        throw std::invalid_argument("empty target mesh");
    const Bvh bvh(to);
    const int n = from.vertex_count();
    if (dist)
        dist->assign(n, 0.0);
    if (angle)
        angle->assign(n, 0.0);
    parallel_for(0, n, worker_count(workers), [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const SurfacePoint sp = bvh.closest_point(from.positions[i]);
            if (dist)
                (*dist)[i] = sp.distance;
            if (angle) {
                const auto& tri = to.triangles[sp.triangle];
                const Vec3 nt = ((1.0 - sp.u - sp.v) * to.normals[tri[0]] +
                                 sp.u * to.normals[tri[1]] +
                                 sp.v * to.normals[tri[2]])
                                    .normalized();
                const double c = std::clamp(from.normals[i].dot(nt), -1.0, 1.0);
                (*angle)[i] = std::acos(c);
            }
        }
    });
}

void mean_stddev(const std::vector<double>& v, double& mu, double& sigma)
{
    mu = sigma = 0.0;
    if (v.empty())
        return;
    for (double x : v)
        mu += x;
    mu /= static_cast<double>(v.size());
    for (double x : v)
        sigma += (x - mu) * (x - mu);
    sigma = std::sqrt(sigma / static_cast<double>(v.size()));
}

} // namespace

std::vector<double> mesh_distance(const TriMesh& from, const TriMesh& to,
                                  int workers)
{
    std::vector<double> d;
    closest_point_pass(from, to, workers, &d, nullptr);
    return d;
}

std::vector<double> normal_error(const TriMesh& from, const TriMesh& to,
                                 int workers)
{
    std::vector<double> a;
    closest_point_pass(from, to, workers, nullptr, &a);
    return a;
}

GeomErrorReport geometry_report(const TriMesh& recon, const TriMesh& gt,
                                const CorrespondenceSet& corr,
                                bool with_scale, int workers)
{
    std::vector<Vec3> src, dst;
    src.reserve(corr.pairs.size());
    dst.reserve(corr.pairs.size());
    for (const auto& [s, t] : corr.pairs) {
        if (s < 0 || s >= recon.vertex_count() || t < 0 || t >= gt.vertex_count())
            throw std::out_of_range("alignment-failure: correspondence id out of range");
        src.push_back(recon.positions[s]);
        dst.push_back(gt.positions[t]);
    }

    GeomErrorReport report;
    report.alignment = umeyama_align(src, dst, with_scale);

    TriMesh aligned = recon;
    for (auto& p : aligned.positions)
        p = report.alignment.apply(p);
    aligned.recompute_normals();

    closest_point_pass(aligned, gt, workers, &report.distances,
                       &report.normal_angles);
    mean_stddev(report.distances, report.position_mean, report.position_stddev);
    mean_stddev(report.normal_angles, report.normal_mean, report.normal_stddev);
    return report;
}

AggregateStats aggregate_reports(const std::vector<GeomErrorReport>& reports)
{
    AggregateStats agg;
    size_t total = 0;
    for (const auto& r : reports) {
        const size_t n = r.distances.size();
        agg.pooled_position_mean += r.position_mean * static_cast<double>(n);
        agg.pooled_normal_mean += r.normal_mean * static_cast<double>(n);
        agg.subject_position_mean += r.position_mean;
        agg.subject_normal_mean += r.normal_mean;
        total += n;
    }
    if (total > 0) {
        agg.pooled_position_mean /= static_cast<double>(total);
        agg.pooled_normal_mean /= static_cast<double>(total);
    }
    if (!reports.empty()) {
        agg.subject_position_mean /= static_cast<double>(reports.size());
        agg.subject_normal_mean /= static_cast<double>(reports.size());
    }
    return agg;
}

void save_geometry_report(const GeomErrorReport& report,
                          const std::string& text_path,
                          const std::string& csv_path)
{
    if (!text_path.empty()) {
        std::ofstream out(text_path);
        if (!out)
            throw std::runtime_error("io-error: cannot open " + text_path);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "Position error μ (cm): %.9g\n",
                      report.position_mean);
        out << buf;
        std::snprintf(buf, sizeof(buf), "Position error σ (cm): %.9g\n",
                      report.position_stddev);
        out << buf;
        std::snprintf(buf, sizeof(buf), "Normal error μ (rad): %.9g\n",
                      report.normal_mean);
        out << buf;
        std::snprintf(buf, sizeof(buf), "Normal error σ (rad): %.9g\n",
                      report.normal_stddev);
        out << buf;
        out << "Vertices: " << report.distances.size() << '\n';
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out)
            throw std::runtime_error("io-error: cannot open " + csv_path);
        out << "vertex,distance_cm,normal_angle_rad\n";
        char buf[128];
        for (size_t i = 0; i < report.distances.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i,
                          report.distances[i], report.normal_angles[i]);
            out << buf;
        }
    }
}

} // namespace facetrace
