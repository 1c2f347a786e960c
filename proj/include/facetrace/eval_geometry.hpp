#pragma once

#include <string>
#include <vector>

#include "facetrace/geom.hpp"
#include "facetrace/mesh.hpp"

namespace facetrace {

// Sparse correspondence pairs (source vertex id, target vertex id) used to
// seed the rigid/similarity alignment before dense error passes.
struct CorrespondenceSet {
    std::vector<std::pair<int, int>> pairs;
};

// Text format: one "source_id target_id" pair per line, '#' comments.
CorrespondenceSet load_correspondences(const std::string& path);
void save_correspondences(const CorrespondenceSet& corr, const std::string& path);

struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// Closed-form least-squares fit of target ~= s R source + t via the SVD of
// the cross-covariance, reflection-corrected so R is in SO(3). Throws on
// fewer than 3 pairs or a degenerate (rank < 2) point configuration.
SimilarityTransform umeyama_align(const std::vector<Vec3>& source,
                                  const std::vector<Vec3>& target,
                                  bool with_scale = true);

// Per-vertex closest-point distance from each `from` vertex to the surface
// of `to` (BVH-accelerated true point-to-triangle distance).
std::vector<double> mesh_distance(const TriMesh& from, const TriMesh& to,
                                  int workers = 0);

// Angle between each `from` vertex normal and the barycentrically
// interpolated normal at its closest point on `to`. Radians in [0, pi].
std::vector<double> normal_error(const TriMesh& from, const TriMesh& to,
                                 int workers = 0);

struct GeomErrorReport {
    std::vector<double> distances;     // cm, per recon vertex
    std::vector<double> normal_angles; // rad, per recon vertex
    double position_mean = 0.0;        // mu over vertices
    double position_stddev = 0.0;      // population sigma (divisor N)
    double normal_mean = 0.0;
    double normal_stddev = 0.0;
    SimilarityTransform alignment;     // applied to the reconstruction
};

// Aligns recon onto gt with umeyama_align over the correspondences, then
// runs the distance and normal passes recon -> gt and aggregates.
GeomErrorReport geometry_report(const TriMesh& recon, const TriMesh& gt,
                                const CorrespondenceSet& corr,
                                bool with_scale = true, int workers = 0);

// Pooled-vertex vs mean-of-subject-means aggregation over several reports.
struct AggregateStats {
    double pooled_position_mean = 0.0;
    double pooled_normal_mean = 0.0;
    double subject_position_mean = 0.0;
    double subject_normal_mean = 0.0;
};
AggregateStats aggregate_reports(const std::vector<GeomErrorReport>& reports);

// Structured text summary plus a per-vertex CSV (vertex,distance_cm,
// normal_angle_rad). Either path may be empty to skip that output.
void save_geometry_report(const GeomErrorReport& report,
                          const std::string& text_path,
                          const std::string& csv_path);

} // namespace facetrace
