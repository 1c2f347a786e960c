#pragma once

#include <limits>
#include <vector>

#include "facetrace/mesh.hpp"

namespace facetrace {

struct Ray {
    Vec3 origin;
    Vec3 dir; // not required to be unit; t is in units of |dir|
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    int triangle = -1;
    double u = 0.0, v = 0.0; // barycentrics of vertices 1 and 2

    bool valid() const { return triangle >= 0; }
};

struct SurfacePoint {
    double distance = std::numeric_limits<double>::infinity();
    int triangle = -1;
    Vec3 point = Vec3::Zero();
    double u = 0.0, v = 0.0;
};

// Watertight-enough Moller-Trumbore; returns false for parallel rays and
// hits outside (tmin, tmax).
bool intersect_triangle(const Ray& ray, const Vec3& p0, const Vec3& p1,
                        const Vec3& p2, Hit& hit);

// Closest point on a triangle to a query point (Ericson, RTCD 5.1.5).
Vec3 closest_point_on_triangle(const Vec3& q, const Vec3& p0, const Vec3& p1,
                               const Vec3& p2, double& u, double& v);

// Median-split BVH over the mesh triangles. The mesh must outlive the BVH.
class Bvh {
public:
    explicit Bvh(const TriMesh& mesh);

    Hit closest_hit(const Ray& ray) const;
    bool any_hit(const Ray& ray) const;
    SurfacePoint closest_point(const Vec3& query) const;

    int degenerate_count() const { return degenerate_; }
    double scene_diagonal() const { return diagonal_; }

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1;   // internal: child index; leaf: first triangle slot
        int count = 0;   // leaf triangle count; 0 for internal nodes
        int right = -1;
    };

    void build(int node, std::vector<int>& items, int begin, int end,
               const std::vector<Vec3>& centers);

    const TriMesh& mesh_;
    std::vector<Node> nodes_;
    std::vector<int> order_; // triangle indices, leaf-contiguous
    int degenerate_ = 0;
    double diagonal_ = 0.0;
};

} // namespace facetrace
