#include "facetrace/bvh.hpp"

#include <algorithm>
#include <stdexcept>

namespace facetrace {

bool intersect_triangle(const Ray& ray, const Vec3& p0, const Vec3& p1,
                        const Vec3& p2, Hit& hit)
{
    const Vec3 e1 = p1 - p0;
    const Vec3 e2 = p2 - p0;
    const Vec3 pv = ray.dir.cross(e2);
    const double det = e1.dot(pv);
    if (det == 0.0) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = ray.origin - p0;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = ray.dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(qv) * inv;
    if (t <= ray.tmin || t >= ray.tmax) return false;
    hit.t = t;
    hit.u = u;
    hit.v = v;
    return true;
}

Vec3 closest_point_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b,
                               const Vec3& c, double& u, double& v)
{
    const Vec3 ab = b - a, ac = c - a, aq = q - a;
    const double d1 = ab.dot(aq), d2 = ac.dot(aq);
    if (d1 <= 0.0 && d2 <= 0.0) { u = v = 0.0; return a; }

    const Vec3 bq = q - b;
    const double d3 = ab.dot(bq), d4 = ac.dot(bq);
    if (d3 >= 0.0 && d4 <= d3) { u = 1.0; v = 0.0; return b; }

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        u = d1 / (d1 - d3);
        v = 0.0;
        return a + u * ab;
    }

    const Vec3 cq = q - c;
    const double d5 = ab.dot(cq), d6 = ac.dot(cq);
    if (d6 >= 0.0 && d5 <= d6) { u = 0.0; v = 1.0; return c; }

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        u = 0.0;
        v = d2 / (d2 - d6);
        return a + v * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        u = 1.0 - w;
        v = w;
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    u = vb * denom;
    v = vc * denom;
    return a + ab * u + ac * v;
}

namespace {

inline bool aabb_hit(const Vec3& lo, const Vec3& hi, const Ray& ray,
                     const Vec3& inv_dir, double tmax)
{
    double t0 = ray.tmin, t1 = tmax;
    for (int a = 0; a < 3; ++a) {
        double near = (lo(a) - ray.origin(a)) * inv_dir(a);
        double far = (hi(a) - ray.origin(a)) * inv_dir(a);
        if (near > far) std::swap(near, far);
        t0 = std::max(t0, near);
        t1 = std::min(t1, far);
        if (t0 > t1) return false;
    }
    return true;
}

inline double aabb_distance2(const Vec3& lo, const Vec3& hi, const Vec3& q)
{
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::max({lo(a) - q(a), 0.0, q(a) - hi(a)});
        d2 += d * d;
    }
    return d2;
}

} // namespace

Bvh::Bvh(const TriMesh& mesh) : mesh_(mesh)
{
    if (mesh.triangle_count() == 0)
        throw std::invalid_argument("Bvh: empty mesh");
    diagonal_ = mesh.bounds_diagonal();

    std::vector<int> items;
    std::vector<Vec3> centers(mesh.triangle_count(), Vec3::Zero());
    items.reserve(mesh.triangle_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3& a = mesh.positions[tri[0]];
        const Vec3& b = mesh.positions[tri[1]];
        const Vec3& c = mesh.positions[tri[2]];
        if ((b - a).cross(c - a).squaredNorm() == 0.0) {
            ++degenerate_; // zero-area, skipped
            continue;
        }
        centers[t] = (a + b + c) / 3.0;
        items.push_back(t);
    }
    if (items.empty())
        throw std::invalid_argument("Bvh: all triangles degenerate");
    nodes_.reserve(2 * items.size());
    nodes_.emplace_back();
    build(0, items, 0, static_cast<int>(items.size()), centers);
}

void Bvh::build(int node, std::vector<int>& items, int begin, int end,
                const std::vector<Vec3>& centers)
{
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i)
        for (int k : mesh_.triangles[items[i]]) {
            lo = lo.cwiseMin(mesh_.positions[k]);
            hi = hi.cwiseMax(mesh_.positions[k]);
        }
    nodes_[node].lo = lo;
    nodes_[node].hi = hi;

    const int count = end - begin;
    if (count <= 4) {
        nodes_[node].left = static_cast<int>(order_.size());
        nodes_[node].count = count;
        for (int i = begin; i < end; ++i) order_.push_back(items[i]);
        return;
    }

    Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 chi = -clo;
    for (int i = begin; i < end; ++i) {
        clo = clo.cwiseMin(centers[items[i]]);
        chi = chi.cwiseMax(centers[items[i]]);
    }
    int axis;
    (chi - clo).maxCoeff(&axis);
    const int mid = begin + count / 2;
    std::nth_element(items.begin() + begin, items.begin() + mid,
                     items.begin() + end, [&](int a, int b) {
                         if (centers[a](axis) != centers[b](axis))
                             return centers[a](axis) < centers[b](axis);
                         return a < b;
                     });

    const int left = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[node].left = left;
    nodes_[node].right = left + 1;
    nodes_[node].count = 0;
    build(left, items, begin, mid, centers);
    build(left + 1, items, mid, end, centers);
}

Hit Bvh::closest_hit(const Ray& ray) const
{
    Hit best;
    best.t = ray.tmax;
    const Vec3 inv_dir = ray.dir.cwiseInverse();
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!aabb_hit(node.lo, node.hi, ray, inv_dir, best.t)) continue;
        if (node.count > 0) {
            for (int i = 0; i < node.count; ++i) {
                const int tri = order_[node.left + i];
                const auto& tv = mesh_.triangles[tri];
                Hit h;
                Ray r = ray;
                r.tmax = best.t;
                if (intersect_triangle(r, mesh_.positions[tv[0]],
                                       mesh_.positions[tv[1]],
                                       mesh_.positions[tv[2]], h)) {
                    best = h;
                    best.triangle = tri;
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    if (!best.valid()) best.t = std::numeric_limits<double>::infinity();
    return best;
}

bool Bvh::any_hit(const Ray& ray) const
{
    const Vec3 inv_dir = ray.dir.cwiseInverse();
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!aabb_hit(node.lo, node.hi, ray, inv_dir, ray.tmax)) continue;
        if (node.count > 0) {
            for (int i = 0; i < node.count; ++i) {
                const auto& tv = mesh_.triangles[order_[node.left + i]];
                Hit h;
                if (intersect_triangle(ray, mesh_.positions[tv[0]],
                                       mesh_.positions[tv[1]],
                                       mesh_.positions[tv[2]], h))
                    return true;
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return false;
}

SurfacePoint Bvh::closest_point(const Vec3& query) const
{
    SurfacePoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    // Pairs of (node, lower-bound distance^2), nearest first.
    struct Entry { int node; double d2; };
    Entry stack[64];
    int top = 0;
    stack[top++] = {0, aabb_distance2(nodes_[0].lo, nodes_[0].hi, query)};
    while (top > 0) {
        const Entry e = stack[--top];
        if (e.d2 >= best_d2) continue;
        const Node& node = nodes_[e.node];
        if (node.count > 0) {
            for (int i = 0; i < node.count; ++i) {
                const int tri = order_[node.left + i];
                const auto& tv = mesh_.triangles[tri];
                double u, v;
                const Vec3 p = closest_point_on_triangle(
                    query, mesh_.positions[tv[0]], mesh_.positions[tv[1]],
                    mesh_.positions[tv[2]], u, v);
                const double d2 = (p - query).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best.triangle = tri;
                    best.point = p;
                    best.u = u;
                    best.v = v;
                }
            }
        } else {
            Entry a{node.left, aabb_distance2(nodes_[node.left].lo, nodes_[node.left].hi, query)};
            Entry b{node.right, aabb_distance2(nodes_[node.right].lo, nodes_[node.right].hi, query)};
            if (a.d2 < b.d2) std::swap(a, b); // push nearer child last
            if (a.d2 < best_d2) stack[top++] = a;
            if (b.d2 < best_d2) stack[top++] = b;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

} // namespace facetrace
