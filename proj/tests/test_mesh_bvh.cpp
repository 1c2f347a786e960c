#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "facetrace/bvh.hpp"
#include "facetrace/morphable.hpp"
#include "facetrace/rng.hpp"

using namespace facetrace;

namespace {

TriMesh random_blob(uint64_t seed, int n_verts = 300)
{
    const MorphableBasis basis = generate_toy_basis(seed, n_verts, 6, 3, 2, 32);
    VecX a(6), d(3);
    Pcg32 rng(seed + 1, 0);
    for (int i = 0; i < 6; ++i)
        a(i) = rng.uniform() * 2.0 - 1.0;
    for (int i = 0; i < 3; ++i)
        d(i) = rng.uniform() * 2.0 - 1.0;
    return synthesize_geometry(basis, a, d);
}

Hit brute_force_hit(const TriMesh& mesh, const Ray& ray)
{
    Hit best;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        Hit h;
        Ray r = ray;
        r.tmax = best.t;
        if (intersect_triangle(r, mesh.positions[tri[0]], mesh.positions[tri[1]],
                               mesh.positions[tri[2]], h)) {
            best = h;
            best.triangle = t;
        }
    }
    return best;
}

} // namespace

TEST_CASE("ray through a triangle centroid hits with equal barycentrics")
{
    TriMesh mesh;
    mesh.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    mesh.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    mesh.triangles = {{0, 1, 2}};
    mesh.recompute_normals();
    const Bvh bvh(mesh);

    Ray ray;
    ray.origin = Vec3(1.0 / 3.0, 1.0 / 3.0, 5.0);
    ray.dir = Vec3(0, 0, -1);
    const Hit hit = bvh.closest_hit(ray);
    REQUIRE(hit.valid());
    CHECK(hit.t == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(hit.u == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(hit.v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    Ray parallel;
    parallel.origin = Vec3(0, 0, 1);
    parallel.dir = Vec3(1, 0, 0);
    CHECK_FALSE(bvh.closest_hit(parallel).valid());
}

TEST_CASE("bvh agrees with brute force on 10k random rays")
{
    const TriMesh mesh = random_blob(19);
    const Bvh bvh(mesh);
    Pcg32 rng(4, 0);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        Ray ray;
        ray.origin = Vec3(rng.uniform() * 40 - 20, rng.uniform() * 40 - 20,
                          rng.uniform() * 40 - 20);
        const Vec3 target(rng.uniform() * 16 - 8, rng.uniform() * 16 - 8,
                          rng.uniform() * 16 - 8);
        ray.dir = (target - ray.origin).normalized();
        const Hit a = bvh.closest_hit(ray);
        const Hit b = brute_force_hit(mesh, ray);
        REQUIRE(a.triangle == b.triangle);
        if (a.valid()) {
            ++hits;
            CHECK(a.t == doctest::Approx(b.t).epsilon(1e-6));
        }
        CHECK(bvh.any_hit(ray) == b.valid());
    }
    CHECK(hits > 1000); // the ray distribution must actually exercise hits
}

TEST_CASE("closest point matches brute force on 10k queries")
{
    const TriMesh mesh = random_blob(23);
    const Bvh bvh(mesh);
    Pcg32 rng(6, 0);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 q(rng.uniform() * 30 - 15, rng.uniform() * 30 - 15,
                     rng.uniform() * 30 - 15);
        const SurfacePoint sp = bvh.closest_point(q);
        double best = std::numeric_limits<double>::infinity();
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            double u, v;
            const Vec3 cp = closest_point_on_triangle(
                q, mesh.positions[tri[0]], mesh.positions[tri[1]],
                mesh.positions[tri[2]], u, v);
            best = std::min(best, (cp - q).norm());
        }
        CHECK(std::abs(sp.distance - best) < 1e-9);
    }
}

TEST_CASE("area-weighted vertex normals")
{
    // two coplanar triangles: every vertex normal must be the plane normal
    TriMesh mesh;
    mesh.positions = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0), Vec3(2, 2, 0)};
    mesh.uvs.assign(4, Vec2(0, 0));
    mesh.triangles = {{0, 1, 2}, {1, 3, 2}};
    mesh.recompute_normals();
    for (const Vec3& n : mesh.normals)
        CHECK((n - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("normals_backward matches finite differences")
{
    TriMesh mesh = random_blob(31, 400);
    Pcg32 rng(8, 0);
    std::vector<Vec3> adj(mesh.vertex_count());
    for (auto& a : adj)
        a = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);

    std::vector<Vec3> grad(mesh.vertex_count(), Vec3::Zero());
    normals_backward(mesh, adj, grad);

    const double h = 1e-6;
    for (int trial = 0; trial < 12; ++trial) {
        const int vid = static_cast<int>(rng.uniform() * mesh.vertex_count());
        const int axis = trial % 3;
        TriMesh plus = mesh, minus = mesh;
        plus.positions[vid][axis] += h;
        minus.positions[vid][axis] -= h;
        plus.recompute_normals();
        minus.recompute_normals();
        double fd = 0.0;
        for (int i = 0; i < mesh.vertex_count(); ++i)
            fd += adj[i].dot(plus.normals[i] - minus.normals[i]);
        fd /= 2.0 * h;
        CHECK(grad[vid][axis] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("obj round-trip preserves geometry")
{
    // loading drops unreferenced vertices, so compare after one load pass
    const TriMesh src = random_blob(37, 400);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string p1 = (dir / "ft_mesh1.obj").string();
    const std::string p2 = (dir / "ft_mesh2.obj").string();
    save_obj(src, p1);
    const TriMesh mesh = load_obj(p1);
    REQUIRE(mesh.triangle_count() == src.triangle_count());
    CHECK(mesh.vertex_count() <= src.vertex_count());
    save_obj(mesh, p2);
    const TriMesh back = load_obj(p2);
    REQUIRE(back.vertex_count() == mesh.vertex_count());
    REQUIRE(back.triangle_count() == mesh.triangle_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        CHECK((back.positions[i] - mesh.positions[i]).norm() < 1e-6);
        CHECK((back.uvs[i] - mesh.uvs[i]).norm() < 1e-6);
    }
    // triangle areas survive the pass through the file
    auto area = [](const TriMesh& m) {
        double a = 0.0;
        for (const auto& t : m.triangles)
            a += 0.5 * (m.positions[t[1]] - m.positions[t[0]])
                           .cross(m.positions[t[2]] - m.positions[t[0]])
                           .norm();
        return a;
    };
    CHECK(area(src) == doctest::Approx(area(back)).epsilon(1e-9));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
