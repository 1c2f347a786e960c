#pragma once

#include "facetrace/render.hpp"
#include "facetrace/rng.hpp"

namespace facetrace::testfix {

struct ToyScene {
    MorphableBasis basis;
    SceneParams params;
    RenderConfig cfg;
};

inline ShLight random_sky(uint64_t seed, double ambient = 2.0, double scale = 0.6)
{
    ShLight light;
    Pcg32 rng(seed, 99);
    for (int i = 0; i < kNumCoeffs; ++i)
        for (int c = 0; c < 3; ++c)
            light.coeffs(i, c) =
                scale * (rng.uniform() * 2.0 - 1.0) / (1.0 + 0.6 * std::sqrt(double(i)));
    light.coeffs(0, 0) += ambient;
    light.coeffs(0, 1) += ambient;
    light.coeffs(0, 2) += ambient;
    return light;
}

inline ToyScene make_toy_scene(uint64_t seed, int n_verts = 700, int res = 64,
                               int image = 64, int spp = 4)
{
    ToyScene s;
    s.basis = generate_toy_basis(seed, n_verts, 6, 3, 4, res);
    Pcg32 rng(seed, 7);
    s.params.alpha = VecX(6);
    s.params.delta = VecX(3);
    s.params.beta = VecX(4);
    for (int i = 0; i < 6; ++i)
        s.params.alpha(i) = 0.6 * (rng.uniform() * 2.0 - 1.0);
    for (int i = 0; i < 3; ++i)
        s.params.delta(i) = 0.4 * (rng.uniform() * 2.0 - 1.0);
    for (int i = 0; i < 4; ++i)
        s.params.beta(i) = 0.5 * (rng.uniform() * 2.0 - 1.0);
    s.params.gamma = random_sky(seed);
    s.params.camera.translation = Vec3(0.0, 0.0, -40.0);
    s.params.camera.rotation = Vec3(0.02, -0.03, 0.01);
    s.params.camera.focal_length = 2.0 * image;
    s.params.camera.principal_point = Vec2(image / 2.0, image / 2.0);
    s.cfg.width = image;
    s.cfg.height = image;
    s.cfg.spp = spp;
    s.cfg.rng_seed = seed;
    s.cfg.workers = 1;
    return s;
}

} // namespace facetrace::testfix
