#pragma once

#include <vector>

#include "facetrace/brdf.hpp"
#include "facetrace/lighting.hpp"

namespace facetrace {

// Closed-form vertex shading: SH light convolved with a zonal kernel and
// evaluated at a direction. These back the vertex renderer and the
// cross-renderer checks against the ray tracer.

// Per-band kernel weights with the convolution factor sqrt(4pi/(2l+1))
// folded in, ready to multiply light coefficients band-wise.
std::vector<double> diffuse_band_weights(int max_band);                    // includes the 1/pi albedo fold
std::vector<double> specular_band_weights(double roughness, int max_band);

// sum_lm w_l * gamma_lm * Y_lm(dir), per channel, no clamping.
template <typename T>
std::array<T, 3> sh_convolved_radiance(const ShLight& light,
                                       const std::vector<double>& band_weights,
                                       const TVec3<T>& dir)
{
    const int max_band = static_cast<int>(band_weights.size()) - 1;
    std::array<T, kNumCoeffs> y;
    sh_eval(dir.x, dir.y, dir.z, max_band, y.data());
    std::array<T, 3> out{T(0.0), T(0.0), T(0.0)};
    for (int l = 0; l <= max_band; ++l)
        for (int m = -l; m <= l; ++m) {
            const int k = sh_index(l, m);
            const T basis = y[k] * T(band_weights[l]);
            for (int c = 0; c < 3; ++c)
                out[c] += basis * T(light.coeffs(k, c));
        }
    return out;
}

// B_d: diffuse reflected radiance (c/pi) * irradiance(n), clamped at 0.
Vec3 vertex_irradiance_diffuse(const ShLight& light, const Vec3& normal,
                               const Vec3& diffuse_albedo, int max_band = kMaxBand);

// B_s: specular-kernel-filtered radiance about the reflection direction.
Vec3 vertex_irradiance_specular(const ShLight& light, const Vec3& reflection,
                                double roughness, int max_band = kMaxBand);

// B = (1 - s) B_d + s B_s with s the luminance of the specular albedo;
// `view` points from the surface toward the camera.
Vec3 vertex_irradiance(const ShLight& light, const Vec3& normal,
                       const Vec3& diffuse_albedo, const Vec3& specular_albedo,
                       const Vec3& view, double roughness, int max_band = kMaxBand);

} // namespace facetrace
