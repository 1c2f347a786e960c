#pragma once

#include <array>

#include "facetrace/dual.hpp"
#include "facetrace/geom.hpp"

namespace facetrace {

// Simplified Cook-Torrance with constant roughness: GGX distribution,
// separable Smith masking, Schlick Fresnel with F0 = specular albedo and
// the grazing reflectance capped at min(1, 50 F0).
// The diffuse lobe is weighted by (1 - s) per channel so the two lobes
// share the energy budget, matching the blend used by the vertex renderer.

struct BrdfParams {
    double roughness = 0.4;
    Vec3 diffuse = Vec3::Zero();
    Vec3 specular = Vec3::Zero();
};

inline double ggx_alpha(double roughness) { return roughness * roughness; }

// GGX normal distribution; integrates to 1 against cos over the hemisphere.
inline double ggx_ndf(double roughness, double cos_h)
{
    if (cos_h <= 0.0) return 0.0;
    const double a2 = ggx_alpha(roughness) * ggx_alpha(roughness);
    const double t = cos_h * cos_h * (a2 - 1.0) + 1.0;
    return a2 / (kPi * t * t);
}

template <typename T>
struct TVec3 {
    T x, y, z;
    TVec3() = default;
    TVec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
    explicit TVec3(const Vec3& v) : x(v.x()), y(v.y()), z(v.z()) {}
    T dot(const TVec3& o) const { return x * o.x + y * o.y + z * o.z; }
    TVec3 operator+(const TVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    TVec3 operator*(const T& s) const { return {x * s, y * s, z * s}; }
    TVec3 normalized() const
    {
        T inv = T(1.0) / facetrace::sqrt(dot(*this));
        return {x * inv, y * inv, z * inv};
    }
};

// Cook-Torrance evaluation, templated so dual numbers can flow through.
// Returns 0 when either direction is below the horizon.
template <typename T>
std::array<T, 3> brdf_eval_t(double roughness, const TVec3<T>& n,
                             const TVec3<T>& w_in, const TVec3<T>& w_out,
                             const std::array<T, 3>& diffuse,
                             const std::array<T, 3>& specular)
{
    const T n_i = n.dot(w_in);
    const T n_o = n.dot(w_out);
    std::array<T, 3> out{T(0.0), T(0.0), T(0.0)};
    if (!(n_i > T(0.0)) || !(n_o > T(0.0)))
        return out;

    const TVec3<T> h = (w_in + w_out).normalized();
    const T n_h = facetrace::max(n.dot(h), 0.0);
    const T o_h = facetrace::max(w_out.dot(h), 0.0);

    const double a2 = ggx_alpha(roughness) * ggx_alpha(roughness);
    const T t = n_h * n_h * T(a2 - 1.0) + T(1.0);
    const T d = T(a2 / kPi) / (t * t);

    auto g1 = [&](const T& c) {
        return T(2.0) * c / (c + facetrace::sqrt(T(a2) + T(1.0 - a2) * c * c));
    };
    const T g = g1(n_i) * g1(n_o);
    const T spec_base = d * g / (T(4.0) * n_i * n_o);
    const T fweight = pow5(T(1.0) - o_h);

    for (int c = 0; c < 3; ++c) {
        // grazing reflectance capped at 50 F0 so a black specular albedo
        // degrades to a pure lambertian lobe instead of a Schlick spike
        const T f90 = facetrace::min(specular[c] * T(50.0), 1.0);
        const T fresnel = specular[c] + (f90 - specular[c]) * fweight;
        out[c] = (T(1.0) - specular[c]) * diffuse[c] * T(1.0 / kPi) +
                 spec_base * fresnel;
    }
    return out;
}

// Plain-double entry point used by the forward renderer and tests.
// Directions must be unit length; w_in points toward the light, w_out
// toward the viewer, both away from the surface.
inline Vec3 eval_brdf(const BrdfParams& params, const Vec3& n,
                      const Vec3& w_in, const Vec3& w_out)
{
    auto r = brdf_eval_t<double>(params.roughness, TVec3<double>(n),
                                 TVec3<double>(w_in), TVec3<double>(w_out),
                                 {params.diffuse.x(), params.diffuse.y(), params.diffuse.z()},
                                 {params.specular.x(), params.specular.y(), params.specular.z()});
    return {r[0], r[1], r[2]};
}

} // namespace facetrace
