#pragma once

#include <array>
#include <cmath>

#include "facetrace/geom.hpp"

namespace facetrace {

// Real spherical harmonics through band 8: orthonormal over the sphere,
// Condon-Shortley-phase-free. Indexing is l*(l+1)+m.

inline constexpr int kMaxBand = 8;
inline constexpr int kNumCoeffs = (kMaxBand + 1) * (kMaxBand + 1);

constexpr int sh_index(int l, int m) { return l * (l + 1) + m; }
constexpr int sh_count(int max_band) { return (max_band + 1) * (max_band + 1); }

namespace detail {

// N_lm = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), with sqrt(2) folded in for m>0.
inline const double* sh_norms()
{
    static const std::array<double, kNumCoeffs> table = [] {
        std::array<double, kNumCoeffs> t{};
        for (int l = 0; l <= kMaxBand; ++l)
            for (int m = 0; m <= l; ++m) {
                double ratio = 1.0;
                for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
                double n = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
                if (m > 0) n *= std::sqrt(2.0);
                t[sh_index(l, m)] = n;
            }
        return t;
    }();
    return table.data();
}

} // namespace detail

// Evaluates all basis functions up to `max_band` at a unit direction.
// Templated so dual numbers can flow through; the recurrences are
// polynomial in (x, y, z) and pole-safe.
template <typename T>
void sh_eval(const T& x, const T& y, const T& z, int max_band, T* out)
{
    const double* norm = detail::sh_norms();
    const int bands = max_band + 1;

    // Re/Im of (x + iy)^m; carries the sin(theta)^m factor.
    std::array<T, kMaxBand + 1> re, im;
    re[0] = T(1.0);
    im[0] = T(0.0);
    for (int m = 1; m < bands; ++m) {
        re[m] = x * re[m - 1] - y * im[m - 1];
        im[m] = x * im[m - 1] + y * re[m - 1];
    }

    // Sin-folded associated Legendre P~_lm = P_lm / sin(theta)^m, CS-free.
    std::array<T, kNumCoeffs> p;
    p[sh_index(0, 0)] = T(1.0);
    for (int m = 1; m < bands; ++m)
        p[sh_index(m, m)] = T(2.0 * m - 1.0) * p[sh_index(m - 1, m - 1)];
    for (int m = 0; m + 1 < bands; ++m)
        p[sh_index(m + 1, m)] = z * T(2.0 * m + 1.0) * p[sh_index(m, m)];
    for (int m = 0; m < bands; ++m)
        for (int l = m + 2; l < bands; ++l)
            p[sh_index(l, m)] =
                (z * T(2.0 * l - 1.0) * p[sh_index(l - 1, m)] -
                 T(l + m - 1.0) * p[sh_index(l - 2, m)]) *
                T(1.0 / (l - m));

    for (int l = 0; l < bands; ++l) {
        out[l * (l + 1)] = T(norm[sh_index(l, 0)]) * p[sh_index(l, 0)];
        for (int m = 1; m <= l; ++m) {
            const T base = T(norm[sh_index(l, m)]) * p[sh_index(l, m)];
            out[l * (l + 1) + m] = base * re[m];
            out[l * (l + 1) - m] = base * im[m];
        }
    }
}

inline void sh_eval(const Vec3& dir, int max_band, double* out)
{
    sh_eval(dir.x(), dir.y(), dir.z(), max_band, out);
}

} // namespace facetrace
