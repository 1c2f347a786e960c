#pragma once

#include <vector>

#include "facetrace/geom.hpp"
#include "facetrace/image.hpp"
#include "facetrace/sh.hpp"

namespace facetrace {

// Nine-band RGB spherical-harmonics light: 81 coefficient triples in units
// of radiance.
struct ShLight {
    Eigen::Matrix<double, kNumCoeffs, 3> coeffs = Eigen::Matrix<double, kNumCoeffs, 3>::Zero();

    static ShLight dc(const Vec3& rgb)
    {
        ShLight l;
        l.coeffs.row(0) = rgb.transpose();
        return l;
    }

    // Zeroes all coefficients with l >= bands. Idempotent.
    ShLight truncated(int bands) const;
};

// 64x64 lat-long radiance map derived from an ShLight. Row 0 is theta = 0
// (+z); column j covers phi in [j, j+1) * 2pi/64.
class EnvMap {
public:
    static constexpr int kSize = 64;

    EnvMap() = default;
    static EnvMap from_sh(const ShLight& light);
    static EnvMap from_image(const Image& img); // 64x64x3 PFM contents
    Image to_image() const;

    const Vec3& radiance(int row, int col) const { return radiance_[row * kSize + col]; }
    double solid_angle(int row) const { return solid_angle_[row]; }
    double total_luminance() const { return total_; } // integral of luminance (sr-weighted)
    static Vec3 texel_center_dir(int row, int col);
    static int texel_count() { return kSize * kSize; }

    struct LightSample {
        Vec3 direction;
        Vec3 radiance;
        double pdf = 0.0; // per steradian
        int texel = -1;
    };

    // Draws a direction proportional to luminance x solid angle; uniform
    // within the chosen texel's solid-angle footprint.
    LightSample sample(double u1, double u2) const;

    // Radiance/pdf for a fixed texel (used by the gradient replay path).
    Vec3 texel_radiance(int texel) const { return radiance_[texel]; }
    double texel_pdf(int texel) const;

private:
    void finalize();

    std::vector<Vec3> radiance_;    // kSize*kSize, clamped >= 0
    std::vector<double> solid_angle_; // per row, exact band area / kSize
    std::vector<double> cdf_;       // kSize*kSize + 1, ends at 1
    double total_ = 0.0;
};

// Basis values for the (max_band+1)^2 functions at a unit direction.
// Throws std::invalid_argument if the direction is not unit length.
std::vector<double> sh_basis(const Vec3& direction, int max_band);

// Zonal projections about +z: A_l = 2*pi * int max(cos,0) Y_l0 d(cos).
std::vector<double> clamped_cosine_coeffs(int max_band);

// Zonal projection of the normalized GGX specular kernel D(cos)*max(cos,0)
// for the given roughness (see brdf.hpp for the kernel definition).
std::vector<double> specular_lobe_coeffs(double roughness, int max_band);

// Cached Y_lm values at every env-map texel center (kNumCoeffs per texel).
const std::vector<double>& envmap_basis_table();

} // namespace facetrace
