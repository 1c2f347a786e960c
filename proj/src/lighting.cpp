#include "facetrace/lighting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "facetrace/brdf.hpp"

namespace facetrace {

ShLight ShLight::truncated(int bands) const
{
    ShLight out = *this;
    for (int l = bands; l <= kMaxBand; ++l)
        for (int m = -l; m <= l; ++m)
            out.coeffs.row(sh_index(l, m)).setZero();
    return out;
}

Vec3 EnvMap::texel_center_dir(int row, int col)
{
    const double theta = (row + 0.5) * kPi / kSize;
    const double phi = (col + 0.5) * 2.0 * kPi / kSize;
    const double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

const std::vector<double>& envmap_basis_table()
{
    static const std::vector<double> table = [] {
        std::vector<double> t(static_cast<size_t>(EnvMap::texel_count()) * kNumCoeffs);
        for (int i = 0; i < EnvMap::kSize; ++i)
            for (int j = 0; j < EnvMap::kSize; ++j)
                sh_eval(EnvMap::texel_center_dir(i, j), kMaxBand,
                        &t[(static_cast<size_t>(i) * EnvMap::kSize + j) * kNumCoeffs]);
        return t;
    }();
    return table;
}

void EnvMap::finalize()
{
    solid_angle_.resize(kSize);
    for (int i = 0; i < kSize; ++i) {
        // Exact band area so the per-texel angles sum to 4*pi.
        const double z_hi = std::cos(i * kPi / kSize);
        const double z_lo = std::cos((i + 1) * kPi / kSize);
        solid_angle_[i] = (z_hi - z_lo) * 2.0 * kPi / kSize;
    }
    cdf_.assign(static_cast<size_t>(kSize) * kSize + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < kSize; ++i)
        for (int j = 0; j < kSize; ++j) {
            acc += luminance(radiance_[i * kSize + j]) * solid_angle_[i];
            cdf_[i * kSize + j + 1] = acc;
        }
    total_ = acc;
    if (total_ > 0.0)
        for (auto& c : cdf_) c /= total_;
    cdf_.back() = 1.0;
}

EnvMap EnvMap::from_sh(const ShLight& light)
{
    EnvMap env;
    env.radiance_.resize(texel_count());
    const std::vector<double>& basis = envmap_basis_table();
    for (int t = 0; t < texel_count(); ++t) {
        const double* y = &basis[static_cast<size_t>(t) * kNumCoeffs];
        Vec3 rgb = Vec3::Zero();
        for (int k = 0; k < kNumCoeffs; ++k)
            rgb += y[k] * light.coeffs.row(k).transpose();
        env.radiance_[t] = rgb.cwiseMax(0.0); // SH ringing can go negative
    }
    env.finalize();
    return env;
}

EnvMap EnvMap::from_image(const Image& img)
{
    if (img.width() != kSize || img.height() != kSize || img.channels() != 3)
        throw std::invalid_argument("environment map image must be 64x64x3");
    EnvMap env;
    env.radiance_.resize(texel_count());
    for (int i = 0; i < kSize; ++i)
        for (int j = 0; j < kSize; ++j)
            env.radiance_[i * kSize + j] =
                Vec3(img.at(j, i, 0), img.at(j, i, 1), img.at(j, i, 2)).cwiseMax(0.0);
    env.finalize();
    return env;
}

Image EnvMap::to_image() const
{
    Image img(kSize, kSize, 3);
    for (int i = 0; i < kSize; ++i)
        for (int j = 0; j < kSize; ++j)
            for (int c = 0; c < 3; ++c)
                img.at(j, i, c) = static_cast<float>(radiance_[i * kSize + j](c));
    return img;
}

double EnvMap::texel_pdf(int texel) const
{
    return luminance(radiance_[texel]) / total_;
}

EnvMap::LightSample EnvMap::sample(double u1, double u2) const
{
    if (total_ <= 0.0)
        throw std::runtime_error("degenerate light: environment map is black");
    auto it = std::upper_bound(cdf_.begin() + 1, cdf_.end(), u1);
    int texel = static_cast<int>(std::min<ptrdiff_t>(it - cdf_.begin() - 1,
                                                     texel_count() - 1));
    const int row = texel / kSize;
    const int col = texel % kSize;

    // Split u2 into both in-texel coordinates (64 azimuthal sub-slots and a
    // continuous polar fraction) so the direction, given the texel, does not
    // depend on the radiance values. The gradient replay relies on that.
    const double u2s = std::clamp(u2, 0.0, 1.0) * kSize;
    const double sub = std::min(std::floor(u2s), kSize - 1.0);
    const double v = std::clamp(u2s - sub, 0.0, 1.0);
    const double z_hi = std::cos(row * kPi / kSize);
    const double z_lo = std::cos((row + 1) * kPi / kSize);
    const double z = z_hi + (z_lo - z_hi) * v;
    const double phi = (col + (sub + 0.5) / kSize) * 2.0 * kPi / kSize;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));

    LightSample out;
    out.direction = {s * std::cos(phi), s * std::sin(phi), z};
    out.radiance = radiance_[texel];
    out.pdf = texel_pdf(texel);
    out.texel = texel;
    return out;
}

std::vector<double> sh_basis(const Vec3& direction, int max_band)
{
    if (std::abs(direction.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("sh_basis: direction must be unit length");
    if (max_band < 0 || max_band > kMaxBand)
        throw std::invalid_argument("sh_basis: max_band out of range");
    std::vector<double> out(sh_count(max_band));
    sh_eval(direction, max_band, out.data());
    return out;
}

namespace {

// Zonal projection 2*pi * int_0^1 f(z) Y_l0(z) dz via composite Simpson in
// the polar angle, where sharp kernels about +z (GGX width ~alpha in theta
// but ~alpha^2 in z) stay resolved by a uniform grid.
std::vector<double> project_zonal(int max_band, const std::function<double(double)>& f)
{
    const int n = 1 << 16; // even
    const double h = (kPi / 2.0) / n;
    std::vector<double> acc(max_band + 1, 0.0);
    std::vector<double> y(sh_count(max_band));
    for (int i = 0; i <= n; ++i) {
        const double theta = i * h;
        const double z = std::cos(theta);
        const double s = std::sin(theta);
        sh_eval(s, 0.0, z, max_band, y.data());
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double fz = f(z) * s; // Jacobian dz = sin(theta) dtheta
        for (int l = 0; l <= max_band; ++l)
            acc[l] += w * fz * y[sh_index(l, 0)];
    }
    for (auto& a : acc) a *= 2.0 * kPi * h / 3.0;
    return acc;
}

} // namespace

std::vector<double> clamped_cosine_coeffs(int max_band)
{
    if (max_band < 0 || max_band > kMaxBand)
        throw std::invalid_argument("clamped_cosine_coeffs: max_band out of range");
    return project_zonal(max_band, [](double z) { return z; });
}

std::vector<double> specular_lobe_coeffs(double roughness, int max_band)
{
    if (!(roughness > 0.0 && roughness <= 1.0))
        throw std::invalid_argument("specular_lobe_coeffs: roughness must be in (0,1]");
    if (max_band < 0 || max_band > kMaxBand)
        throw std::invalid_argument("specular_lobe_coeffs: max_band out of range");
    return project_zonal(max_band, [roughness](double z) {
        return ggx_ndf(roughness, z) * z;
    });
}

} // namespace facetrace
