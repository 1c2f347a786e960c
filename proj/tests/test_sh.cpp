#include <cmath>

#include "doctest.h"
#include "facetrace/brdf.hpp"
#include "facetrace/lighting.hpp"
#include "facetrace/rng.hpp"

using namespace facetrace;

namespace {

Vec3 random_unit(Pcg32& rng)
{
    const double z = 2.0 * rng.uniform() - 1.0;
    const double phi = 2.0 * kPi * rng.uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

// Simpson quadrature of 2pi * f(z) * Y_l0(z) over z in [-1, 1].
double zonal_projection(int l, const std::function<double(double)>& f)
{
    const int n = 4096;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = -1.0 + 2.0 * i / n;
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 dir(s, 0.0, z);
        const double y = sh_basis(dir, l)[sh_index(l, 0)];
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * f(z) * y;
    }
    return 2.0 * kPi * sum * (2.0 / n) / 3.0;
}

} // namespace

TEST_CASE("band-0 value is the analytic constant")
{
    const double y00 = 1.0 / (2.0 * std::sqrt(kPi));
    Pcg32 rng(1, 0);
    for (int i = 0; i < 10; ++i) {
        const auto y = sh_basis(random_unit(rng), 0);
        CHECK(y[0] == doctest::Approx(y00).epsilon(1e-12));
    }
    CHECK(y00 == doctest::Approx(0.2820948).epsilon(1e-6));
}

TEST_CASE("band-1 values at +z")
{
    const auto y = sh_basis(Vec3(0, 0, 1), 1);
    CHECK(y[sh_index(1, 0)] == doctest::Approx(std::sqrt(3.0 / (4.0 * kPi))).epsilon(1e-12));
    CHECK(y[sh_index(1, -1)] == doctest::Approx(0.0));
    CHECK(y[sh_index(1, 1)] == doctest::Approx(0.0));
    CHECK(y[sh_index(1, 0)] == doctest::Approx(0.4886025).epsilon(1e-6));
}

TEST_CASE("non-unit direction is rejected")
{
    CHECK_THROWS(sh_basis(Vec3(0, 0, 2), 2));
}

TEST_CASE("monte carlo gram matrix is the identity")
{
    const int n = 10000;
    Pcg32 rng(77, 0);
    // accumulate first and second moments of 4pi * Y_a Y_b
    std::vector<double> sum(kNumCoeffs * kNumCoeffs, 0.0);
    std::vector<double> sumsq(kNumCoeffs * kNumCoeffs, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto y = sh_basis(random_unit(rng), kMaxBand);
        for (int a = 0; a < kNumCoeffs; ++a)
            for (int b = a; b < kNumCoeffs; ++b) {
                const double v = 4.0 * kPi * y[a] * y[b];
                sum[a * kNumCoeffs + b] += v;
                sumsq[a * kNumCoeffs + b] += v * v;
            }
    }
    int outliers = 0;
    for (int a = 0; a < kNumCoeffs; ++a)
        for (int b = a; b < kNumCoeffs; ++b) {
            const double mean = sum[a * kNumCoeffs + b] / n;
            const double var =
                (sumsq[a * kNumCoeffs + b] / n - mean * mean) / n;
            const double se = std::sqrt(std::max(var, 1e-30));
            const double expect = (a == b) ? 1.0 : 0.0;
            if (std::abs(mean - expect) > 3.0 * se)
                ++outliers;
        }
    // ~0.3% of 3321 entries exceed 3 SE by chance; allow that tail.
    CHECK(outliers < 34);
}

TEST_CASE("band-1 triple is a fixed linear map of the direction")
{
    const double c = std::sqrt(3.0 / (4.0 * kPi));
    Pcg32 rng(5, 1);
    for (int i = 0; i < 100; ++i) {
        const Vec3 d = random_unit(rng);
        const auto y = sh_basis(d, 1);
        CHECK(y[sh_index(1, -1)] == doctest::Approx(c * d.y()).epsilon(1e-10));
        CHECK(y[sh_index(1, 0)] == doctest::Approx(c * d.z()).epsilon(1e-10));
        CHECK(y[sh_index(1, 1)] == doctest::Approx(c * d.x()).epsilon(1e-10));
    }
}

TEST_CASE("light truncation zeroes high bands and is idempotent")
{
    ShLight light;
    for (int i = 0; i < kNumCoeffs; ++i)
        light.coeffs.row(i) = Vec3(i + 1.0, -i * 0.5, 0.25 * i).transpose();
    const ShLight t3 = light.truncated(3);
    for (int l = 0; l <= kMaxBand; ++l)
        for (int m = -l; m <= l; ++m) {
            const int k = sh_index(l, m);
            if (l >= 3)
                CHECK(t3.coeffs.row(k).norm() == 0.0);
            else
                CHECK(t3.coeffs.row(k) == light.coeffs.row(k));
        }
    CHECK(t3.truncated(3).coeffs == t3.coeffs);
}

TEST_CASE("clamped cosine coefficients match a quadrature oracle")
{
    const auto a = clamped_cosine_coeffs(kMaxBand);
    REQUIRE(a.size() == size_t(kMaxBand + 1));
    for (int l = 0; l <= kMaxBand; ++l) {
        const double ref =
            zonal_projection(l, [](double z) { return std::max(z, 0.0); });
        CHECK(a[l] == doctest::Approx(ref).epsilon(1e-6).scale(1.0));
    }
    CHECK(std::abs(a[3]) < 1e-9);
    CHECK(std::abs(a[5]) < 1e-9);
    CHECK(std::abs(a[7]) < 1e-9);
    // even bands l >= 2 alternate in sign and decay
    CHECK(a[2] > 0.0);
    CHECK(a[4] < 0.0);
    CHECK(a[6] > 0.0);
    CHECK(std::abs(a[4]) < std::abs(a[2]));
    CHECK(std::abs(a[6]) < std::abs(a[4]));
}

TEST_CASE("specular lobe coefficients match quadrature and sharpen with roughness")
{
    // the GGX peak has width ~alpha in polar angle, so a dense Simpson rule
    // in theta resolves it where a uniform grid in z = cos(theta) cannot:
    // 2pi int_0^(pi/2) ggx(cos) cos Y_l0(cos) sin dtheta
    auto ggx_zonal = [](int l, double r) {
        const int n = 1 << 17;
        const double h = (kPi / 2.0) / n;
        double sum = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double theta = i * h;
            const double z = std::cos(theta), s = std::sin(theta);
            const double y = sh_basis(Vec3(s, 0.0, z), l)[sh_index(l, 0)];
            const double simp = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            sum += simp * ggx_ndf(r, z) * z * y * s;
        }
        return 2.0 * kPi * sum * h / 3.0;
    };
    for (double r : {0.1, 0.4, 1.0}) {
        const auto s = specular_lobe_coeffs(r, kMaxBand);
        CHECK(s[0] > 0.0);
        for (int l = 0; l <= kMaxBand; ++l)
            CHECK(s[l] == doctest::Approx(ggx_zonal(l, r)).epsilon(1e-4).scale(s[0]));
    }
    const auto narrow = specular_lobe_coeffs(0.1, kMaxBand);
    const auto broad = specular_lobe_coeffs(1.0, kMaxBand);
    CHECK(narrow[8] / narrow[0] > broad[8] / broad[0]);
    CHECK(broad[8] / broad[0] < 0.05);
    CHECK(narrow[8] / narrow[0] > 0.2);
}
