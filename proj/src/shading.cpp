#include "facetrace/shading.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace facetrace {

namespace {

double convolution_factor(int l)
{
    return std::sqrt(4.0 * kPi / (2.0 * l + 1.0));
}

} // namespace

std::vector<double> diffuse_band_weights(int max_band)
{
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(max_band);
    if (it == cache.end()) {
        std::vector<double> w = clamped_cosine_coeffs(max_band);
        for (int l = 0; l <= max_band; ++l)
            w[l] *= convolution_factor(l) / kPi;
        it = cache.emplace(max_band, std::move(w)).first;
    }
    return it->second;
}

std::vector<double> specular_band_weights(double roughness, int max_band)
{
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(roughness, max_band);
    auto it = cache.find(key);
    if (it == cache.end()) {
        std::vector<double> w = specular_lobe_coeffs(roughness, max_band);
        for (int l = 0; l <= max_band; ++l)
            w[l] *= convolution_factor(l);
        it = cache.emplace(key, std::move(w)).first;
    }
    return it->second;
}

Vec3 vertex_irradiance_diffuse(const ShLight& light, const Vec3& normal,
                               const Vec3& diffuse_albedo, int max_band)
{
    auto r = sh_convolved_radiance(light, diffuse_band_weights(max_band),
                                   TVec3<double>(normal));
    return Vec3(r[0], r[1], r[2]).cwiseMax(0.0).cwiseProduct(diffuse_albedo);
}

Vec3 vertex_irradiance_specular(const ShLight& light, const Vec3& reflection,
                                double roughness, int max_band)
{
    auto r = sh_convolved_radiance(light, specular_band_weights(roughness, max_band),
                                   TVec3<double>(reflection));
    return Vec3(r[0], r[1], r[2]).cwiseMax(0.0);
}

Vec3 vertex_irradiance(const ShLight& light, const Vec3& normal,
                       const Vec3& diffuse_albedo, const Vec3& specular_albedo,
                       const Vec3& view, double roughness, int max_band)
{
    const Vec3 r = reflect(view, normal);
    const Vec3 bd = vertex_irradiance_diffuse(light, normal, diffuse_albedo, max_band);
    const Vec3 bs = vertex_irradiance_specular(light, r, roughness, max_band);
    const double s = std::clamp(luminance(specular_albedo), 0.0, 1.0);
    return (1.0 - s) * bd + s * bs;
}

} // namespace facetrace
