#include "facetrace/eval_image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "facetrace/geom.hpp"
#include "facetrace/parallel.hpp"

namespace facetrace {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kSigma = 1.5;

bool mask_in(const Image& mask, int x, int y)
{
    return mask.empty() || mask.at(x, y, 0) > 0.5f;
}

std::vector<double> to_luminance(const Image& img)
{
    std::vector<double> lum(static_cast<size_t>(img.width()) * img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double v;
            if (img.channels() >= 3)
                v = luminance(Vec3(img.at(x, y, 0), img.at(x, y, 1),
                                   img.at(x, y, 2)));
            else
                v = img.at(x, y, 0);
            lum[static_cast<size_t>(y) * img.width() + x] = v;
        }
    return lum;
}

void check_shapes(const Image& a, const Image& b, const Image& mask)
{
    if (!a.same_shape(b))
        throw std::invalid_argument("dimension mismatch");
    if (!mask.empty() && (mask.width() != a.width() || mask.height() != a.height()))
        throw std::invalid_argument("dimension mismatch: mask");
}

} // namespace

double ssim(const Image& a, const Image& b, const Image& mask, double peak)
{
    check_shapes(a, b, mask);
    const int w = a.width(), h = a.height();
    const std::vector<double> la = to_luminance(a);
    const std::vector<double> lb = to_luminance(b);

    double gauss[kWin][kWin];
    for (int dy = -kHalf; dy <= kHalf; ++dy)
        for (int dx = -kHalf; dx <= kHalf; ++dx)
            gauss[dy + kHalf][dx + kHalf] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));

    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    std::vector<double> row_sum(h, 0.0);
    std::vector<long long> row_count(h, 0);
    parallel_for(0, h, worker_count(0), [&](int begin, int end) {
        for (int y = begin; y < end; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!mask_in(mask, x, y))
                    continue;
                double wsum = 0.0, mx = 0.0, my = 0.0;
                double sxx = 0.0, syy = 0.0, sxy = 0.0;
                for (int dy = -kHalf; dy <= kHalf; ++dy)
                    for (int dx = -kHalf; dx <= kHalf; ++dx) {
                        const int px = x + dx, py = y + dy;
                        if (px < 0 || px >= w || py < 0 || py >= h ||
                            !mask_in(mask, px, py))
                            continue;
                        const double g = gauss[dy + kHalf][dx + kHalf];
                        const double va = la[static_cast<size_t>(py) * w + px];
                        const double vb = lb[static_cast<size_t>(py) * w + px];
                        wsum += g;
                        mx += g * va;
                        my += g * vb;
                        sxx += g * va * va;
                        syy += g * vb * vb;
                        sxy += g * va * vb;
                    }
                mx /= wsum;
                my /= wsum;
                sxx = sxx / wsum - mx * mx;
                syy = syy / wsum - my * my;
                sxy = sxy / wsum - mx * my;
                const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
                const double den =
                    (mx * mx + my * my + c1) * (sxx + syy + c2);
                row_sum[y] += num / den;
                ++row_count[y];
            }
        }
    });

    double total = 0.0;
    long long count = 0;
    for (int y = 0; y < h; ++y) {
        total += row_sum[y];
        count += row_count[y];
    }
    if (count == 0)
        throw std::invalid_argument("empty mask");
    return total / static_cast<double>(count);
}

PsnrResult psnr(const Image& a, const Image& b, const Image& mask, double peak)
{
    check_shapes(a, b, mask);
    double se = 0.0;
    long long n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            if (!mask_in(mask, x, y))
                continue;
            for (int c = 0; c < a.channels(); ++c) {
                const double d = static_cast<double>(a.at(x, y, c)) -
                                 static_cast<double>(b.at(x, y, c));
                se += d * d;
                ++n;
            }
        }
    if (n == 0)
        throw std::invalid_argument("empty mask");
    PsnrResult out;
    const double mse = se / static_cast<double>(n);
    if (mse == 0.0) {
        out.infinite = true;
        return out;
    }
    out.db = 10.0 * std::log10(peak * peak / mse);
    return out;
}

void save_image_report(const ImageMetricsReport& report, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("io-error: cannot open " + path);
    out << "layer,ssim,psnr_db,psnr_infinite\n";
    char buf[160];
    for (const auto& [name, m] : report.layers) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%d\n", name.c_str(),
                      m.ssim, m.psnr_db, m.psnr_infinite ? 1 : 0);
        out << buf;
    }
    if (!report.mask_description.empty())
        out << "# mask: " << report.mask_description << '\n';
}

} // namespace facetrace
