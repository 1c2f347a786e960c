#pragma once

#include <map>
#include <string>

#include "facetrace/image.hpp"

namespace facetrace {

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5),
// C1 = (0.01 L)^2, C2 = (0.03 L)^2, computed on luminance. A window counts
// when its center pixel is inside the mask; window weights are renormalized
// over in-mask taps so content outside the mask never contributes. An empty
// mask image means all pixels.
double ssim(const Image& a, const Image& b, const Image& mask = Image(),
            double peak = 1.0);

struct PsnrResult {
    double db = 0.0;
    bool infinite = false; // MSE exactly zero inside the mask
};

// 10 log10(L^2 / MSE) over masked pixels, all channels pooled.
PsnrResult psnr(const Image& a, const Image& b, const Image& mask = Image(),
                double peak = 1.0);

struct LayerMetrics {
    double ssim = 0.0;
    double psnr_db = 0.0;
    bool psnr_infinite = false;
};

struct ImageMetricsReport {
    std::map<std::string, LayerMetrics> layers;
    std::string mask_description;
};

// CSV: layer,ssim,psnr_db,psnr_infinite
void save_image_report(const ImageMetricsReport& report, const std::string& path);

} // namespace facetrace
