#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace facetrace {

// Row-major float image, row 0 at the top. Linear radiance unless stated
// otherwise at the call site.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f)
        : w_(width), h_(height), c_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill)
    {
    }

    int width() const { return w_; }
    int height() const { return h_; }
    int channels() const { return c_; }
    bool empty() const { return data_.empty(); }

    float& at(int x, int y, int ch = 0)
    {
        return data_[(static_cast<size_t>(y) * w_ + x) * c_ + ch];
    }
    float at(int x, int y, int ch = 0) const
    {
        return data_[(static_cast<size_t>(y) * w_ + x) * c_ + ch];
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    size_t size() const { return data_.size(); }

    bool same_shape(const Image& o) const
    {
        return w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
    }

private:
    int w_ = 0, h_ = 0, c_ = 0;
    std::vector<float> data_;
};

// PFM: "PF" (rgb) / "Pf" (gray), little-endian, rows stored bottom-up.
Image load_pfm(const std::string& path);
void save_pfm(const Image& img, const std::string& path);

// 8-bit PNG. save_png applies the sRGB transfer curve; load_png inverts it
// unless `keep_encoded` is set (used for masks).
Image load_png(const std::string& path, bool keep_encoded = false);
void save_png(const Image& img, const std::string& path);

float linear_to_srgb(float v);
float srgb_to_linear(float v);

// Loads PFM or PNG based on the file extension.
Image load_image(const std::string& path);

} // namespace facetrace
