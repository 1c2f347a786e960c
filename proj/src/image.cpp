#include "facetrace/image.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include <png.h>

namespace facetrace {

namespace {

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& msg)
{
    throw std::runtime_error(msg);
}

} // namespace

float linear_to_srgb(float v)
{
    v = std::clamp(v, 0.0f, 1.0f);
    return v <= 0.0031308f ? 12.92f * v
                           : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

float srgb_to_linear(float v)
{
    return v <= 0.04045f ? v / 12.92f
                         : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

Image load_pfm(const std::string& path)
{
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail("cannot open PFM file: " + path);
    char tag[3] = {};
    if (std::fscanf(f.get(), "%2s", tag) != 1) fail("bad PFM header: " + path);
    int channels;
    if (std::strcmp(tag, "PF") == 0) channels = 3;
    else if (std::strcmp(tag, "Pf") == 0) channels = 1;
    else fail("not a PFM file: " + path);
    int w, h;
    double scale;
    if (std::fscanf(f.get(), "%d %d %lf", &w, &h, &scale) != 3 || w <= 0 || h <= 0)
        fail("bad PFM dimensions: " + path);
    std::fgetc(f.get()); // single whitespace before the raster
    if (scale > 0) fail("big-endian PFM not supported: " + path);

    Image img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) { // PFM rows are bottom-up
        if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            fail("truncated PFM raster: " + path);
        std::memcpy(&img.at(0, y, 0), row.data(), row.size() * sizeof(float));
    }
    return img;
}

void save_pfm(const Image& img, const std::string& path)
{
    if (img.channels() != 1 && img.channels() != 3)
        fail("PFM supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail("cannot write PFM file: " + path);
    std::fprintf(f.get(), "%s\n%d %d\n-1.0\n",
                 img.channels() == 3 ? "PF" : "Pf", img.width(), img.height());
    const size_t row_len = static_cast<size_t>(img.width()) * img.channels();
    for (int y = img.height() - 1; y >= 0; --y)
        if (std::fwrite(img.data() + static_cast<size_t>(y) * row_len, sizeof(float),
                        row_len, f.get()) != row_len)
            fail("short write: " + path);
}

Image load_png(const std::string& path, bool keep_encoded)
{
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail("cannot open PNG file: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("PNG decode failed: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int w = png_get_image_width(png, info);
    const int h = png_get_image_height(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unsupported PNG channel count: " + path);
    }
    std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
    Image img(w, h, channels);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                float v = row[static_cast<size_t>(x) * channels + c] / 255.0f;
                img.at(x, y, c) = keep_encoded ? v : srgb_to_linear(v);
            }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const Image& img, const std::string& path)
{
    if (img.channels() != 1 && img.channels() != 3)
        fail("PNG export supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail("cannot write PNG file: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("PNG encode failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(static_cast<size_t>(img.width()) * img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                row[static_cast<size_t>(x) * img.channels() + c] =
                    static_cast<uint8_t>(std::lround(255.0f * linear_to_srgb(img.at(x, y, c))));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image load_image(const std::string& path)
{
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == "pfm") return load_pfm(path);
    if (ext == "png") return load_png(path);
    fail("unknown image extension: " + path);
}

} // namespace facetrace
