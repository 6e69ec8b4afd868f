#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace splatgeo {

// Row-major, interleaved-channel image with double samples. Row 0 is the top
// of the picture.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

void require_same_shape(const Image& a, const Image& b, const char* what);

// Portable float map, 1 or 3 channels, little-endian.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const Image& image, const std::filesystem::path& path);

// PNG samples are mapped to [0, 1]. bit_depth is 8 or 16; values are clamped.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path, int bit_depth = 8);

// Single-channel binary mask from a PNG, thresholded at 128 (8-bit scale).
Image read_mask_png(const std::filesystem::path& path);

// Reads .pfm or .png by extension.
Image read_image(const std::filesystem::path& path);

} // namespace splatgeo
