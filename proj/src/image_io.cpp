#include "splatgeo/image.hpp"

#include "splatgeo/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace splatgeo {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream msg;
        msg << what << ": " << a.width() << "x" << a.height() << "x" << a.channels() << " vs "
            << b.width() << "x" << b.height() << "x" << b.channels();
        throw Error(ErrorCode::ShapeMismatch, msg.str());
    }
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    if (!in || channels == 0 || width <= 0 || height <= 0 || scale == 0.0)
        throw Error(ErrorCode::MalformedHeader, "bad PFM header in " + path.string());
    if (scale > 0.0) throw Error(ErrorCode::MalformedHeader, "big-endian PFM not supported: " + path.string());

    Image image(width, height, channels);
    std::vector<float> row(static_cast<std::size_t>(width) * channels);
    // PFM stores rows bottom-to-top.
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw Error(ErrorCode::MalformedHeader, "truncated PFM " + path.string());
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) image.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c];
    }
    return image;
}

void write_pfm(const Image& image, const std::filesystem::path& path) {
    if (image.channels() != 1 && image.channels() != 3)
        throw Error(ErrorCode::InvalidArgument, "PFM needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << (image.channels() == 3 ? "PF" : "Pf") << "\n" << image.width() << " " << image.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(image.width()) * image.channels());
    for (int y = image.height() - 1; y >= 0; --y) {
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c)
                row[static_cast<std::size_t>(x) * image.channels() + c] = static_cast<float>(image.at(x, y, c));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw Error(ErrorCode::IoFailure, "write failed " + path.string());
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw Error(ErrorCode::IoFailure, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::MalformedHeader, "invalid PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buffer(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    // Alpha channels are dropped; gray+alpha becomes gray.
    const int out_channels = (channels >= 3) ? 3 : 1;
    Image image(width, height, out_channels);
    const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < out_channels; ++c) {
                const std::size_t i = static_cast<std::size_t>(x) * channels + c;
                double v;
                if (bit_depth == 16) {
                    std::uint16_t s;
                    std::memcpy(&s, rows[y] + 2 * i, 2);
                    v = s;
                } else {
                    v = rows[y][i];
                }
                image.at(x, y, c) = v / max_value;
            }
        }
    }
    return image;
}

void write_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::InvalidArgument, "PNG bit depth must be 8 or 16");
    if (image.channels() != 1 && image.channels() != 3)
        throw Error(ErrorCode::InvalidArgument, "PNG needs 1 or 3 channels");
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw Error(ErrorCode::IoFailure, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoFailure, "PNG encode failed " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width(), image.height(), bit_depth,
                 image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const int bytes = bit_depth / 8;
    const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * image.channels() * bytes);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                const auto q = static_cast<std::uint16_t>(std::lround(v * max_value));
                const std::size_t i = (static_cast<std::size_t>(x) * image.channels() + c) * bytes;
                if (bytes == 2) std::memcpy(&row[i], &q, 2);
                else row[i] = static_cast<unsigned char>(q);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_mask_png(const std::filesystem::path& path) {
    Image raw = read_png(path);
    Image mask(raw.width(), raw.height(), 1);
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x)
            mask.at(x, y) = raw.at(x, y, 0) * 255.0 >= 128.0 ? 1.0 : 0.0;
    return mask;
}

Image read_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pfm") return read_pfm(path);
    if (ext == ".png") return read_png(path);
    throw Error(ErrorCode::InvalidArgument, "unsupported image extension: " + path.string());
}

} // namespace splatgeo
