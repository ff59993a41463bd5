#include "png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace hfid {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

} // namespace

void write_png(const Tensor& image, const std::string& path) {
    const Dims& d = image.dims();
    if (d.n != 1 || (d.c != 3 && d.c != 4))
        raise(ErrorCode::ShapeMismatch, "write_png expects (1,3,h,w) or (1,4,h,w)");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        raise(ErrorCode::Io, "cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "libpng write failed: " + path);
    }
    png_init_io(png, fp.get());
    int color = d.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, static_cast<png_uint_32>(d.w), static_cast<png_uint_32>(d.h), 8,
                 color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(d.w * d.c));
    int64_t plane = d.h * d.w;
    for (int64_t y = 0; y < d.h; ++y) {
        for (int64_t x = 0; x < d.w; ++x)
            for (int64_t c = 0; c < d.c; ++c) {
                float v = image.data()[c * plane + y * d.w + x];
                row[static_cast<size_t>(x * d.c + c)] = static_cast<png_byte>(
                    std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        raise(ErrorCode::Io, "cannot open for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Io, "libpng read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    png_size_t rowbytes = png_get_rowbytes(png, info);
    int channels = static_cast<int>(rowbytes / w);
    if (channels != 3 && channels != 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Io, "unsupported png channel count in " + path);
    }

    std::vector<png_byte> data(static_cast<size_t>(rowbytes) * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = data.data() + static_cast<size_t>(y) * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor out(Dims{1, channels, h, w});
    int64_t plane = static_cast<int64_t>(h) * w;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < channels; ++c)
                out.data()[c * plane + y * w + x] =
                    static_cast<float>(data[static_cast<size_t>((y * w + x) * channels + c)]) /
                    255.0f;
    return out;
}

} // namespace hfid
