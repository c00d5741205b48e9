#include "airm/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "airm/common.hpp"
#include "airm/kernels.hpp"

namespace airm::img {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t quantize(float v) {
    const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return uint8_t(std::lround(c * 255.f));
}

}  // namespace

void save_png(const TensorF& plane, const std::string& path) {
    int channels, H, W;
    if (plane.ndim() == 2) {
        channels = 1;
        H = plane.dim(0);
        W = plane.dim(1);
    } else if (plane.ndim() == 3 && plane.dim(0) == 3) {
        channels = 3;
        H = plane.dim(1);
        W = plane.dim(2);
    } else {
        throw IoError("save_png: expected [H,W] or [3,H,W], got " +
                      plane.shape_str());
    }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("save_png: cannot open " + path);

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("save_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("save_png: libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: write failed for " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, png_uint_32(W), png_uint_32(H), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(size_t(W) * channels);
    for (int y = 0; y < H; ++y) {
        if (channels == 1) {
            for (int x = 0; x < W; ++x) row[x] = quantize(plane.at(y, x));
        } else {
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < 3; ++c)
                    row[size_t(x) * 3 + c] = quantize(plane.at(c, y, x));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

TensorF load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("load_png: cannot open " + path);

    uint8_t header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw IoError("load_png: not a PNG file: " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("load_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("load_png: libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_png: corrupt PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int W = int(png_get_image_width(png, info));
    const int H = int(png_get_image_height(png, info));
    const int channels = int(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_png: unsupported channel count " +
                      std::to_string(channels) + " in " + path);
    }

    std::vector<uint8_t> row(size_t(W) * channels);
    TensorF out(channels == 1 ? std::vector<int>{H, W}
                              : std::vector<int>{3, H, W});
    for (int y = 0; y < H; ++y) {
        png_read_row(png, row.data(), nullptr);
        if (channels == 1) {
            for (int x = 0; x < W; ++x) out.at(y, x) = float(row[x]) / 255.f;
        } else {
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < 3; ++c)
                    out.at(c, y, x) = float(row[size_t(x) * 3 + c]) / 255.f;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

namespace {

TensorF resize_with(const TensorF& t, int H2, int W2,
                    void (*fn)(const float*, float*, int, int, int, int, int)) {
    if (t.ndim() == 2) {
        TensorF out({H2, W2});
        fn(t.data(), out.data(), 1, t.dim(0), t.dim(1), H2, W2);
        return out;
    }
    TensorF out({t.dim(0), H2, W2});
    fn(t.data(), out.data(), t.dim(0), t.dim(1), t.dim(2), H2, W2);
    return out;
}

}  // namespace

TensorF resize_bilinear(const TensorF& t, int H2, int W2) {
    return resize_with(t, H2, W2, &kern::resize_bilinear<float>);
}

TensorF resize_nearest(const TensorF& t, int H2, int W2) {
    return resize_with(t, H2, W2, &kern::resize_nearest<float>);
}

TensorF binarize(const TensorF& mask, float threshold) {
    TensorF out(mask.shape());
    for (int64_t i = 0; i < mask.numel(); ++i)
        out[i] = mask[i] >= threshold ? 1.f : 0.f;
    return out;
}

}  // namespace airm::img
