#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "corrdetect/common.hpp"
#include "corrdetect/types.hpp"

namespace corrdetect {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit-per-channel RGB raster, row-major.
class ImageRgb {
public:
    ImageRgb() = default;
    ImageRgb(int width, int height, Rgb fill = {0, 0, 0})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * 3) {
        if (width < 1 || height < 1) throw_data("ImageRgb: invalid dimensions");
        for (std::size_t i = 0; i < data_.size(); i += 3) {
            data_[i] = fill.r;
            data_[i + 1] = fill.g;
            data_[i + 2] = fill.b;
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    Rgb get(int x, int y) const {
        const std::size_t i = offset(x, y);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }

    void set(int x, int y, Rgb c) {
        const std::size_t i = offset(x, y);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    ImageDescriptor descriptor(const std::string& image_id) const {
        return ImageDescriptor{image_id, width_, height_, 3};
    }

    friend bool operator==(const ImageRgb&, const ImageRgb&) = default;

private:
    std::size_t offset(int x, int y) const {
        if (!in_bounds(x, y))
            throw_data("ImageRgb: pixel (" + std::to_string(x) + "," + std::to_string(y) + ") out of bounds");
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Zero-copy view of one segment's pixels inside a full image.
struct SegmentView {
    const ImageRgb* image = nullptr;
    int x0 = 0, y0 = 0, width = 0, height = 0;

    Rgb get(int sx, int sy) const { return image->get(x0 + sx, y0 + sy); }
};

inline SegmentView segment_view(const ImageRgb& img, const GridSpec& grid, SegmentIndex idx) {
    SegmentView v;
    v.image = &img;
    v.x0 = (idx.y - 1) * grid.seg_width_px;
    v.y0 = (idx.x - 1) * grid.seg_height_px;
    v.width = grid.seg_width_px;
    v.height = grid.seg_height_px;
    if (v.x0 + v.width > img.width() || v.y0 + v.height > img.height())
        throw_data("segment_view: segment exceeds image bounds");
    return v;
}

inline ImageRgb crop_segment(const ImageRgb& img, const GridSpec& grid, SegmentIndex idx) {
    const SegmentView v = segment_view(img, grid, idx);
    ImageRgb out(v.width, v.height);
    for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x) out.set(x, y, v.get(x, y));
    return out;
}

// ---- PPM (P6, maxval 255) ----

inline void save_ppm(const ImageRgb& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw_data("save_ppm: cannot open " + path);
    f << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data().data()), static_cast<std::streamsize>(img.data().size()));
    if (!f) throw_data("save_ppm: write failed for " + path);
}

inline ImageRgb load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data("load_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw_data("load_ppm: " + path + " is not a P6 PPM");
    auto next_token = [&f, &path]() {
        std::string tok;
        while (f >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(f, rest);
                continue;
            }
            return tok;
        }
        throw_data("load_ppm: truncated header in " + path);
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255) throw_data("load_ppm: only maxval 255 supported in " + path);
    f.get();  // single whitespace after header
    ImageRgb img(w, h);
    f.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.data().size()));
    if (f.gcount() != static_cast<std::streamsize>(img.data().size()))
        throw_data("load_ppm: truncated pixel data in " + path);
    return img;
}

// ---- PNG (8-bit RGB via libpng; other layouts converted on read) ----

inline ImageRgb load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw_data("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw_data("load_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw_data("load_png: decode error in " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    ImageRgb img(w, h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] = img.data().data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

inline void save_png(const ImageRgb& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw_data("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw_data("save_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw_data("save_png: encode error for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(img.data().data() + static_cast<std::size_t>(y) * img.width() * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// Loads by extension; reports exact stored dimensions.
inline ImageRgb load_image(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ppm") return load_ppm(path);
    if (ext == ".png") return load_png(path);
    throw_data("load_image: unsupported extension '" + ext + "' for " + path);
}

inline void save_image(const ImageRgb& img, const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ppm") return save_ppm(img, path);
    if (ext == ".png") return save_png(img, path);
    throw_data("save_image: unsupported extension '" + ext + "' for " + path);
}

}  // namespace corrdetect
