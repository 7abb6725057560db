// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vdds/errors.hpp"
#include "vdds/video.hpp"

namespace vdds {

namespace fs = std::filesystem;

/// 8-bit interleaved raster (gray or RGB).
struct RasterImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::string lower_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw InputError("cannot open " + path.string());
    return f;
}

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
    (void)png;
    throw InputError(std::string("png: ") + msg);
}

inline void png_warn(png_structp, png_const_charp) {}

inline RasterImage read_png(const fs::path& path) {
    FilePtr file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw InputError("png: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    RasterImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    if (img.channels != 1 && img.channels != 3) {
        throw InputError("png: unsupported channel count in " + path.string());
    }
    img.pixels.resize(img.width * img.height * img.channels);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return img;
}

inline void write_png(const fs::path& path, const RasterImage& img) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw InputError("png: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) {
        png_write_row(png, img.pixels.data() + y * img.width * img.channels);
    }
    png_write_end(png, nullptr);
}

inline RasterImage read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
            } else {
                t.push_back(c);
            }
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P6") throw InputError("unsupported netpbm type in " + path.string());
    RasterImage img;
    img.channels = magic == "P5" ? 1 : 3;
    try {
        img.width = std::stoul(token());
        img.height = std::stoul(token());
        const unsigned long maxval = std::stoul(token());
        if (maxval != 255) throw InputError("only 8-bit netpbm supported: " + path.string());
    } catch (const std::logic_error&) {
        throw InputError("malformed netpbm header in " + path.string());
    }
    img.pixels.resize(img.width * img.height * img.channels);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
        throw InputError("truncated netpbm data in " + path.string());
    }
    return img;
}

inline void write_pnm(const fs::path& path, const RasterImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

}  // namespace detail

inline bool is_frame_file(const fs::path& p) {
    const std::string ext = detail::lower_extension(p);
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

inline RasterImage read_image(const fs::path& path) {
    const std::string ext = detail::lower_extension(path);
    if (ext == ".png") return detail::read_png(path);
    if (ext == ".ppm" || ext == ".pgm") return detail::read_pnm(path);
    throw InputError("unsupported image format: " + path.string());
}

/// Writes by extension; .pgm/.ppm are chosen by channel count, anything else is PNG.
inline void write_image(const fs::path& path, const RasterImage& img) {
    const std::string ext = detail::lower_extension(path);
    if (ext == ".ppm" || ext == ".pgm") {
        detail::write_pnm(path, img);
    } else {
        detail::write_png(path, img);
    }
}

inline std::uint8_t quantize(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

/// One frame of a pixel video as an 8-bit raster.
inline RasterImage to_raster(const PixelVideo& video, std::size_t frame) {
    const Shape4& s = video.shape();
    if (s.channels != 1 && s.channels != 3) {
        throw ShapeError("only 1- or 3-channel frames can be written, got " + std::to_string(s.channels));
    }
    RasterImage img{s.width, s.height, s.channels, {}};
    img.pixels.resize(s.frame_size());
    for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
            for (std::size_t c = 0; c < s.channels; ++c)
                img.pixels[(y * s.width + x) * s.channels + c] = quantize(video.at(frame, c, y, x));
    return img;
}

struct FrameSequence {
    PixelVideo video;
    std::vector<std::string> names;
};

/// Frames in lexicographic file-name order, at most `limit`, scaled from 8-bit to [0, 1].
inline FrameSequence load_frames(const fs::path& dir, std::size_t limit = 32) {
    if (!fs::is_directory(dir)) throw InputError("frame directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (files.empty()) throw InputError("no frames (.png/.ppm/.pgm) in " + dir.string());
    if (limit == 0) throw ConfigError("frame limit must be >= 1");
    if (files.size() > limit) files.resize(limit);

    std::vector<RasterImage> images;
    images.reserve(files.size());
    for (const auto& f : files) images.push_back(read_image(f));

    const RasterImage& ref = images.front();
    std::string offenders;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& im = images[i];
        if (im.width != ref.width || im.height != ref.height || im.channels != ref.channels) {
            offenders += " " + files[i].filename().string() + "(" + std::to_string(im.width) + "x" +
                         std::to_string(im.height) + "x" + std::to_string(im.channels) + ")";
        }
    }
    if (!offenders.empty()) {
        throw InputError("frames differ from " + files.front().filename().string() + " (" +
                         std::to_string(ref.width) + "x" + std::to_string(ref.height) + "x" +
                         std::to_string(ref.channels) + "):" + offenders);
    }

    FrameSequence seq{PixelVideo(Shape4{images.size(), ref.channels, ref.height, ref.width}), {}};
    for (std::size_t n = 0; n < images.size(); ++n) {
        const auto& im = images[n];
        for (std::size_t y = 0; y < im.height; ++y)
            for (std::size_t x = 0; x < im.width; ++x)
                for (std::size_t c = 0; c < im.channels; ++c)
                    seq.video.at(n, c, y, x) =
                        static_cast<float>(im.pixels[(y * im.width + x) * im.channels + c]) / 255.0f;
        seq.names.push_back(files[n].filename().string());
    }
    return seq;
}

/// Writes frame i of `video` as dir/names[i].
inline void save_frames(const PixelVideo& video, const fs::path& dir, const std::vector<std::string>& names) {
    if (names.size() != video.frames()) throw InputError("save_frames: one name per frame required");
    fs::create_directories(dir);
    for (std::size_t n = 0; n < video.frames(); ++n) write_image(dir / names[n], to_raster(video, n));
}

/// Default frame names: frame_0000.png, frame_0001.png, ...
inline std::vector<std::string> numbered_names(std::size_t count, const std::string& ext = ".png") {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < count; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "frame_%04zu", i);
        names.push_back(buf + ext);
    }
    return names;
}

}  // namespace vdds
