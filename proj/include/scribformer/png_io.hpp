#pragma once

// Minimal grayscale/RGB PNG I/O on top of libpng's simplified API.

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "scribformer/error.hpp"

namespace scribformer::png {

struct GrayImage {
    int width = 0;
    int height = 0;
    int bit_depth = 8;              // 8 or 16
    std::vector<std::uint16_t> data; // row-major, raw sample values
};

inline GrayImage read_gray(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw IoError("cannot read PNG '" + path.string() + "': " + img.message);

    GrayImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    const size_t n = static_cast<size_t>(img.width) * img.height;
    if (img.format & PNG_FORMAT_FLAG_LINEAR) {
        out.bit_depth = 16;
        img.format = PNG_FORMAT_LINEAR_Y;
        std::vector<png_uint_16> buf(n);
        if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
            throw IoError("cannot decode PNG '" + path.string() + "': " + img.message);
        out.data.assign(buf.begin(), buf.end());
    } else {
        out.bit_depth = 8;
        img.format = PNG_FORMAT_GRAY;
        std::vector<png_byte> buf(n);
        if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
            throw IoError("cannot decode PNG '" + path.string() + "': " + img.message);
        out.data.assign(buf.begin(), buf.end());
    }
    png_image_free(&img);
    return out;
}

namespace detail {
inline void write(const std::filesystem::path& path, int width, int height, png_uint_32 format,
                  const void* buffer) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = format;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer, 0, nullptr))
        throw IoError("cannot write PNG '" + path.string() + "': " + img.message);
}
} // namespace detail

inline void write_gray8(const std::filesystem::path& path, int width, int height,
                        const std::vector<std::uint8_t>& data) {
    detail::write(path, width, height, PNG_FORMAT_GRAY, data.data());
}

inline void write_gray16(const std::filesystem::path& path, int width, int height,
                         const std::vector<std::uint16_t>& data) {
    detail::write(path, width, height, PNG_FORMAT_LINEAR_Y, data.data());
}

/// data holds width*height*3 interleaved RGB bytes.
inline void write_rgb8(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& data) {
    detail::write(path, width, height, PNG_FORMAT_RGB, data.data());
}

} // namespace scribformer::png
