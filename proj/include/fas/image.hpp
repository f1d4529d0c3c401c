#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fas {

/// Interleaved 8-bit RGB image.
struct ImageU8 {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // size = width * height * 3

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }
};

// Binary PPM (P6), the project's lossless on-disk image format.
ImageU8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageU8& img);

}  // namespace fas
