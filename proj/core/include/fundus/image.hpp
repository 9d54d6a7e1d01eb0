#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fundus/tensor.hpp"

namespace fundus {

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // interleaved RGB, row-major

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h);

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t channel) {
        return pixels[(y * width + x) * 3 + channel];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t channel) const {
        return pixels[(y * width + x) * 3 + channel];
    }

    // [1,3,H,W] scaled to [0,1]
    Tensor to_tensor() const;
};

// Mask pixels keep the on-disk convention directly.
constexpr std::uint8_t kCupPixel = 0;
constexpr std::uint8_t kRimPixel = 128;
constexpr std::uint8_t kBackgroundPixel = 255;

struct LabelMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // values in {0,128,255}

    LabelMask() = default;
    LabelMask(std::size_t w, std::size_t h); // all background

    std::uint8_t& at(std::size_t y, std::size_t x) {
        return pixels[y * width + x];
    }
    std::uint8_t at(std::size_t y, std::size_t x) const {
        return pixels[y * width + x];
    }

    bool operator==(const LabelMask&) const = default;
};

// Binary PPM "P6" with maxval 255; lossless round trip.
RgbImage read_ppm(const std::string& path);
void write_ppm(const RgbImage& image, const std::string& path);

// Binary PGM "P5"; any value outside {0,128,255} is FormatCorrupt.
LabelMask read_pgm(const std::string& path);
void write_pgm(const LabelMask& mask, const std::string& path);

} // namespace fundus
