#pragma once

#include "cowpose/sequence_io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cowpose {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels; // RGB, row-major

    RgbImage(std::uint32_t w, std::uint32_t h);
    void set(long x, long y, Rgb color); // ignores out-of-range pixels
    Rgb get(std::uint32_t x, std::uint32_t y) const;
};

void draw_line(RgbImage& img, Vec2 a, Vec2 b, Rgb color);
void draw_disc(RgbImage& img, Vec2 c, double radius, Rgb color);
void draw_ring(RgbImage& img, Vec2 c, double radius, Rgb color);

Rgb track_color(std::optional<int> track_id);

// Body contour in green, limbs and joints in the track color; predicted joints
// are drawn hollow.
RgbImage render_frame(const SequenceFrame& frame, std::uint32_t width, std::uint32_t height);
std::string render_svg(const SequenceFrame& frame, std::uint32_t width, std::uint32_t height);

// Binary PPM (P6).
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

} // namespace cowpose
