#pragma once

#include "cowpose/joints.hpp"
#include "cowpose/skeleton.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cowpose {

// Seventeen dense score planes for one frame of one stream, stored plane-major,
// rows top to bottom.
struct ConfidenceMapStack {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    Stream stream = Stream::color;
    std::uint64_t frame_index = 0;
    std::vector<float> data;

    ConfidenceMapStack() = default;
    ConfidenceMapStack(std::uint32_t w, std::uint32_t h, Stream s, std::uint64_t frame);

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    std::span<float> plane(JointId j) { return {data.data() + index(j) * plane_size(), plane_size()}; }
    std::span<const float> plane(JointId j) const { return {data.data() + index(j) * plane_size(), plane_size()}; }
    float at(JointId j, std::uint32_t x, std::uint32_t y) const {
        return data[index(j) * plane_size() + static_cast<std::size_t>(y) * width + x];
    }

    friend bool operator==(const ConfidenceMapStack&, const ConfidenceMapStack&) = default;
};

// Single-channel intensity image with values in [0, 1].
struct GrayFrame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> pixels;

    float at(std::uint32_t x, std::uint32_t y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr std::size_t kCmapHeaderSize = 28;

// CMAP v1: "CMAP", u8 version, u8 stream, u16 padding, u32 width, u32 height,
// u32 joints (=17), u64 frame index, then 17 float32 planes. Little-endian.
std::vector<std::uint8_t> encode_cmap(const ConfidenceMapStack& stack);
ConfidenceMapStack decode_cmap(std::span<const std::uint8_t> bytes);

// Scores are clamped to [0, 1] (NaN becomes 0) on write.
void write_cmap(const ConfidenceMapStack& stack, const std::filesystem::path& path);
ConfidenceMapStack read_cmap(const std::filesystem::path& path);

// frame_%06d.color.cmap / frame_%06d.diff.cmap
std::string cmap_filename(std::uint64_t frame_index, Stream stream);

// Binary PGM (P5), 8 or 16 bit.
GrayFrame read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayFrame& frame, const std::filesystem::path& path);

// Per pixel clamp(|cur - prev| + |cur - next|, 0, 1).
GrayFrame frame_difference(const GrayFrame& prev, const GrayFrame& cur, const GrayFrame& next);

// Upper-body planes hold max(color, diff). Leg-hoof planes hold the color plane;
// the diff plane is kept alongside so extraction can fall back to it when the
// color plane yields no candidate.
struct MergedMaps {
    ConfidenceMapStack stack;
    std::array<std::vector<float>, kJointCount> fallback;

    bool has_fallback(JointId j) const { return !fallback[index(j)].empty(); }
};

MergedMaps merge_maps(const ConfidenceMapStack& color, const ConfidenceMapStack& diff);

inline constexpr int kDefaultNmsRadius = 5;
inline constexpr double kDefaultNmsThreshold = 0.1;

struct PlanePeak {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    float score = 0.0f;
};

// Peaks of one plane: score > threshold and no pixel of the (2r+1)^2 window
// scores higher; equal scores keep the lexicographically smallest (y, x); a
// window that is entirely flat yields nothing. Sorted by (y, x).
std::vector<PlanePeak> nms_plane(std::span<const float> plane, std::uint32_t width, std::uint32_t height, int radius,
                                 double threshold);

// Peaks of every plane as candidates, sorted by (joint, y, x).
std::vector<KeypointCandidate> nms_extract(const ConfidenceMapStack& stack, int radius = kDefaultNmsRadius,
                                           double threshold = kDefaultNmsThreshold);

// Merged-map extraction: upper body from the merged planes, leg-hoof from the
// color planes unless a color plane yields nothing, in which case its diff plane.
std::vector<KeypointCandidate> extract_candidates(const MergedMaps& maps, int radius = kDefaultNmsRadius,
                                                  double threshold = kDefaultNmsThreshold);

} // namespace cowpose
