#pragma once

#include "cowpose/constraint_model.hpp"
#include "cowpose/grouping.hpp"
#include "cowpose/sequence_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cowpose {

// Pipeline parameters shared by the subcommands. Loaded from a JSON file
// (unknown keys rejected), then overridden by command-line flags.
struct RunConfig {
    std::string model;
    std::string input;
    std::string output;
    int nms_radius = kDefaultNmsRadius;
    double nms_threshold = kDefaultNmsThreshold;
    double bandwidth_factor = 0.25;
    int median_window = 5;
    double gate_factor = 0.5;
    double theta_factor = 0.35;
    double leghoof_threshold = 30.0;
    double fps = 12.0;
    int workers = 1;
    std::optional<std::uint64_t> seed;

    DetectParams detect_params() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& doc);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct CmapFrameFiles {
    std::uint64_t frame = 0;
    std::filesystem::path color;
    std::filesystem::path diff;
};

// Frame files of a directory in index order. Throws when the directory holds no
// frames, when a stream is missing for a frame, or when indices have gaps.
std::vector<CmapFrameFiles> list_cmap_frames(const std::filesystem::path& dir);

struct FrameDetections {
    std::int64_t frame = 0;
    std::vector<CowSkeleton> cows;
};

// Tracking and temporal filtering of per-frame detections given in increasing
// frame order. The result carries track ids, the effective config and a
// per-track summary.
Sequence track_sequence(const ConstraintModel& model, const std::vector<FrameDetections>& frames,
                        const RunConfig& config, std::ostream* log = nullptr);

// Per-frame detection followed by track_sequence. The result carries track
// ids, the effective config and a per-track summary.
Sequence detect_sequence(const ConstraintModel& model, const std::vector<CmapFrameFiles>& frames,
                         const RunConfig& config, std::ostream* log = nullptr);

// Entry point of the `cowpose` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cowpose
