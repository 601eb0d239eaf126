#pragma once

#include "cowpose/skeleton.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cowpose {

struct SequenceFrame {
    std::int64_t frame = 0;
    std::vector<CowSkeleton> cows;
};

// Per-frame cow skeletons: detector output and ground-truth labels share this
// layout. `extra` carries additional top-level members (config echo, track
// summary) through a read/write round trip.
struct Sequence {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<SequenceFrame> frames;
    nlohmann::json extra = nlohmann::json::object();

    const SequenceFrame* find(std::int64_t frame) const;
};

nlohmann::json cow_to_json(const CowSkeleton& cow);
CowSkeleton cow_from_json(const nlohmann::json& doc, std::int64_t frame);

nlohmann::json sequence_to_json(const Sequence& seq);
Sequence sequence_from_json(const nlohmann::json& doc);

void save_sequence(const Sequence& seq, const std::filesystem::path& path);
Sequence load_sequence(const std::filesystem::path& path);

} // namespace cowpose
