#pragma once

#include "cowpose/geometry.hpp"
#include "cowpose/joints.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace cowpose {

enum class Stream : std::uint8_t { color = 0, diff = 1 };

enum class CandidateSource { color, diff, merged };

// A scored location for one joint in one frame.
struct KeypointCandidate {
    JointId joint = JointId::NOSE;
    Vec2 position;
    double confidence = 0.0;
    CandidateSource source = CandidateSource::merged;

    friend bool operator==(const KeypointCandidate&, const KeypointCandidate&) = default;
};

// Canonical ordering: joint, then row, then column.
bool canonical_less(const KeypointCandidate& a, const KeypointCandidate& b);

// `occluded` only appears in ground-truth labels: the position is known but the
// joint is hidden, so evaluation ignores it.
enum class JointStatus { detected, predicted, absent, occluded };

std::string_view status_name(JointStatus s);
std::optional<JointStatus> status_from_name(std::string_view name);

struct JointState {
    Vec2 position;
    double confidence = 0.0;
    JointStatus status = JointStatus::absent;

    bool present() const { return status != JointStatus::absent; }
    friend bool operator==(const JointState&, const JointState&) = default;
};

// One cow instance in one frame.
struct CowSkeleton {
    std::array<JointState, kJointCount> joints{};
    Vec2 center;
    std::int64_t frame_index = 0;
    std::optional<int> track_id;

    JointState& operator[](JointId j) { return joints[index(j)]; }
    const JointState& operator[](JointId j) const { return joints[index(j)]; }

    bool present(JointId j) const { return joints[index(j)].present(); }
    int count_upper(JointStatus status) const;
    bool upper_body_complete() const;

    // Sets `center` to the mean of the present upper-body joints.
    void recompute_center();

    friend bool operator==(const CowSkeleton&, const CowSkeleton&) = default;
};

// Arithmetic mean of upper-body points. Throws InvalidArgument on empty input or
// when a leg/hoof joint is supplied.
Vec2 body_center(std::span<const std::pair<JointId, Vec2>> points);

} // namespace cowpose
