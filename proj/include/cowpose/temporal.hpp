#pragma once

#include "cowpose/skeleton.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cowpose {

// One cow identity over time. Skeletons are stored in strictly increasing
// frame order, at most one per frame.
struct Track {
    int id = 0;
    std::vector<CowSkeleton> frames;
    bool open = true;
    int misses = 0; // consecutive frames without a match

    std::int64_t first_frame() const { return frames.front().frame_index; }
    std::int64_t last_frame() const { return frames.back().frame_index; }
};

inline constexpr int kMaxTrackMisses = 15;
inline constexpr double kDefaultGateFactor = 0.5;
inline constexpr int kDefaultMedianWindow = 5;
inline constexpr double kOutlierFactor = 0.15;

// Greedy nearest-center association of one frame's detections with the open
// tracks. Pairs are taken in ascending center distance below `gate`; leftovers
// open new tracks (ids from `next_id`); tracks missing kMaxTrackMisses frames
// in a row are closed. Detections are processed in (x, y) order of their
// centers, so the result does not depend on their input order.
void match_frames(std::vector<Track>& tracks, std::span<const CowSkeleton> detections, double gate, int& next_id,
                  int max_misses = kMaxTrackMisses);

// Stateful wrapper over match_frames for an ordered frame stream.
class Tracker {
public:
    explicit Tracker(double gate, int max_misses = kMaxTrackMisses);

    // Frames must arrive in strictly increasing order.
    void update(std::int64_t frame_index, std::span<const CowSkeleton> detections);

    const std::vector<Track>& tracks() const { return tracks_; }

private:
    double gate_;
    int max_misses_;
    int next_id_ = 0;
    std::int64_t last_frame_ = -1;
    bool started_ = false;
    std::vector<Track> tracks_;
};

// Median-filters every upper-body trajectory (x and y separately, window
// shrinking symmetrically at the ends) and moves each point onto its filtered
// value. Points that were further than outlier_factor * body_length from it are
// flagged predicted, as are points predicted in most frames of their window.
// Leg-hoof joints are left alone.
Track filter_track(const Track& track, int window, double body_length, double outlier_factor = kOutlierFactor);

// Mean center displacement per frame, times fps (pixels per second).
double track_speed(const Track& track, double fps);

} // namespace cowpose
