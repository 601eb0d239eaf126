#include "cowpose/temporal.hpp"

#include "cowpose/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <tuple>

namespace cowpose {

void match_frames(std::vector<Track>& tracks, std::span<const CowSkeleton> detections, double gate, int& next_id,
                  int max_misses) {
    if (!(gate > 0.0)) {
        throw InvalidArgument("matching gate must be positive");
    }
    std::vector<CowSkeleton> dets(detections.begin(), detections.end());
    std::stable_sort(dets.begin(), dets.end(), [](const CowSkeleton& a, const CowSkeleton& b) {
        return std::tie(a.center.x, a.center.y) < std::tie(b.center.x, b.center.y);
    });

    struct Pair {
        double dist;
        std::size_t track;
        std::size_t det;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (!tracks[t].open || tracks[t].frames.empty()) {
            continue;
        }
        const Vec2 last = tracks[t].frames.back().center;
        for (std::size_t d = 0; d < dets.size(); ++d) {
            const double dist = distance(last, dets[d].center);
            if (dist < gate) {
                pairs.push_back({dist, t, d});
            }
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
        return std::tie(a.dist, tracks[a.track].id, a.det) < std::tie(b.dist, tracks[b.track].id, b.det);
    });

    std::vector<bool> track_used(tracks.size(), false);
    std::vector<bool> det_used(dets.size(), false);
    for (const auto& p : pairs) {
        if (track_used[p.track] || det_used[p.det]) {
            continue;
        }
        track_used[p.track] = det_used[p.det] = true;
        auto& track = tracks[p.track];
        CowSkeleton cow = dets[p.det];
        cow.track_id = track.id;
        track.frames.push_back(cow);
        track.misses = 0;
    }
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        auto& track = tracks[t];
        if (track.open && !track_used[t]) {
            if (++track.misses >= max_misses) {
                track.open = false;
            }
        }
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (det_used[d]) {
            continue;
        }
        Track track;
        track.id = next_id++;
        CowSkeleton cow = dets[d];
        cow.track_id = track.id;
        track.frames.push_back(cow);
        tracks.push_back(std::move(track));
    }
}

Tracker::Tracker(double gate, int max_misses) : gate_(gate), max_misses_(max_misses) {
    if (!(gate > 0.0)) {
        throw InvalidArgument("matching gate must be positive");
    }
}

void Tracker::update(std::int64_t frame_index, std::span<const CowSkeleton> detections) {
    if (started_ && frame_index <= last_frame_) {
        throw InvalidArgument("frames must arrive in increasing order (got " + std::to_string(frame_index) +
                              " after " + std::to_string(last_frame_) + ")");
    }
    started_ = true;
    last_frame_ = frame_index;
    std::vector<CowSkeleton> dets(detections.begin(), detections.end());
    for (auto& d : dets) {
        d.frame_index = frame_index;
    }
    match_frames(tracks_, dets, gate_, next_id_, max_misses_);
}

namespace {

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

// Centered running median; the window shrinks symmetrically near the ends so it
// always stays odd.
std::vector<double> running_median(const std::vector<double>& xs, int half) {
    const auto n = static_cast<std::ptrdiff_t>(xs.size());
    std::vector<double> out(xs.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t h = std::min<std::ptrdiff_t>({half, i, n - 1 - i});
        out[static_cast<std::size_t>(i)] = median_of({xs.begin() + (i - h), xs.begin() + (i + h + 1)});
    }
    return out;
}

} // namespace

Track filter_track(const Track& track, int window, double body_length, double outlier_factor) {
    if (window < 1 || window % 2 == 0) {
        throw InvalidArgument("median window must be a positive odd integer");
    }
    Track out = track;
    if (track.frames.size() < 2) {
        return out;
    }
    const double limit = outlier_factor * body_length;
    for (auto j : kUpperBodyJoints) {
        std::vector<std::size_t> rows;
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t i = 0; i < track.frames.size(); ++i) {
            const auto& js = track.frames[i][j];
            if (js.present()) {
                rows.push_back(i);
                xs.push_back(js.position.x);
                ys.push_back(js.position.y);
            }
        }
        const auto mx = running_median(xs, window / 2);
        const auto my = running_median(ys, window / 2);
        const auto n = rows.size();
        for (std::size_t k = 0; k < n; ++k) {
            auto& js = out.frames[rows[k]][j];
            const Vec2 filtered{mx[k], my[k]};
            if (distance(js.position, filtered) > limit) {
                js.status = JointStatus::predicted;
            }
            js.position = filtered;
            // Majority vote on the status over the same window: a lone
            // detection among predictions is more likely clutter than the
            // joint reappearing for one frame.
            const std::size_t half = std::min<std::size_t>({static_cast<std::size_t>(window / 2), k, n - 1 - k});
            std::size_t predicted = 0;
            for (std::size_t q = k - half; q <= k + half; ++q) {
                predicted += track.frames[rows[q]][j].status == JointStatus::predicted;
            }
            if (2 * predicted > 2 * half + 1) {
                js.status = JointStatus::predicted;
            }
        }
    }
    for (auto& cow : out.frames) {
        cow.recompute_center();
    }
    return out;
}

double track_speed(const Track& track, double fps) {
    if (track.frames.size() < 2) {
        throw InvalidArgument("track speed needs at least two frames");
    }
    double total = 0.0;
    for (std::size_t i = 1; i < track.frames.size(); ++i) {
        const auto& a = track.frames[i - 1];
        const auto& b = track.frames[i];
        const auto gap = static_cast<double>(std::max<std::int64_t>(1, b.frame_index - a.frame_index));
        total += distance(a.center, b.center) / gap;
    }
    return total / static_cast<double>(track.frames.size() - 1) * fps;
}

} // namespace cowpose
