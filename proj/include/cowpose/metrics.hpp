#pragma once

#include "cowpose/constraint_model.hpp"
#include "cowpose/geometry.hpp"
#include "cowpose/sequence_io.hpp"
#include "cowpose/skeleton.hpp"
#include "cowpose/temporal.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cowpose {

struct BinaryMask {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(std::uint32_t w, std::uint32_t h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(std::uint32_t x, std::uint32_t y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const;
};

// Sets every pixel whose center (x, y) lies inside the polygon (even-odd rule).
// Pixel (x, y) has its center at image coordinates (x, y).
void fill_polygon(BinaryMask& mask, std::span<const Vec2> polygon);

// Closed upper-body outline in contour order. Throws when a joint is absent.
Polygon body_polygon(const CowSkeleton& skeleton);

// 2|a & b| / (|a| + |b|); 1 when both are empty.
double mask_dice(const BinaryMask& a, const BinaryMask& b);

// Dice of two polygons rasterized on a shared grid covering both.
double polygon_dice(std::span<const Vec2> a, std::span<const Vec2> b);

struct CowPair {
    std::size_t detected;
    std::size_t truth;
    double dice;
};

// Greedy one-to-one pairing by descending body-polygon Dice; pairs need Dice > 0.
// Cows without a complete upper body never pair.
std::vector<CowPair> pair_cows(std::span<const CowSkeleton> detected, std::span<const CowSkeleton> truth);

struct BodyScore {
    double score = 0.0;     // mean_dice * count_f1
    double mean_dice = 0.0; // over matched pairs
    double count_f1 = 0.0;  // harmonic mean of matched/detected and matched/truth
    std::size_t detected = 0;
    std::size_t truth = 0;
    std::size_t matched = 0;
};

// Scores the frames present in `truth`; detections in other frames are ignored.
BodyScore body_f1(const Sequence& detections, const Sequence& truth);

inline constexpr double kLegHoofThresholdPx = 30.0;

struct LegHoofScore {
    double f1 = 0.0;
    std::size_t detected = 0;
    std::size_t labelled = 0;
    std::size_t matched = 0;
};

// Leg and hoof joints of paired cows match when they share a joint id and lie
// closer than `threshold`. Occluded or unlabelled truth joints are ignored.
LegHoofScore leghoof_f1(const Sequence& detections, const Sequence& truth, double threshold = kLegHoofThresholdPx);

// Discrete Frechet distance, O(nm) dynamic programming.
double discrete_frechet(std::span<const Vec2> p, std::span<const Vec2> q);

inline constexpr double kDefaultThetaFactor = 0.35;

struct Validity {
    bool valid = false;
    double frechet = 0.0;
    std::vector<std::string> reasons;
};

// Contour similarity to the model's reference (both centered on their
// centroids) plus the leg rules: legs and hooves at or below the body center,
// hooves below their legs.
Validity validate_cow(const CowSkeleton& skeleton, const ConstraintModel& model, double theta);

// Valid cows / detected cows. Throws when there are no cows.
double vcp(std::span<const CowSkeleton> skeletons, const ConstraintModel& model, double theta);

// Mean over consecutive frame pairs of sqrt(var_x + var_y) of the upper-body
// motion vectors (population variances over joints present in both frames).
double temporal_consistency(const Track& track);

// Per-frame dispersions that temporal_consistency averages.
std::vector<double> motion_dispersion(const Track& track);

inline constexpr double kLimbHalfWidthPx = 10.0;

// Body polygon plus every limb with leg and hoof present, drawn as the
// anchor-leg-hoof polyline widened by +/-10 px horizontally.
BinaryMask skeleton_to_mask(const CowSkeleton& skeleton, std::uint32_t width, std::uint32_t height);

// Groups a sequence's cows by track id into tracks sorted by id. Cows without
// an id are skipped.
std::vector<Track> tracks_from_sequence(const Sequence& seq);

struct EvalParams {
    double theta_factor = kDefaultThetaFactor;
    double leghoof_threshold = kLegHoofThresholdPx;
};

struct FrameEval {
    std::int64_t frame = 0;
    std::size_t detected = 0;
    std::size_t truth = 0;
    std::size_t matched = 0;
    double mean_dice = 0.0;
    std::size_t valid = 0;
};

struct TrackEval {
    int id = 0;
    std::int64_t first = 0;
    std::int64_t last = 0;
    std::size_t length = 0;
    double tc = 0.0;
};

struct EvalReport {
    double body_f1 = 0.0;
    double leghoof_f1 = 0.0;
    double vcp = 0.0;
    double tc = 0.0;
    BodyScore body;
    LegHoofScore leghoof;
    std::size_t detected_cows = 0;
    std::size_t valid_cows = 0;
    std::vector<FrameEval> per_frame;
    std::vector<TrackEval> per_track;
};

EvalReport evaluate(const Sequence& detections, const Sequence& truth, const ConstraintModel& model,
                    const EvalParams& params = {});

nlohmann::json report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

} // namespace cowpose
