#pragma once

#include "cowpose/confmap.hpp"
#include "cowpose/constraint_model.hpp"
#include "cowpose/geometry.hpp"
#include "cowpose/skeleton.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cowpose {

// A mean-shift mode and the indices of the input points that converged to it.
struct Cluster {
    Vec2 mode;
    std::vector<std::size_t> members;
};

inline constexpr double kMeanShiftTolerance = 0.5;
inline constexpr int kMeanShiftMaxIterations = 100;

// Flat-kernel mean-shift started from every point. Converged modes closer than
// bandwidth/2 are merged. Clusters come back sorted by mode x.
std::vector<Cluster> mean_shift(std::span<const Vec2> points, double bandwidth);

struct GroupingParams {
    double bandwidth_factor = 0.25; // mean-shift bandwidth as a fraction of body length
    int min_upper_joints = 5;       // more than half of the nine upper-body joints
    // Squared Mahalanobis radius (chi-square, 2 dof, 99.9%) a member vote must
    // fall within, under its joint's covariance, to count towards its cluster.
    double membership_chi2 = 13.815510557964274;
};

struct RejectedCluster {
    Vec2 mode;
    int distinct_joints = 0;
    std::vector<KeypointCandidate> members;
};

struct ClusterResult {
    std::vector<CowSkeleton> cows; // drafts: assigned joints detected, the rest absent
    std::vector<RejectedCluster> rejected;
};

// Groups upper-body candidates into cows through their back-projected centers.
// Leg-hoof candidates in the input are ignored. A draft's center is the mean of
// the back-projected centers of its assigned joints.
ClusterResult cluster_cows(std::span<const KeypointCandidate> candidates, const ConstraintModel& model,
                           const GroupingParams& params = {});

// Fills every absent upper-body joint from the constraint model.
CowSkeleton predict_missing(const CowSkeleton& draft, const ConstraintModel& model);

// Region searched for a cow's leg and hoof candidates: the upper-body bounding
// box widened by one sixth of its width on each side, spanning from its vertical
// midpoint down to min(image_bottom, bottom + 1.2 * height).
Rect leg_search_region(const CowSkeleton& draft, double image_bottom);

struct LimbResult {
    CowSkeleton cow;
    std::vector<KeypointCandidate> unassigned;
};

inline constexpr double kMinLimbAngleDeg = 90.0;

// Attaches (leg, hoof) pairs to the front (SHOULDER_BOTTOM) and back
// (MID_THIGH) anchors. The higher-scoring pair of an end becomes the RIGHT limb.
LimbResult assign_limbs(const CowSkeleton& draft, std::span<const KeypointCandidate> leg_candidates,
                        const Rect& region);

struct DetectParams {
    int nms_radius = kDefaultNmsRadius;
    double nms_threshold = kDefaultNmsThreshold;
    GroupingParams grouping;
};

struct FrameDiagnostics {
    std::vector<RejectedCluster> rejected_clusters;
    std::vector<KeypointCandidate> unassigned_limb_candidates;
};

// merge -> extract -> cluster -> predict -> leg region -> limbs. Cows are
// returned sorted by center x.
std::vector<CowSkeleton> detect_frame(const ConfidenceMapStack& color, const ConfidenceMapStack& diff,
                                      const ConstraintModel& model, const DetectParams& params = {},
                                      FrameDiagnostics* diagnostics = nullptr);

// Single-instance baseline: the arg-max of every color plane above `threshold`,
// one cow per frame, no grouping or prediction.
std::vector<CowSkeleton> detect_frame_max_only(const ConfidenceMapStack& color,
                                               double threshold = kDefaultNmsThreshold);

} // namespace cowpose
