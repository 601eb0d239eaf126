#include "cowpose/grouping.hpp"

#include "cowpose/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace cowpose {

namespace {

// Mean of the points within `bandwidth` of `at`; nullopt-like flag when none are.
bool window_mean(std::span<const Vec2> points, std::span<const std::size_t> subset, Vec2 at, double bandwidth,
                 Vec2& out) {
    const double r2 = bandwidth * bandwidth;
    Vec2 sum;
    std::size_t n = 0;
    for (auto i : subset) {
        const Vec2 d = points[i] - at;
        if (d.x * d.x + d.y * d.y <= r2) {
            sum += points[i];
            ++n;
        }
    }
    if (n == 0) {
        return false;
    }
    out = sum / static_cast<double>(n);
    return true;
}

Vec2 climb(std::span<const Vec2> points, std::span<const std::size_t> subset, Vec2 start, double bandwidth,
           double tolerance) {
    Vec2 x = start;
    for (int it = 0; it < kMeanShiftMaxIterations; ++it) {
        Vec2 next;
        if (!window_mean(points, subset, x, bandwidth, next)) {
            break;
        }
        const double shift = distance(next, x);
        x = next;
        if (shift < tolerance) {
            break;
        }
    }
    return x;
}

} // namespace

std::vector<Cluster> mean_shift(std::span<const Vec2> points, double bandwidth) {
    if (!(bandwidth > 0.0)) {
        throw InvalidArgument("mean-shift bandwidth must be positive");
    }
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), 0);

    struct Acc {
        Vec2 seed; // converged mode of the first member
        Vec2 sum;
        std::vector<std::size_t> members;
    };
    std::vector<Acc> acc;
    const double merge_r = 0.5 * bandwidth;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec2 m = climb(points, all, points[i], bandwidth, kMeanShiftTolerance);
        auto it = std::find_if(acc.begin(), acc.end(), [&](const Acc& a) { return distance(a.seed, m) < merge_r; });
        if (it == acc.end()) {
            acc.push_back({m, m, {i}});
        } else {
            it->sum += m;
            it->members.push_back(i);
        }
    }

    std::vector<Cluster> clusters;
    clusters.reserve(acc.size());
    for (auto& a : acc) {
        clusters.push_back({a.sum / static_cast<double>(a.members.size()), std::move(a.members)});
    }
    std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        return std::tie(a.mode.x, a.mode.y) < std::tie(b.mode.x, b.mode.y);
    });
    return clusters;
}

namespace {

int distinct_joints(std::span<const KeypointCandidate> cands, std::span<const std::size_t> members);

std::vector<std::size_t> gate(std::span<const KeypointCandidate> cands, std::span<const std::size_t> pool,
                              const ConstraintModel& model, Vec2 center, double chi2) {
    std::vector<std::size_t> out;
    for (auto i : pool) {
        if (model.mahalanobis2(center, cands[i]) <= chi2) {
            out.push_back(i);
        }
    }
    return out;
}

// Settles a coarse mode onto the tight core of true votes. Every vote within
// the coarse bandwidth is tried as a center hypothesis; the one whose
// Mahalanobis gate admits the most distinct joints (then the most votes, then
// the earliest) seeds a gated mean iteration. Spurious votes drag flat-kernel
// modes around but rarely fall inside several joints' gates at once.
Vec2 refine_center(std::span<const Vec2> votes, std::span<const KeypointCandidate> cands,
                   const ConstraintModel& model, Vec2 mode, double bandwidth, double chi2) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < votes.size(); ++i) {
        if (distance(votes[i], mode) <= bandwidth) {
            pool.push_back(i);
        }
    }
    Vec2 best = mode;
    int best_distinct = -1;
    std::size_t best_count = 0;
    for (auto i : pool) {
        const auto g = gate(cands, pool, model, votes[i], chi2);
        const int d = distinct_joints(cands, g);
        if (d > best_distinct || (d == best_distinct && g.size() > best_count)) {
            best = votes[i];
            best_distinct = d;
            best_count = g.size();
        }
    }
    Vec2 c = best;
    for (int it = 0; it < kMeanShiftMaxIterations; ++it) {
        const auto g = gate(cands, pool, model, c, chi2);
        if (g.empty()) {
            break;
        }
        Vec2 sum;
        for (auto i : g) {
            sum += votes[i];
        }
        const Vec2 next = sum / static_cast<double>(g.size());
        const double shift = distance(next, c);
        c = next;
        if (shift < 1e-3) {
            break;
        }
    }
    return c;
}

int distinct_joints(std::span<const KeypointCandidate> cands, std::span<const std::size_t> members) {
    std::array<bool, kJointCount> seen{};
    int n = 0;
    for (auto i : members) {
        auto& s = seen[index(cands[i].joint)];
        n += !s;
        s = true;
    }
    return n;
}

} // namespace

ClusterResult cluster_cows(std::span<const KeypointCandidate> candidates, const ConstraintModel& model,
                           const GroupingParams& params) {
    std::vector<KeypointCandidate> cands;
    for (const auto& c : candidates) {
        if (is_upper_body(c.joint)) {
            cands.push_back(c);
        }
    }
    std::sort(cands.begin(), cands.end(), canonical_less);

    std::vector<Vec2> votes;
    votes.reserve(cands.size());
    for (const auto& c : cands) {
        votes.push_back(model.backproject_center(c));
    }

    const double bandwidth = params.bandwidth_factor * model.body_length();
    const auto clusters = mean_shift(votes, bandwidth);
    const double same_center = std::max(3.0 * model.max_sigma(), 2.0);

    ClusterResult result;
    struct Accepted {
        Vec2 center;
        std::vector<std::size_t> members;
        Vec2 raw_mode;
    };
    std::vector<Accepted> accepted;
    std::vector<std::size_t> all(votes.size());
    std::iota(all.begin(), all.end(), 0);
    for (const auto& cl : clusters) {
        const Vec2 center = refine_center(votes, cands, model, cl.mode, bandwidth, params.membership_chi2);
        // Neighbouring coarse clusters can settle on the same cow.
        if (std::any_of(accepted.begin(), accepted.end(),
                        [&](const Accepted& a) { return distance(a.center, center) < same_center; })) {
            continue;
        }
        auto gated = gate(cands, all, model, center, params.membership_chi2);
        const int distinct = distinct_joints(cands, gated);
        if (distinct >= params.min_upper_joints) {
            accepted.push_back({center, std::move(gated), cl.mode});
        } else {
            RejectedCluster r{cl.mode, distinct, {}};
            for (auto i : cl.members) {
                r.members.push_back(cands[i]);
            }
            result.rejected.push_back(std::move(r));
        }
    }

    // Greedy assignment by descending log(confidence * likelihood).
    struct Option {
        double score;
        std::size_t cow;
        std::size_t cand;
    };
    std::vector<Option> options;
    for (std::size_t k = 0; k < accepted.size(); ++k) {
        for (auto i : accepted[k].members) {
            const double conf = std::max(cands[i].confidence, std::numeric_limits<double>::min());
            options.push_back({std::log(conf) + model.joint_log_likelihood(accepted[k].center, cands[i]), k, i});
        }
    }
    std::stable_sort(options.begin(), options.end(), [](const Option& a, const Option& b) {
        return std::tie(b.score, a.cow, a.cand) < std::tie(a.score, b.cow, b.cand);
    });

    std::vector<CowSkeleton> drafts(accepted.size());
    std::vector<bool> used(cands.size(), false);
    std::vector<std::array<std::size_t, kUpperBodyCount>> chosen(accepted.size());
    for (auto& c : chosen) {
        c.fill(std::numeric_limits<std::size_t>::max());
    }
    for (const auto& o : options) {
        const auto j = index(cands[o.cand].joint);
        if (used[o.cand] || chosen[o.cow][j] != std::numeric_limits<std::size_t>::max()) {
            continue;
        }
        used[o.cand] = true;
        chosen[o.cow][j] = o.cand;
    }

    for (std::size_t k = 0; k < accepted.size(); ++k) {
        CowSkeleton cow;
        Vec2 sum;
        int n = 0;
        for (std::size_t j = 0; j < kUpperBodyCount; ++j) {
            const auto i = chosen[k][j];
            if (i == std::numeric_limits<std::size_t>::max()) {
                continue;
            }
            cow.joints[j] = {cands[i].position, cands[i].confidence, JointStatus::detected};
            sum += votes[i];
            ++n;
        }
        if (n < params.min_upper_joints) {
            RejectedCluster r{accepted[k].raw_mode, n, {}};
            for (auto i : accepted[k].members) {
                r.members.push_back(cands[i]);
            }
            result.rejected.push_back(std::move(r));
            continue;
        }
        cow.center = sum / static_cast<double>(n);
        result.cows.push_back(cow);
    }
    std::stable_sort(result.cows.begin(), result.cows.end(), [](const CowSkeleton& a, const CowSkeleton& b) {
        return std::tie(a.center.x, a.center.y) < std::tie(b.center.x, b.center.y);
    });
    return result;
}

CowSkeleton predict_missing(const CowSkeleton& draft, const ConstraintModel& model) {
    CowSkeleton cow = draft;
    bool changed = false;
    for (auto j : kUpperBodyJoints) {
        if (!cow.present(j)) {
            cow[j] = {model.project_joint(draft.center, j), 0.0, JointStatus::predicted};
            changed = true;
        }
    }
    if (changed) {
        cow.recompute_center();
    }
    return cow;
}

Rect leg_search_region(const CowSkeleton& draft, double image_bottom) {
    std::vector<Vec2> pts;
    for (auto j : kUpperBodyJoints) {
        if (!draft.present(j)) {
            throw InvalidArgument("leg search region needs all upper-body joints; " + std::string(joint_name(j)) +
                                  " is absent");
        }
        pts.push_back(draft[j].position);
    }
    const Rect body = bounding_rect(pts);
    if (!(body.width() > 0.0) || !(body.height() > 0.0)) {
        throw InvalidArgument("degenerate body");
    }
    const double widen = body.width() / 6.0;
    return {body.x0 - widen, 0.5 * (body.y0 + body.y1), body.x1 + widen,
            std::min(image_bottom, body.y1 + 1.2 * body.height())};
}

namespace {

struct LimbPair {
    double score;
    std::size_t leg;
    std::size_t hoof;
};

} // namespace

LimbResult assign_limbs(const CowSkeleton& draft, std::span<const KeypointCandidate> leg_candidates,
                        const Rect& region) {
    std::vector<KeypointCandidate> cands(leg_candidates.begin(), leg_candidates.end());
    std::sort(cands.begin(), cands.end(), canonical_less);
    std::vector<bool> used(cands.size(), false);

    LimbResult out{draft, {}};
    for (auto end : {LimbEnd::front, LimbEnd::back}) {
        const Limb& right = end == LimbEnd::front ? kLimbs[0] : kLimbs[2];
        const Limb& left = end == LimbEnd::front ? kLimbs[1] : kLimbs[3];
        if (!draft.present(right.anchor)) {
            continue;
        }
        const Vec2 anchor = draft[right.anchor].position;
        const auto in_end = [&](const KeypointCandidate& c, bool hoof) {
            const JointId a = hoof ? right.hoof : right.leg;
            const JointId b = hoof ? left.hoof : left.leg;
            return (c.joint == a || c.joint == b) && region.contains(c.position);
        };

        std::vector<LimbPair> pairs;
        for (std::size_t l = 0; l < cands.size(); ++l) {
            if (!in_end(cands[l], false)) {
                continue;
            }
            const Vec2 leg = cands[l].position;
            if (!(leg.y > anchor.y)) {
                continue;
            }
            for (std::size_t h = 0; h < cands.size(); ++h) {
                if (!in_end(cands[h], true)) {
                    continue;
                }
                const Vec2 hoof = cands[h].position;
                if (!(hoof.y > leg.y) || !(angle_at(leg, anchor, hoof) > kMinLimbAngleDeg)) {
                    continue;
                }
                pairs.push_back({cands[l].confidence + cands[h].confidence, l, h});
            }
        }
        std::stable_sort(pairs.begin(), pairs.end(), [](const LimbPair& a, const LimbPair& b) {
            return std::tie(b.score, a.leg, a.hoof) < std::tie(a.score, b.leg, b.hoof);
        });

        const Limb* slots[] = {&right, &left};
        std::size_t filled = 0;
        for (const auto& p : pairs) {
            if (filled == 2) {
                break;
            }
            if (used[p.leg] || used[p.hoof]) {
                continue;
            }
            used[p.leg] = used[p.hoof] = true;
            const Limb& limb = *slots[filled++];
            out.cow[limb.leg] = {cands[p.leg].position, cands[p.leg].confidence, JointStatus::detected};
            out.cow[limb.hoof] = {cands[p.hoof].position, cands[p.hoof].confidence, JointStatus::detected};
        }
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (!used[i]) {
            out.unassigned.push_back(cands[i]);
        }
    }
    return out;
}

std::vector<CowSkeleton> detect_frame(const ConfidenceMapStack& color, const ConfidenceMapStack& diff,
                                      const ConstraintModel& model, const DetectParams& params,
                                      FrameDiagnostics* diagnostics) {
    const auto merged = merge_maps(color, diff);
    const auto candidates = extract_candidates(merged, params.nms_radius, params.nms_threshold);

    auto clustered = cluster_cows(candidates, model, params.grouping);

    std::vector<KeypointCandidate> limb_pool;
    for (const auto& c : candidates) {
        if (!is_upper_body(c.joint)) {
            limb_pool.push_back(c);
        }
    }

    const double image_bottom = color.height > 0 ? static_cast<double>(color.height - 1) : 0.0;
    std::vector<CowSkeleton> cows;
    for (const auto& draft : clustered.cows) {
        auto cow = predict_missing(draft, model);
        cow.frame_index = static_cast<std::int64_t>(color.frame_index);
        const Rect region = leg_search_region(cow, image_bottom);
        auto limbs = assign_limbs(cow, limb_pool, region);
        limb_pool = std::move(limbs.unassigned);
        cows.push_back(limbs.cow);
    }
    if (diagnostics) {
        diagnostics->rejected_clusters = std::move(clustered.rejected);
        diagnostics->unassigned_limb_candidates = std::move(limb_pool);
    }
    return cows;
}

std::vector<CowSkeleton> detect_frame_max_only(const ConfidenceMapStack& color, double threshold) {
    CowSkeleton cow;
    cow.frame_index = static_cast<std::int64_t>(color.frame_index);
    bool any = false;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto plane = color.plane(joint_at(j));
        if (plane.empty()) {
            continue;
        }
        const auto it = std::max_element(plane.begin(), plane.end());
        if (!(*it > threshold)) {
            continue;
        }
        const auto offset = static_cast<std::size_t>(it - plane.begin());
        cow.joints[j] = {{static_cast<double>(offset % color.width), static_cast<double>(offset / color.width)},
                         *it,
                         JointStatus::detected};
        any = true;
    }
    if (!any) {
        return {};
    }
    cow.recompute_center();
    return {cow};
}

} // namespace cowpose
