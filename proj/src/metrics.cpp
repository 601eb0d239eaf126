#include "cowpose/metrics.hpp"

#include "cowpose/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

namespace cowpose {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

void fill_polygon(BinaryMask& mask, std::span<const Vec2> polygon) {
    const std::size_t n = polygon.size();
    if (n < 3 || mask.width == 0 || mask.height == 0) {
        return;
    }
    double lo = polygon[0].y;
    double hi = polygon[0].y;
    for (const auto& p : polygon) {
        lo = std::min(lo, p.y);
        hi = std::max(hi, p.y);
    }
    const auto y0 = static_cast<long>(std::max(0.0, std::ceil(lo)));
    const auto y1 = static_cast<long>(std::min(static_cast<double>(mask.height) - 1.0, std::floor(hi)));
    std::vector<double> xs;
    for (long y = y0; y <= y1; ++y) {
        const double fy = static_cast<double>(y);
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 a = polygon[i];
            const Vec2 b = polygon[(i + 1) % n];
            if ((a.y <= fy && fy < b.y) || (b.y <= fy && fy < a.y)) {
                xs.push_back(a.x + (fy - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        // Inside pixels satisfy xs[k] <= x < xs[k + 1] for even k.
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const double from = std::max(0.0, std::ceil(xs[k]));
            const double to = std::min(static_cast<double>(mask.width), std::ceil(xs[k + 1]));
            auto* row = mask.data.data() + static_cast<std::size_t>(y) * mask.width;
            for (auto x = static_cast<long>(from); x < static_cast<long>(to); ++x) {
                row[x] = 1;
            }
        }
    }
}

Polygon body_polygon(const CowSkeleton& skeleton) {
    Polygon poly;
    poly.reserve(kContourOrder.size());
    for (auto j : kContourOrder) {
        if (!skeleton.present(j)) {
            throw InvalidArgument("body polygon needs " + std::string(joint_name(j)));
        }
        poly.push_back(skeleton[j].position);
    }
    return poly;
}

double mask_dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw InvalidArgument("mask dimensions differ");
    }
    std::size_t inter = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool x = a.data[i] != 0;
        const bool y = b.data[i] != 0;
        inter += x && y;
        total += static_cast<std::size_t>(x) + static_cast<std::size_t>(y);
    }
    if (total == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double polygon_dice(std::span<const Vec2> a, std::span<const Vec2> b) {
    if (a.size() < 3 || b.size() < 3) {
        return 0.0;
    }
    std::vector<Vec2> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const Rect box = bounding_rect(all);
    const double ox = std::floor(box.x0);
    const double oy = std::floor(box.y0);
    const auto w = static_cast<std::uint32_t>(std::ceil(box.x1) - ox + 1.0);
    const auto h = static_cast<std::uint32_t>(std::ceil(box.y1) - oy + 1.0);
    const auto shifted = [&](std::span<const Vec2> poly) {
        Polygon out;
        for (const auto& p : poly) {
            out.push_back({p.x - ox, p.y - oy});
        }
        return out;
    };
    BinaryMask ma(w, h);
    BinaryMask mb(w, h);
    fill_polygon(ma, shifted(a));
    fill_polygon(mb, shifted(b));
    if (ma.count() == 0 || mb.count() == 0) {
        return 0.0;
    }
    return mask_dice(ma, mb);
}

std::vector<CowPair> pair_cows(std::span<const CowSkeleton> detected, std::span<const CowSkeleton> truth) {
    const auto polys = [](std::span<const CowSkeleton> cows) {
        std::vector<std::optional<Polygon>> out;
        for (const auto& c : cows) {
            out.push_back(c.upper_body_complete() ? std::optional(body_polygon(c)) : std::nullopt);
        }
        return out;
    };
    const auto dp = polys(detected);
    const auto tp = polys(truth);
    std::vector<CowPair> all;
    for (std::size_t d = 0; d < detected.size(); ++d) {
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (!dp[d] || !tp[t]) {
                continue;
            }
            const double dice = polygon_dice(*dp[d], *tp[t]);
            if (dice > 0.0) {
                all.push_back({d, t, dice});
            }
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const CowPair& a, const CowPair& b) {
        return std::tie(b.dice, a.detected, a.truth) < std::tie(a.dice, b.detected, b.truth);
    });
    std::vector<bool> dused(detected.size(), false);
    std::vector<bool> tused(truth.size(), false);
    std::vector<CowPair> pairs;
    for (const auto& p : all) {
        if (dused[p.detected] || tused[p.truth]) {
            continue;
        }
        dused[p.detected] = tused[p.truth] = true;
        pairs.push_back(p);
    }
    return pairs;
}

namespace {

double harmonic(double matched, double detected, double truth) {
    if (detected == 0.0 && truth == 0.0) {
        return 1.0;
    }
    if (matched == 0.0) {
        return 0.0;
    }
    const double p = matched / detected;
    const double r = matched / truth;
    return 2.0 * p * r / (p + r);
}

const std::vector<CowSkeleton>& cows_at(const Sequence& seq, std::int64_t frame) {
    static const std::vector<CowSkeleton> none;
    const auto* f = seq.find(frame);
    return f ? f->cows : none;
}

} // namespace

BodyScore body_f1(const Sequence& detections, const Sequence& truth) {
    if (truth.frames.empty()) {
        throw InvalidArgument("body F1 needs at least one truth frame");
    }
    BodyScore s;
    double dice_sum = 0.0;
    for (const auto& tf : truth.frames) {
        const auto& dets = cows_at(detections, tf.frame);
        const auto pairs = pair_cows(dets, tf.cows);
        s.detected += dets.size();
        s.truth += tf.cows.size();
        s.matched += pairs.size();
        for (const auto& p : pairs) {
            dice_sum += p.dice;
        }
    }
    s.count_f1 = harmonic(static_cast<double>(s.matched), static_cast<double>(s.detected),
                          static_cast<double>(s.truth));
    if (s.detected == 0 && s.truth == 0) {
        s.mean_dice = 1.0;
    } else if (s.matched > 0) {
        s.mean_dice = dice_sum / static_cast<double>(s.matched);
    }
    s.score = s.mean_dice * s.count_f1;
    return s;
}

namespace {

bool labelled(const JointState& js) { return js.status == JointStatus::detected || js.status == JointStatus::predicted; }

} // namespace

LegHoofScore leghoof_f1(const Sequence& detections, const Sequence& truth, double threshold) {
    LegHoofScore s;
    for (const auto& tf : truth.frames) {
        const auto& dets = cows_at(detections, tf.frame);
        const auto pairs = pair_cows(dets, tf.cows);
        std::vector<std::optional<std::size_t>> partner(dets.size());
        for (const auto& p : pairs) {
            partner[p.detected] = p.truth;
        }
        for (const auto& t : tf.cows) {
            for (auto j : kLimbJoints) {
                s.labelled += labelled(t[j]);
            }
        }
        for (std::size_t d = 0; d < dets.size(); ++d) {
            for (auto j : kLimbJoints) {
                if (!dets[d].present(j)) {
                    continue;
                }
                if (!partner[d]) {
                    ++s.detected;
                    continue;
                }
                const auto& tj = tf.cows[*partner[d]][j];
                if (tj.status == JointStatus::occluded) {
                    continue; // blocked joints do not count either way
                }
                ++s.detected;
                if (labelled(tj) && distance(dets[d][j].position, tj.position) < threshold) {
                    ++s.matched;
                }
            }
        }
    }
    s.f1 = harmonic(static_cast<double>(s.matched), static_cast<double>(s.detected),
                    static_cast<double>(s.labelled));
    return s;
}

double discrete_frechet(std::span<const Vec2> p, std::span<const Vec2> q) {
    if (p.empty() || q.empty()) {
        throw InvalidArgument("Frechet distance of an empty polyline");
    }
    const std::size_t m = q.size();
    std::vector<double> prev(m);
    std::vector<double> cur(m);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = distance(p[i], q[j]);
            if (i == 0 && j == 0) {
                cur[j] = d;
            } else if (i == 0) {
                cur[j] = std::max(cur[j - 1], d);
            } else if (j == 0) {
                cur[j] = std::max(prev[j], d);
            } else {
                cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
            }
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

namespace {

std::vector<Vec2> centered(std::vector<Vec2> pts) {
    const Vec2 c = mean(pts);
    for (auto& p : pts) {
        p -= c;
    }
    return pts;
}

} // namespace

Validity validate_cow(const CowSkeleton& skeleton, const ConstraintModel& model, double theta) {
    if (!(theta > 0.0)) {
        throw InvalidArgument("Frechet threshold must be positive");
    }
    Validity v;
    if (!skeleton.upper_body_complete()) {
        v.reasons.emplace_back("incomplete upper body");
        return v;
    }
    const auto contour = centered(body_polygon(skeleton));
    const auto reference = centered(model.reference_contour());
    v.frechet = discrete_frechet(contour, reference);
    if (v.frechet > theta) {
        v.reasons.emplace_back("contour too far from reference");
    }

    Vec2 center;
    for (auto j : kUpperBodyJoints) {
        center += skeleton[j].position;
    }
    center = center / static_cast<double>(kUpperBodyCount);

    bool leg_above = false;
    bool hoof_above = false;
    for (const auto& limb : kLimbs) {
        for (auto j : {limb.leg, limb.hoof}) {
            if (skeleton.present(j) && skeleton[j].position.y < center.y) {
                leg_above = true;
            }
        }
        if (skeleton.present(limb.leg) && skeleton.present(limb.hoof) &&
            !(skeleton[limb.hoof].position.y > skeleton[limb.leg].position.y)) {
            hoof_above = true;
        }
    }
    if (leg_above) {
        v.reasons.emplace_back("leg above body");
    }
    if (hoof_above) {
        v.reasons.emplace_back("hoof above leg");
    }
    v.valid = v.reasons.empty();
    return v;
}

double vcp(std::span<const CowSkeleton> skeletons, const ConstraintModel& model, double theta) {
    if (skeletons.empty()) {
        throw InvalidArgument("VCP undefined: no detected cows");
    }
    std::size_t valid = 0;
    for (const auto& s : skeletons) {
        valid += validate_cow(s, model, theta).valid;
    }
    return static_cast<double>(valid) / static_cast<double>(skeletons.size());
}

std::vector<double> motion_dispersion(const Track& track) {
    if (track.frames.size() < 2) {
        throw InvalidArgument("temporal consistency needs at least two frames");
    }
    std::vector<double> out;
    for (std::size_t t = 1; t < track.frames.size(); ++t) {
        const auto& a = track.frames[t - 1];
        const auto& b = track.frames[t];
        std::vector<Vec2> motion;
        for (auto j : kUpperBodyJoints) {
            if (a.present(j) && b.present(j)) {
                motion.push_back(b[j].position - a[j].position);
            }
        }
        if (motion.empty()) {
            continue;
        }
        const Vec2 m = mean(motion);
        double vx = 0.0;
        double vy = 0.0;
        for (const auto& v : motion) {
            vx += (v.x - m.x) * (v.x - m.x);
            vy += (v.y - m.y) * (v.y - m.y);
        }
        const auto n = static_cast<double>(motion.size());
        out.push_back(std::sqrt(vx / n + vy / n));
    }
    return out;
}

double temporal_consistency(const Track& track) {
    const auto d = motion_dispersion(track);
    if (d.empty()) {
        return 0.0;
    }
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

BinaryMask skeleton_to_mask(const CowSkeleton& skeleton, std::uint32_t width, std::uint32_t height) {
    BinaryMask mask(width, height);
    fill_polygon(mask, body_polygon(skeleton));
    const Vec2 half{kLimbHalfWidthPx, 0.0};
    for (const auto& limb : kLimbs) {
        if (!skeleton.present(limb.anchor) || !skeleton.present(limb.leg) || !skeleton.present(limb.hoof)) {
            continue;
        }
        const Vec2 pts[] = {skeleton[limb.anchor].position, skeleton[limb.leg].position, skeleton[limb.hoof].position};
        for (int s = 0; s < 2; ++s) {
            const Vec2 a = pts[s];
            const Vec2 b = pts[s + 1];
            const Vec2 quad[] = {a - half, b - half, b + half, a + half};
            fill_polygon(mask, quad);
        }
    }
    return mask;
}

std::vector<Track> tracks_from_sequence(const Sequence& seq) {
    std::map<int, Track> by_id;
    for (const auto& f : seq.frames) {
        for (const auto& c : f.cows) {
            if (!c.track_id) {
                continue;
            }
            auto& t = by_id[*c.track_id];
            t.id = *c.track_id;
            t.frames.push_back(c);
        }
    }
    std::vector<Track> out;
    for (auto& [id, t] : by_id) {
        std::stable_sort(t.frames.begin(), t.frames.end(),
                         [](const CowSkeleton& a, const CowSkeleton& b) { return a.frame_index < b.frame_index; });
        t.open = false;
        out.push_back(std::move(t));
    }
    return out;
}

EvalReport evaluate(const Sequence& detections, const Sequence& truth, const ConstraintModel& model,
                    const EvalParams& params) {
    EvalReport r;
    r.body = body_f1(detections, truth);
    r.leghoof = leghoof_f1(detections, truth, params.leghoof_threshold);
    r.body_f1 = r.body.score;
    r.leghoof_f1 = r.leghoof.f1;

    const double theta = params.theta_factor * model.body_length();
    std::set<std::int64_t> frames;
    for (const auto& f : detections.frames) {
        frames.insert(f.frame);
    }
    for (const auto& f : truth.frames) {
        frames.insert(f.frame);
    }
    for (auto frame : frames) {
        FrameEval fe;
        fe.frame = frame;
        const auto& dets = cows_at(detections, frame);
        fe.detected = dets.size();
        for (const auto& c : dets) {
            fe.valid += validate_cow(c, model, theta).valid;
        }
        if (truth.find(frame)) {
            const auto& tc = cows_at(truth, frame);
            fe.truth = tc.size();
            const auto pairs = pair_cows(dets, tc);
            fe.matched = pairs.size();
            for (const auto& p : pairs) {
                fe.mean_dice += p.dice;
            }
            if (fe.matched > 0) {
                fe.mean_dice /= static_cast<double>(fe.matched);
            }
        }
        r.detected_cows += fe.detected;
        r.valid_cows += fe.valid;
        r.per_frame.push_back(fe);
    }
    r.vcp = r.detected_cows > 0 ? static_cast<double>(r.valid_cows) / static_cast<double>(r.detected_cows) : 0.0;

    double tc_sum = 0.0;
    for (const auto& t : tracks_from_sequence(detections)) {
        if (t.frames.size() < 2) {
            continue;
        }
        TrackEval te{t.id, t.first_frame(), t.last_frame(), t.frames.size(), temporal_consistency(t)};
        tc_sum += te.tc;
        r.per_track.push_back(te);
    }
    r.tc = r.per_track.empty() ? 0.0 : tc_sum / static_cast<double>(r.per_track.size());
    return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : r.per_frame) {
        frames.push_back({{"frame", f.frame},
                          {"detected", f.detected},
                          {"truth", f.truth},
                          {"matched", f.matched},
                          {"mean_dice", f.mean_dice},
                          {"valid", f.valid}});
    }
    nlohmann::json tracks = nlohmann::json::array();
    for (const auto& t : r.per_track) {
        tracks.push_back({{"id", t.id}, {"frames", {t.first, t.last}}, {"length", t.length}, {"tc", t.tc}});
    }
    return {
        {"body_f1", r.body_f1},
        {"leghoof_f1", r.leghoof_f1},
        {"vcp", r.vcp},
        {"tc", r.tc},
        {"counts",
         {{"detected_cows", r.detected_cows},
          {"valid_cows", r.valid_cows},
          {"truth_cows", r.body.truth},
          {"matched_cows", r.body.matched},
          {"mean_dice", r.body.mean_dice},
          {"count_f1", r.body.count_f1},
          {"leghoof_detected", r.leghoof.detected},
          {"leghoof_labelled", r.leghoof.labelled},
          {"leghoof_matched", r.leghoof.matched}}},
        {"per_frame", frames},
        {"per_track", tracks},
    };
}

std::string report_table(const EvalReport& r) {
    std::ostringstream out;
    char line[128];
    const auto row = [&](const char* name, double value, const std::string& detail) {
        std::snprintf(line, sizeof(line), "%-14s %10.4f  %s\n", name, value, detail.c_str());
        out << line;
    };
    std::snprintf(line, sizeof(line), "%-14s %10s  %s\n", "metric", "value", "detail");
    out << line;
    row("body_f1", r.body_f1,
        "matched " + std::to_string(r.body.matched) + " of " + std::to_string(r.body.truth) + " true / " +
            std::to_string(r.body.detected) + " detected");
    row("leghoof_f1", r.leghoof_f1,
        "matched " + std::to_string(r.leghoof.matched) + " of " + std::to_string(r.leghoof.labelled) +
            " labelled / " + std::to_string(r.leghoof.detected) + " detected");
    row("vcp", r.vcp, std::to_string(r.valid_cows) + " valid of " + std::to_string(r.detected_cows));
    row("tc", r.tc, std::to_string(r.per_track.size()) + " tracks");
    return out.str();
}

} // namespace cowpose
