#pragma once

#include "cowpose/confmap.hpp"
#include "cowpose/constraint_model.hpp"
#include "cowpose/geometry.hpp"
#include "cowpose/joints.hpp"
#include "cowpose/sequence_io.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cowpose {

// splitmix64 state stepping with xoshiro256** output: a fixed algorithm so a seed
// produces the same stream on every platform. Distribution transforms are
// implemented here too (the standard library's are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    // Independent stream for (seed, a, b, c).
    static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

    std::uint64_t next();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double normal();                       // standard normal, Box-Muller

private:
    std::array<std::uint64_t, 4> s_{};
};

// Axis-aligned obstacle; joints whose position falls inside are occluded.
struct Fence {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    bool covers(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

struct CowSpec {
    Vec2 start;         // center at frame 0
    double speed = 0.0; // px/frame, left to right
    double phase = 0.0; // gait phase offset, radians
};

struct SceneConfig {
    std::uint32_t width = 1000;
    std::uint32_t height = 600;
    std::vector<CowSpec> cows;
    int frames = 10;
    std::uint64_t seed = 0;
    double blob_sigma = 8.0;
    double dropout = 0.0;
    int spurious = 0; // per plane, per stream
    std::vector<Fence> fences;
    double kappa = 1.0;  // intensity kept for joints behind a fence
    double jitter = 0.0; // px, per coordinate
    double template_scale = 1.0;
};

nlohmann::json config_to_json(const SceneConfig& config);
// Unknown keys are rejected.
SceneConfig config_from_json(const nlohmann::json& doc);

// Bundled side-view cow geometry: upper-body offsets from the center plus a
// two-segment swinging limb model.
struct CowTemplate {
    std::array<Vec2, kUpperBodyCount> upper{};
    double upper_leg = 120.0;
    double lower_leg = 130.0;
    double swing_amplitude_deg = 25.0;
    double swing_period = 24.0; // frames per stride
    double lower_swing_ratio = 0.4;
    std::array<double, 4> limb_phase{}; // kLimbs order

    static CowTemplate standard(double scale = 1.0);
    // Template whose upper body follows a fitted model's mean offsets.
    static CowTemplate from_model(const ConstraintModel& model);

    double body_length() const;

    // Noise-free joint positions for a cow centered at `center` at gait time `t`;
    // `phase` shifts the whole gait cycle (radians).
    std::array<Vec2, kJointCount> pose(Vec2 center, double t, double phase = 0.0) const;
};

// Constraint model with the template's offsets and covariance variance*I + epsilon*I.
ConstraintModel template_model(const CowTemplate& tmpl, double variance = 0.0);

struct TruthCow {
    int identity = 0;
    std::array<Vec2, kJointCount> joints{};
    std::array<bool, kJointCount> occluded{};
};

struct TruthFrame {
    std::int64_t frame = 0;
    std::vector<TruthCow> cows;
};

struct GroundTruth {
    std::vector<TruthFrame> frames;

    // Detection-schema labels: occluded joints carry status "occluded".
    Sequence to_sequence(std::uint32_t width, std::uint32_t height) const;
};

struct FrameMaps {
    ConfidenceMapStack color;
    ConfidenceMapStack diff;
};

inline constexpr double kNearPeakLow = 0.85;

// Deterministic scene: ground truth is computed up front, confidence maps are
// rendered per frame on demand from (seed, frame) substreams.
class SceneGenerator {
public:
    explicit SceneGenerator(SceneConfig config);
    SceneGenerator(SceneConfig config, CowTemplate tmpl);

    const SceneConfig& config() const { return config_; }
    const CowTemplate& cow_template() const { return template_; }
    const GroundTruth& truth() const { return truth_; }

    FrameMaps render(std::int64_t frame) const;

private:
    void validate() const;
    Vec2 center_at(std::size_t cow, double t) const;

    SceneConfig config_;
    CowTemplate template_;
    GroundTruth truth_;
};

struct Scene {
    GroundTruth truth;
    std::vector<FrameMaps> frames;
};

// Renders every frame. Only sensible for small scenes.
Scene generate_scene(const SceneConfig& config);

// Writes frame_%06d.{color,diff}.cmap, truth.json and manifest.json into `dir`
// and returns the manifest.
nlohmann::json write_dataset(const SceneGenerator& scene, const std::filesystem::path& dir);

} // namespace cowpose
