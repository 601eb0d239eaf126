#pragma once

// Shared scenes and helpers for the unit and acceptance tests.

#include "cowpose/cli.hpp"
#include "cowpose/constraint_model.hpp"
#include "cowpose/grouping.hpp"
#include "cowpose/synth.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace fixture {

using namespace cowpose;

inline CowSkeleton template_skeleton(const CowTemplate& tmpl, Vec2 center, double t = 0.0) {
    CowSkeleton s;
    const auto pose = tmpl.pose(center, t);
    for (std::size_t j = 0; j < kJointCount; ++j) {
        s.joints[j] = {pose[j], 1.0, JointStatus::detected};
    }
    s.recompute_center();
    return s;
}

// One cow walking left to right through a 1000x640 frame, no noise at all.
inline SceneConfig clean_scene(int frames = 50, std::uint64_t seed = 42) {
    SceneConfig c;
    c.width = 1000;
    c.height = 640;
    c.frames = frames;
    c.seed = seed;
    c.cows = {{{400.0, 130.0}, 4.0, 0.0}};
    return c;
}

// Two cows 1.6 body lengths apart, a fence rail hiding the nose and the bottom
// of the neck, missing and spurious peaks, jittered joints.
inline SceneConfig hard_scene(int frames = 24, std::uint64_t seed = 2024) {
    SceneConfig c;
    c.width = 1800;
    c.height = 640;
    c.frames = frames;
    c.seed = seed;
    c.cows = {{{400.0, 130.0}, 4.0, 0.0}, {{1380.0, 130.0}, 4.0, 1.3}};
    c.dropout = 0.2;
    c.spurious = 10;
    c.fences = {{0.0, 140.0, 1799.0, 200.0}};
    c.kappa = 0.0;
    c.jitter = 2.0;
    return c;
}

// Jittered single-cow labels for fitting the constraint model. Only the ground
// truth of this scene is used, so nothing is rendered.
inline SceneConfig training_scene(double jitter = 3.0, int frames = 40, std::uint64_t seed = 7) {
    SceneConfig c;
    c.width = 1000;
    c.height = 640;
    c.frames = frames;
    c.seed = seed;
    c.jitter = jitter;
    c.cows = {{{400.0, 130.0}, 4.0, 0.0}};
    return c;
}

inline ConstraintModel trained_model(const SceneConfig& training = training_scene()) {
    SceneGenerator gen(training);
    const auto labels = gen.truth().to_sequence(training.width, training.height);
    std::vector<CowSkeleton> cows;
    for (const auto& f : labels.frames) {
        cows.insert(cows.end(), f.cows.begin(), f.cows.end());
    }
    return fit_constraints(cows).model;
}

struct PipelineRun {
    Sequence truth;
    Sequence detections; // full pipeline, tracked and filtered
    Sequence raw;        // per-frame detections before tracking
    Sequence baseline;   // arg-max-per-plane selection
};

// In-memory synth -> detect -> track -> filter, frame by frame.
inline PipelineRun run_pipeline(const SceneGenerator& gen, const ConstraintModel& model,
                                const RunConfig& config = {}) {
    const auto& sc = gen.config();
    PipelineRun run;
    run.truth = gen.truth().to_sequence(sc.width, sc.height);
    run.raw.width = run.baseline.width = sc.width;
    run.raw.height = run.baseline.height = sc.height;
    std::vector<FrameDetections> per_frame;
    for (int t = 0; t < sc.frames; ++t) {
        const auto maps = gen.render(t);
        auto cows = detect_frame(maps.color, maps.diff, model, config.detect_params());
        for (auto& c : cows) {
            c.frame_index = t;
        }
        run.raw.frames.push_back({t, cows});
        per_frame.push_back({t, cows});
        auto base = detect_frame_max_only(maps.color, config.nms_threshold);
        for (auto& c : base) {
            c.frame_index = t;
        }
        run.baseline.frames.push_back({t, base});
    }
    run.detections = track_sequence(model, per_frame, config);
    run.detections.width = sc.width;
    run.detections.height = sc.height;
    return run;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const char* env = std::getenv("COWPOSE_TEST_TMP");
    const std::filesystem::path root = env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "cowpose_tests";
    const auto dir = root / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

} // namespace fixture
