#include "cowpose/cli.hpp"

#include "cowpose/confmap.hpp"
#include "cowpose/error.hpp"
#include "cowpose/json_util.hpp"
#include "cowpose/metrics.hpp"
#include "cowpose/render.hpp"
#include "cowpose/synth.hpp"
#include "cowpose/temporal.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

namespace cowpose {

DetectParams RunConfig::detect_params() const {
    DetectParams p;
    p.nms_radius = nms_radius;
    p.nms_threshold = nms_threshold;
    p.grouping.bandwidth_factor = bandwidth_factor;
    return p;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json doc = {
        {"model", c.model},
        {"input", c.input},
        {"output", c.output},
        {"nms_radius", c.nms_radius},
        {"nms_threshold", c.nms_threshold},
        {"bandwidth_factor", c.bandwidth_factor},
        {"median_window", c.median_window},
        {"gate_factor", c.gate_factor},
        {"theta_factor", c.theta_factor},
        {"leghoof_threshold", c.leghoof_threshold},
        {"fps", c.fps},
        {"workers", c.workers},
    };
    doc["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
    return doc;
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw FormatError("run config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "model",        "input",       "output",       "nms_radius",        "nms_threshold", "bandwidth_factor",
        "median_window", "gate_factor", "theta_factor", "leghoof_threshold", "fps",           "workers",
        "seed",
    };
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            throw FormatError("unknown run config key '" + key + "'");
        }
    }
    try {
        RunConfig c;
        c.model = doc.value("model", c.model);
        c.input = doc.value("input", c.input);
        c.output = doc.value("output", c.output);
        c.nms_radius = doc.value("nms_radius", c.nms_radius);
        c.nms_threshold = doc.value("nms_threshold", c.nms_threshold);
        c.bandwidth_factor = doc.value("bandwidth_factor", c.bandwidth_factor);
        c.median_window = doc.value("median_window", c.median_window);
        c.gate_factor = doc.value("gate_factor", c.gate_factor);
        c.theta_factor = doc.value("theta_factor", c.theta_factor);
        c.leghoof_threshold = doc.value("leghoof_threshold", c.leghoof_threshold);
        c.fps = doc.value("fps", c.fps);
        c.workers = doc.value("workers", c.workers);
        if (doc.contains("seed") && !doc.at("seed").is_null()) {
            c.seed = doc.at("seed").get<std::uint64_t>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed run config: ") + e.what());
    }
}

std::vector<CmapFrameFiles> list_cmap_frames(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw IoError("input directory " + dir.string() + " does not exist");
    }
    static const std::regex pattern(R"(frame_(\d{6,})\.(color|diff)\.cmap)");
    std::map<std::uint64_t, CmapFrameFiles> found;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        std::smatch m;
        if (!entry.is_regular_file() || !std::regex_match(name, m, pattern)) {
            continue;
        }
        const auto frame = std::stoull(m[1].str());
        auto& f = found[frame];
        f.frame = frame;
        (m[2] == "color" ? f.color : f.diff) = entry.path();
    }
    if (found.empty()) {
        throw IoError("no cmap frames found in " + dir.string());
    }
    std::vector<CmapFrameFiles> frames;
    for (auto& [index, f] : found) {
        if (f.color.empty() || f.diff.empty()) {
            throw IoError("frame " + std::to_string(index) + " lacks its " + (f.color.empty() ? "color" : "diff") +
                          " stream in " + dir.string());
        }
        if (!frames.empty() && index != frames.back().frame + 1) {
            throw IoError("frame " + std::to_string(frames.back().frame + 1) + " missing from " + dir.string());
        }
        frames.push_back(f);
    }
    return frames;
}

namespace {

std::vector<CowSkeleton> detect_one(const ConstraintModel& model, const CmapFrameFiles& files,
                                    const DetectParams& params) {
    auto color = read_cmap(files.color);
    auto diff = read_cmap(files.diff);
    if (color.stream != Stream::color || diff.stream != Stream::diff) {
        throw FormatError(files.color.string() + ": stream tag does not match the file name");
    }
    if (color.frame_index != files.frame || diff.frame_index != files.frame) {
        throw FormatError(files.color.string() + ": frame index does not match the file name");
    }
    return detect_frame(color, diff, model, params);
}

void log_line(std::ostream* log, const std::string& line) {
    if (log) {
        *log << line << '\n';
    }
}

} // namespace

Sequence detect_sequence(const ConstraintModel& model, const std::vector<CmapFrameFiles>& frames,
                         const RunConfig& config, std::ostream* log) {
    if (config.median_window < 1 || config.median_window % 2 == 0) {
        throw InvalidArgument("median window must be a positive odd integer");
    }
    const auto params = config.detect_params();
    const std::size_t workers = static_cast<std::size_t>(std::max(1, config.workers));

    std::vector<std::vector<CowSkeleton>> per_frame(frames.size());
    for (std::size_t begin = 0; begin < frames.size(); begin += workers) {
        const std::size_t end = std::min(frames.size(), begin + workers);
        if (workers == 1) {
            per_frame[begin] = detect_one(model, frames[begin], params);
            continue;
        }
        std::vector<std::future<std::vector<CowSkeleton>>> jobs;
        for (std::size_t i = begin; i < end; ++i) {
            jobs.push_back(std::async(std::launch::async, detect_one, std::cref(model), std::cref(frames[i]),
                                      std::cref(params)));
        }
        for (std::size_t i = begin; i < end; ++i) {
            per_frame[i] = jobs[i - begin].get();
        }
    }
    std::size_t cow_count = 0;
    for (const auto& f : per_frame) {
        cow_count += f.size();
    }
    log_line(log, "detect: " + std::to_string(frames.size()) + " frames, " + std::to_string(cow_count) + " cows");

    std::vector<FrameDetections> detections;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        detections.push_back({static_cast<std::int64_t>(frames[i].frame), std::move(per_frame[i])});
    }
    return track_sequence(model, detections, config, log);
}

Sequence track_sequence(const ConstraintModel& model, const std::vector<FrameDetections>& frames,
                        const RunConfig& config, std::ostream* log) {
    if (config.median_window < 1 || config.median_window % 2 == 0) {
        throw InvalidArgument("median window must be a positive odd integer");
    }
    Tracker tracker(config.gate_factor * model.body_length());
    for (const auto& f : frames) {
        tracker.update(f.frame, f.cows);
    }
    std::vector<Track> tracks;
    for (const auto& t : tracker.tracks()) {
        tracks.push_back(filter_track(t, config.median_window, model.body_length()));
    }
    log_line(log, "track: " + std::to_string(tracks.size()) + " tracks, median window " +
                      std::to_string(config.median_window));

    Sequence seq;
    std::map<std::int64_t, std::vector<CowSkeleton>> by_frame;
    for (const auto& f : frames) {
        by_frame[f.frame];
    }
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& t : tracks) {
        for (const auto& cow : t.frames) {
            by_frame[cow.frame_index].push_back(cow);
        }
        nlohmann::json entry = {{"id", t.id}, {"frames", {t.first_frame(), t.last_frame()}}};
        entry["speed_px_s"] = t.frames.size() >= 2 ? nlohmann::json(track_speed(t, config.fps)) : nlohmann::json(nullptr);
        summary.push_back(entry);
    }
    for (auto& [frame, cows] : by_frame) {
        std::stable_sort(cows.begin(), cows.end(), [](const CowSkeleton& a, const CowSkeleton& b) {
            return std::tie(a.center.x, a.center.y) < std::tie(b.center.x, b.center.y);
        });
        seq.frames.push_back({frame, std::move(cows)});
    }
    seq.extra["config"] = run_config_to_json(config);
    seq.extra["tracks"] = std::move(summary);
    return seq;
}

namespace {

struct ParamFlags {
    CLI::Option* nms_radius = nullptr;
    CLI::Option* nms_threshold = nullptr;
    CLI::Option* bandwidth_factor = nullptr;
    CLI::Option* median_window = nullptr;
    CLI::Option* gate_factor = nullptr;
    CLI::Option* theta_factor = nullptr;
    CLI::Option* leghoof_threshold = nullptr;
    CLI::Option* fps = nullptr;
    CLI::Option* workers = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* model = nullptr;
    CLI::Option* input = nullptr;
    CLI::Option* output = nullptr;
};

// Values given on the command line; copied over the config file afterwards.
struct FlagValues {
    RunConfig values;
    std::uint64_t seed = 0;
    std::string config_path;
};

ParamFlags add_param_flags(CLI::App& cmd, FlagValues& v) {
    ParamFlags f;
    cmd.add_option("--config", v.config_path, "Run configuration JSON");
    f.model = cmd.add_option("--model", v.values.model, "Constraint model JSON");
    f.input = cmd.add_option("--input", v.values.input, "Input file or directory");
    f.output = cmd.add_option("--output", v.values.output, "Output file or directory");
    f.nms_radius = cmd.add_option("--nms-radius", v.values.nms_radius, "NMS radius in pixels");
    f.nms_threshold = cmd.add_option("--nms-threshold", v.values.nms_threshold, "NMS score threshold");
    f.bandwidth_factor =
        cmd.add_option("--bandwidth-factor", v.values.bandwidth_factor, "Mean-shift bandwidth / body length");
    f.median_window = cmd.add_option("--median-window", v.values.median_window, "Temporal median window (odd)");
    f.gate_factor = cmd.add_option("--gate-factor", v.values.gate_factor, "Track matching gate / body length");
    f.theta_factor = cmd.add_option("--theta-factor", v.values.theta_factor, "Frechet threshold / body length");
    f.leghoof_threshold =
        cmd.add_option("--leghoof-threshold", v.values.leghoof_threshold, "Leg-hoof match distance in pixels");
    f.fps = cmd.add_option("--fps", v.values.fps, "Frames per second");
    f.workers = cmd.add_option("--workers", v.values.workers, "Concurrent frame workers");
    f.seed = cmd.add_option("--seed", v.seed, "Random seed override");
    return f;
}

RunConfig effective_config(const ParamFlags& f, const FlagValues& v) {
    RunConfig c = v.config_path.empty() ? RunConfig{} : run_config_from_json(read_json_file(v.config_path));
    const auto given = [](CLI::Option* o) { return o && o->count() > 0; };
    if (given(f.model)) c.model = v.values.model;
    if (given(f.input)) c.input = v.values.input;
    if (given(f.output)) c.output = v.values.output;
    if (given(f.nms_radius)) c.nms_radius = v.values.nms_radius;
    if (given(f.nms_threshold)) c.nms_threshold = v.values.nms_threshold;
    if (given(f.bandwidth_factor)) c.bandwidth_factor = v.values.bandwidth_factor;
    if (given(f.median_window)) c.median_window = v.values.median_window;
    if (given(f.gate_factor)) c.gate_factor = v.values.gate_factor;
    if (given(f.theta_factor)) c.theta_factor = v.values.theta_factor;
    if (given(f.leghoof_threshold)) c.leghoof_threshold = v.values.leghoof_threshold;
    if (given(f.fps)) c.fps = v.values.fps;
    if (given(f.workers)) c.workers = v.values.workers;
    if (given(f.seed)) c.seed = v.seed;
    return c;
}

std::string require(const std::string& value, const char* what) {
    if (value.empty()) {
        throw CLI::RequiredError(what);
    }
    return value;
}

std::filesystem::path existing(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("no such file: " + path);
    }
    return path;
}

int cmd_fit(const RunConfig& c, std::ostream& err) {
    const auto labels = load_sequence(existing(require(c.input, "--input (labels)")));
    std::vector<CowSkeleton> cows;
    for (const auto& f : labels.frames) {
        cows.insert(cows.end(), f.cows.begin(), f.cows.end());
    }
    const auto fit = fit_constraints(cows);
    err << "fit: " << fit.model.frames_used() << " labelings used, " << fit.frames_skipped << " skipped\n";
    const auto out = require(c.output, "--output");
    save_model(fit.model, out);
    err << "fit: body length " << fit.model.body_length() << " px, wrote " << out << '\n';
    return kExitOk;
}

int cmd_synth(const std::string& scene_path, const RunConfig& c, std::ostream& err) {
    auto scene = config_from_json(read_json_file(existing(require(scene_path, "--config (scene)"))));
    if (c.seed) {
        scene.seed = *c.seed;
    }
    SceneGenerator gen(scene);
    err << "synth: " << scene.frames << " frames, " << scene.cows.size() << " cows, seed " << scene.seed << '\n';
    const auto manifest = write_dataset(gen, require(c.output, "--output"));
    err << "synth: wrote " << manifest.at("files").size() + 1 << " files to " << c.output << '\n';
    return kExitOk;
}

int cmd_detect(const RunConfig& c, std::ostream& err) {
    const auto model = load_model(existing(require(c.model, "--model")));
    const auto frames = list_cmap_frames(require(c.input, "--input"));
    err << "detect: " << frames.size() << " frames from " << c.input << '\n';
    const auto out = require(c.output, "--output");
    auto seq = detect_sequence(model, frames, c, &err);
    if (!frames.empty()) {
        // Frame size from the first color map header.
        const auto first = read_cmap(frames.front().color);
        seq.width = first.width;
        seq.height = first.height;
    }
    save_sequence(seq, out);
    err << "detect: wrote " << out << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& detections_path, const std::string& truth_path, const RunConfig& c,
             std::ostream& out, std::ostream& err) {
    const auto model = load_model(existing(require(c.model, "--model")));
    const auto detections = load_sequence(existing(require(detections_path, "DETECTIONS")));
    const auto truth = load_sequence(existing(require(truth_path, "TRUTH")));
    EvalParams params{c.theta_factor, c.leghoof_threshold};
    const auto report = evaluate(detections, truth, model, params);
    err << "eval: " << truth.frames.size() << " truth frames, " << report.detected_cows << " detected cows\n";
    auto doc = report_to_json(report);
    doc["config"] = run_config_to_json(c);
    write_json_file(doc, require(c.output, "--output"));
    out << report_table(report);
    return kExitOk;
}

int cmd_render(const std::string& detections_path, bool svg, const RunConfig& c, std::ostream& err) {
    const auto detections = load_sequence(existing(require(detections_path, "DETECTIONS")));
    if (detections.width == 0 || detections.height == 0) {
        throw FormatError(detections_path + ": detections lack frame dimensions");
    }
    const std::filesystem::path dir = require(c.output, "--output");
    std::filesystem::create_directories(dir);
    for (const auto& f : detections.frames) {
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%06lld", static_cast<long long>(f.frame));
        write_ppm(render_frame(f, detections.width, detections.height), dir / (std::string(name) + ".ppm"));
        if (svg) {
            std::ofstream s(dir / (std::string(name) + ".svg"), std::ios::binary | std::ios::trunc);
            s << render_svg(f, detections.width, detections.height);
            if (!s) {
                throw IoError("failed writing " + (dir / (std::string(name) + ".svg")).string());
            }
        }
    }
    err << "render: " << detections.frames.size() << " frames to " << dir.string() << '\n';
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-cow keypoint grouping, tracking and evaluation", "cowpose"};
    app.require_subcommand(1);

    FlagValues fit_v, synth_v, detect_v, eval_v, render_v;
    std::string labels_path, scene_path, det_path, truth_path, render_path;
    bool svg = false;

    auto* fit = app.add_subcommand("fit", "Fit the keypoint constraint model from labels");
    const auto fit_f = add_param_flags(*fit, fit_v);
    fit->add_option("labels", labels_path, "Ground-truth labels JSON");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("scene", scene_path, "Scene configuration JSON (same as --config)");
    const auto synth_f = add_param_flags(*synth, synth_v);

    auto* detect = app.add_subcommand("detect", "Detect and track cows in a directory of confidence maps");
    const auto detect_f = add_param_flags(*detect, detect_v);

    auto* eval = app.add_subcommand("eval", "Score detections against ground truth");
    eval->add_option("detections", det_path, "Detections JSON");
    eval->add_option("truth", truth_path, "Ground-truth labels JSON");
    const auto eval_f = add_param_flags(*eval, eval_v);

    auto* render = app.add_subcommand("render", "Draw detections as PPM images");
    render->add_option("detections", render_path, "Detections JSON");
    render->add_flag("--svg", svg, "Also write SVG overlays");
    const auto render_f = add_param_flags(*render, render_v);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (fit->parsed()) {
            auto c = effective_config(fit_f, fit_v);
            if (!labels_path.empty()) {
                c.input = labels_path;
            }
            return cmd_fit(c, err);
        }
        if (synth->parsed()) {
            // For synth, --config names the scene description rather than a run config.
            const std::string scene = scene_path.empty() ? synth_v.config_path : scene_path;
            synth_v.config_path.clear();
            return cmd_synth(scene, effective_config(synth_f, synth_v), err);
        }
        if (detect->parsed()) {
            return cmd_detect(effective_config(detect_f, detect_v), err);
        }
        if (eval->parsed()) {
            auto c = effective_config(eval_f, eval_v);
            return cmd_eval(det_path.empty() ? c.input : det_path, truth_path, c, out, err);
        }
        if (render->parsed()) {
            auto c = effective_config(render_f, render_v);
            return cmd_render(render_path.empty() ? c.input : render_path, svg, c, err);
        }
    } catch (const CLI::RequiredError& e) {
        err << "error: missing " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

} // namespace cowpose
