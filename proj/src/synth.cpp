#include "cowpose/synth.hpp"

#include "cowpose/error.hpp"
#include "cowpose/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace cowpose {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t st = seed;
    for (auto& w : s_) {
        w = splitmix64(st);
    }
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // Mix the seed before folding in the keys; a raw xor would make
    // (seed, frame) pairs such as (1, 22) and (2, 21) collide.
    std::uint64_t st0 = seed;
    std::uint64_t h = splitmix64(st0);
    for (std::uint64_t v : {a, b, c}) {
        std::uint64_t st = h ^ v;
        h = splitmix64(st);
    }
    return Rng(h);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

nlohmann::json config_to_json(const SceneConfig& c) {
    nlohmann::json cows = nlohmann::json::array();
    for (const auto& cow : c.cows) {
        cows.push_back({{"start", {cow.start.x, cow.start.y}}, {"speed", cow.speed}, {"phase", cow.phase}});
    }
    nlohmann::json fences = nlohmann::json::array();
    for (const auto& f : c.fences) {
        fences.push_back({f.x0, f.y0, f.x1, f.y1});
    }
    return {
        {"width", c.width},       {"height", c.height},   {"cows", cows},
        {"frames", c.frames},     {"seed", c.seed},       {"blob_sigma", c.blob_sigma},
        {"dropout", c.dropout},   {"spurious", c.spurious}, {"fences", fences},
        {"kappa", c.kappa},       {"jitter", c.jitter},   {"template_scale", c.template_scale},
    };
}

SceneConfig config_from_json(const nlohmann::json& doc) {
    static const std::set<std::string> known = {"width",   "height", "cows",   "frames", "seed",  "blob_sigma",
                                                "dropout", "spurious", "fences", "kappa",  "jitter", "template_scale"};
    if (!doc.is_object()) {
        throw FormatError("scene config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            throw FormatError("unknown scene config key '" + key + "'");
        }
    }
    try {
        SceneConfig c;
        c.width = doc.value("width", c.width);
        c.height = doc.value("height", c.height);
        c.frames = doc.value("frames", c.frames);
        c.seed = doc.value("seed", c.seed);
        c.blob_sigma = doc.value("blob_sigma", c.blob_sigma);
        c.dropout = doc.value("dropout", c.dropout);
        c.spurious = doc.value("spurious", c.spurious);
        c.kappa = doc.value("kappa", c.kappa);
        c.jitter = doc.value("jitter", c.jitter);
        c.template_scale = doc.value("template_scale", c.template_scale);
        if (doc.contains("cows")) {
            for (const auto& cow : doc.at("cows")) {
                for (const auto& [key, value] : cow.items()) {
                    if (key != "start" && key != "speed" && key != "phase") {
                        throw FormatError("unknown cow key '" + key + "'");
                    }
                }
                const auto& s = cow.at("start");
                c.cows.push_back({{s.at(0).get<double>(), s.at(1).get<double>()},
                                  cow.value("speed", 0.0),
                                  cow.value("phase", 0.0)});
            }
        }
        if (doc.contains("fences")) {
            for (const auto& f : doc.at("fences")) {
                c.fences.push_back(
                    {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>(), f.at(3).get<double>()});
            }
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed scene config: ") + e.what());
    }
}

CowTemplate CowTemplate::standard(double scale) {
    // Hand-placed side view, head to the right, roughly 600 x 340 px.
    std::array<Vec2, kUpperBodyCount> abs{};
    abs[index(JointId::NOSE)] = {600, 120};
    abs[index(JointId::HEAD)] = {560, 20};
    abs[index(JointId::NECK_TOP)] = {480, 0};
    abs[index(JointId::NECK_BOTTOM)] = {470, 150};
    abs[index(JointId::SHOULDER)] = {400, -20};
    abs[index(JointId::SPINE)] = {200, -10};
    abs[index(JointId::TAILHEAD)] = {0, 0};
    abs[index(JointId::MID_THIGH)] = {30, 280};
    abs[index(JointId::SHOULDER_BOTTOM)] = {390, 320};
    const Vec2 c = mean(abs);

    CowTemplate t;
    for (std::size_t j = 0; j < kUpperBodyCount; ++j) {
        t.upper[j] = (abs[j] - c) * scale;
    }
    t.upper_leg *= scale;
    t.lower_leg *= scale;
    t.limb_phase = {0.0, std::numbers::pi, std::numbers::pi, 0.0};
    return t;
}

CowTemplate CowTemplate::from_model(const ConstraintModel& model) {
    CowTemplate t = standard(model.body_length() / standard().body_length());
    for (auto j : kUpperBodyJoints) {
        t.upper[index(j)] = model.gaussian(j).mean_offset;
    }
    return t;
}

double CowTemplate::body_length() const {
    return distance(upper[index(JointId::NOSE)], upper[index(JointId::TAILHEAD)]);
}

std::array<Vec2, kJointCount> CowTemplate::pose(Vec2 center, double t, double phase) const {
    std::array<Vec2, kJointCount> out{};
    for (std::size_t j = 0; j < kUpperBodyCount; ++j) {
        out[j] = center + upper[j];
    }
    const double amp = swing_amplitude_deg * std::numbers::pi / 180.0;
    for (std::size_t k = 0; k < kLimbs.size(); ++k) {
        const auto& limb = kLimbs[k];
        const double theta = amp * std::sin(2.0 * std::numbers::pi * t / swing_period + limb_phase[k] + phase);
        const Vec2 anchor = out[index(limb.anchor)];
        const Vec2 leg = anchor + Vec2{std::sin(theta), std::cos(theta)} * upper_leg;
        const double lower = theta * lower_swing_ratio;
        out[index(limb.leg)] = leg;
        out[index(limb.hoof)] = leg + Vec2{std::sin(lower), std::cos(lower)} * lower_leg;
    }
    return out;
}

ConstraintModel template_model(const CowTemplate& tmpl, double variance) {
    std::array<JointGaussian, kUpperBodyCount> joints{};
    const double v = variance + kDefaultCovarianceEpsilon;
    for (std::size_t j = 0; j < kUpperBodyCount; ++j) {
        joints[j] = {tmpl.upper[j], {v, 0.0, v}};
    }
    return ConstraintModel(joints, kDefaultCovarianceEpsilon, 0);
}

Sequence GroundTruth::to_sequence(std::uint32_t width, std::uint32_t height) const {
    Sequence seq;
    seq.width = width;
    seq.height = height;
    for (const auto& f : frames) {
        SequenceFrame sf;
        sf.frame = f.frame;
        for (const auto& cow : f.cows) {
            CowSkeleton s;
            s.frame_index = f.frame;
            s.track_id = cow.identity;
            for (std::size_t j = 0; j < kJointCount; ++j) {
                s.joints[j] = {cow.joints[j], 1.0, cow.occluded[j] ? JointStatus::occluded : JointStatus::detected};
            }
            s.recompute_center();
            sf.cows.push_back(s);
        }
        seq.frames.push_back(std::move(sf));
    }
    return seq;
}

namespace {

enum Purpose : std::uint64_t { kJitter = 1, kRender = 2 };

void render_blob(std::span<float> plane, std::uint32_t width, std::uint32_t height, Vec2 at, double peak,
                 double sigma) {
    if (!(peak > 0.0)) {
        return;
    }
    const double reach = std::ceil(4.0 * sigma);
    const long x0 = std::max(0L, static_cast<long>(std::floor(at.x - reach)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(at.x + reach)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(at.y - reach)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(at.y + reach)));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (long y = y0; y <= y1; ++y) {
        const double dy = static_cast<double>(y) - at.y;
        float* row = plane.data() + static_cast<std::size_t>(y) * width;
        for (long x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) - at.x;
            const auto v = static_cast<float>(peak * std::exp(-(dx * dx + dy * dy) * inv));
            row[x] = std::max(row[x], v);
        }
    }
}

} // namespace

SceneGenerator::SceneGenerator(SceneConfig config) : SceneGenerator(config, CowTemplate::standard(config.template_scale)) {}

SceneGenerator::SceneGenerator(SceneConfig config, CowTemplate tmpl) : config_(std::move(config)), template_(tmpl) {
    validate();
    for (int t = 0; t < config_.frames; ++t) {
        TruthFrame tf;
        tf.frame = t;
        for (std::size_t k = 0; k < config_.cows.size(); ++k) {
            TruthCow cow;
            cow.identity = static_cast<int>(k);
            cow.joints = template_.pose(center_at(k, t), t, config_.cows[k].phase);
            Rng rng = Rng::substream(config_.seed, static_cast<std::uint64_t>(t), kJitter, k);
            for (std::size_t j = 0; j < kJointCount; ++j) {
                const double jx = rng.normal();
                const double jy = rng.normal();
                cow.joints[j] += Vec2{jx, jy} * config_.jitter;
                cow.occluded[j] = std::any_of(config_.fences.begin(), config_.fences.end(),
                                              [&](const Fence& f) { return f.covers(cow.joints[j]); });
            }
            tf.cows.push_back(cow);
        }
        truth_.frames.push_back(std::move(tf));
    }
}

Vec2 SceneGenerator::center_at(std::size_t cow, double t) const {
    const auto& spec = config_.cows[cow];
    return spec.start + Vec2{spec.speed * t, 0.0};
}

void SceneGenerator::validate() const {
    const auto& c = config_;
    const auto fail = [](const std::string& msg) { throw InvalidArgument("scene config: " + msg); };
    if (c.width == 0 || c.height == 0) {
        fail("width and height must be positive");
    }
    if (c.frames < 0) {
        fail("frame count must be non-negative");
    }
    if (!(c.blob_sigma > 0.0)) {
        fail("blob_sigma must be positive");
    }
    if (!(c.dropout >= 0.0 && c.dropout <= 1.0)) {
        fail("dropout must lie in [0, 1]");
    }
    if (!(c.kappa >= 0.0 && c.kappa <= 1.0)) {
        fail("kappa must lie in [0, 1]");
    }
    if (c.spurious < 0) {
        fail("spurious peak count must be non-negative");
    }
    if (!(c.jitter >= 0.0)) {
        fail("jitter must be non-negative");
    }
    if (!(c.template_scale > 0.0)) {
        fail("template_scale must be positive");
    }
    const double min_gap = 0.5 * template_.body_length();
    for (std::size_t a = 0; a < c.cows.size(); ++a) {
        for (std::size_t b = a + 1; b < c.cows.size(); ++b) {
            if (distance(c.cows[a].start, c.cows[b].start) < min_gap) {
                fail("cows " + std::to_string(a) + " and " + std::to_string(b) +
                     " overlap at spawn (closer than half a body length)");
            }
        }
    }
    for (std::size_t k = 0; k < c.cows.size(); ++k) {
        for (int t = 0; t < c.frames; ++t) {
            for (const auto& p : template_.pose(center_at(k, t), t, c.cows[k].phase)) {
                if (p.x < 0.0 || p.y < 0.0 || p.x > c.width - 1.0 || p.y > c.height - 1.0) {
                    fail("cow " + std::to_string(k) + " leaves the frame at frame " + std::to_string(t));
                }
            }
        }
    }
}

FrameMaps SceneGenerator::render(std::int64_t frame) const {
    if (frame < 0 || frame >= config_.frames) {
        throw InvalidArgument("frame " + std::to_string(frame) + " outside the scene");
    }
    const auto& c = config_;
    FrameMaps out{ConfidenceMapStack(c.width, c.height, Stream::color, static_cast<std::uint64_t>(frame)),
                  ConfidenceMapStack(c.width, c.height, Stream::diff, static_cast<std::uint64_t>(frame))};
    Rng rng = Rng::substream(c.seed, static_cast<std::uint64_t>(frame), kRender);
    const auto& tf = truth_.frames[static_cast<std::size_t>(frame)];
    for (std::size_t k = 0; k < tf.cows.size(); ++k) {
        const auto& cow = tf.cows[k];
        const double phase = c.cows[k].phase;
        const auto now = template_.pose(center_at(k, frame), frame, phase);
        const auto before = template_.pose(center_at(k, frame - 1), frame - 1, phase);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const JointId joint = joint_at(j);
            // Fixed draw order keeps every stream aligned regardless of branches.
            const double drop_color = rng.uniform();
            const double drop_diff = rng.uniform();
            const double u = rng.uniform();

            double peak = 0.7 + 0.3 * u;
            if (!is_upper_body(joint)) {
                // The camera-near (right) limbs show up stronger than the far ones.
                peak = limb_of(joint).side == Side::right ? kNearPeakLow + (1.0 - kNearPeakLow) * u
                                                          : 0.7 + (kNearPeakLow - 0.7) * u;
            }
            const double visibility = cow.occluded[j] ? c.kappa : 1.0;
            if (drop_color >= c.dropout) {
                render_blob(out.color.plane(joint), c.width, c.height, cow.joints[j], peak * visibility,
                            c.blob_sigma);
            }
            const bool moved = distance(now[j], before[j]) >= 1.0;
            if (moved && drop_diff >= c.dropout) {
                const double diff_peak = is_upper_body(joint) ? std::min(1.0, 1.2 * peak) : peak;
                render_blob(out.diff.plane(joint), c.width, c.height, cow.joints[j], diff_peak * visibility,
                            c.blob_sigma);
            }
        }
    }
    for (auto* stack : {&out.color, &out.diff}) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
            for (int s = 0; s < c.spurious; ++s) {
                const double x = rng.uniform(0.0, c.width);
                const double y = rng.uniform(0.0, c.height);
                render_blob(stack->plane(joint_at(j)), c.width, c.height, {x, y}, 1.0, c.blob_sigma);
            }
        }
    }
    return out;
}

Scene generate_scene(const SceneConfig& config) {
    SceneGenerator gen(config);
    Scene scene{gen.truth(), {}};
    for (int t = 0; t < config.frames; ++t) {
        scene.frames.push_back(gen.render(t));
    }
    return scene;
}

nlohmann::json write_dataset(const SceneGenerator& scene, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    const auto& c = scene.config();
    nlohmann::json files = nlohmann::json::array();
    for (int t = 0; t < c.frames; ++t) {
        const auto maps = scene.render(t);
        for (const auto* stack : {&maps.color, &maps.diff}) {
            const auto name = cmap_filename(static_cast<std::uint64_t>(t), stack->stream);
            write_cmap(*stack, dir / name);
            files.push_back(name);
        }
    }
    save_sequence(scene.truth().to_sequence(c.width, c.height), dir / "truth.json");
    files.push_back("truth.json");
    nlohmann::json manifest = {
        {"config", config_to_json(c)},
        {"seed", c.seed},
        {"frames", c.frames},
        {"files", files},
        {"truth", "truth.json"},
    };
    write_json_file(manifest, dir / "manifest.json");
    return manifest;
}

} // namespace cowpose
