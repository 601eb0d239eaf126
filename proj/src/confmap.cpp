#include "cowpose/confmap.hpp"

#include "cowpose/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace cowpose {

ConfidenceMapStack::ConfidenceMapStack(std::uint32_t w, std::uint32_t h, Stream s, std::uint64_t frame)
    : width(w), height(h), stream(s), frame_index(frame),
      data(static_cast<std::size_t>(w) * h * kJointCount, 0.0f) {}

namespace {

constexpr std::uint8_t kCmapVersion = 1;
// Payload cap (4 GiB) keeps width * height * 17 * 4 within size_t everywhere.
constexpr std::uint64_t kMaxPayloadBytes = 1ull << 32;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu));
    }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    }
    return static_cast<T>(v);
}

float clamp_score(float v) {
    if (!(v > 0.0f)) {
        return 0.0f; // also maps NaN to 0
    }
    return std::min(v, 1.0f);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace

std::vector<std::uint8_t> encode_cmap(const ConfidenceMapStack& stack) {
    if (stack.data.size() != stack.plane_size() * kJointCount) {
        throw InvalidArgument("confidence map stack has " + std::to_string(stack.data.size()) +
                              " scores, expected " + std::to_string(stack.plane_size() * kJointCount));
    }
    std::vector<std::uint8_t> out;
    out.reserve(kCmapHeaderSize + stack.data.size() * 4);
    for (char c : {'C', 'M', 'A', 'P'}) {
        out.push_back(static_cast<std::uint8_t>(c));
    }
    out.push_back(kCmapVersion);
    out.push_back(static_cast<std::uint8_t>(stack.stream));
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint32_t>(out, stack.width);
    put_le<std::uint32_t>(out, stack.height);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kJointCount));
    put_le<std::uint64_t>(out, stack.frame_index);
    for (float v : stack.data) {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(clamp_score(v)));
    }
    return out;
}

ConfidenceMapStack decode_cmap(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kCmapHeaderSize) {
        throw FormatError("truncated CMAP header: " + std::to_string(bytes.size()) + " of " +
                              std::to_string(kCmapHeaderSize) + " bytes",
                          bytes.size());
    }
    if (std::memcmp(bytes.data(), "CMAP", 4) != 0) {
        throw FormatError("bad CMAP magic", 0);
    }
    if (bytes[4] != kCmapVersion) {
        throw FormatError("unsupported CMAP version " + std::to_string(bytes[4]), 4);
    }
    if (bytes[5] > 1) {
        throw FormatError("unknown CMAP stream " + std::to_string(bytes[5]), 5);
    }
    const auto width = get_le<std::uint32_t>(bytes, 8);
    const auto height = get_le<std::uint32_t>(bytes, 12);
    const auto joints = get_le<std::uint32_t>(bytes, 16);
    if (joints != kJointCount) {
        throw FormatError("CMAP joint count " + std::to_string(joints) + ", expected 17", 16);
    }
    const std::uint64_t payload = static_cast<std::uint64_t>(width) * height * kJointCount * 4;
    if (payload > kMaxPayloadBytes) {
        throw FormatError("CMAP dimensions " + std::to_string(width) + "x" + std::to_string(height) + " overflow",
                          8);
    }
    if (bytes.size() - kCmapHeaderSize < payload) {
        throw FormatError("truncated CMAP payload: expected " + std::to_string(kCmapHeaderSize + payload) +
                              " bytes",
                          bytes.size());
    }
    if (bytes.size() - kCmapHeaderSize > payload) {
        throw FormatError("trailing bytes after CMAP payload", kCmapHeaderSize + payload);
    }

    ConfidenceMapStack stack(width, height, static_cast<Stream>(bytes[5]), get_le<std::uint64_t>(bytes, 20));
    for (std::size_t i = 0; i < stack.data.size(); ++i) {
        stack.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kCmapHeaderSize + 4 * i));
    }
    return stack;
}

void write_cmap(const ConfidenceMapStack& stack, const std::filesystem::path& path) {
    write_bytes(encode_cmap(stack), path);
}

ConfidenceMapStack read_cmap(const std::filesystem::path& path) {
    try {
        return decode_cmap(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string cmap_filename(std::uint64_t frame_index, Stream stream) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "frame_%06llu.%s.cmap", static_cast<unsigned long long>(frame_index),
                  stream == Stream::color ? "color" : "diff");
    return buf;
}

namespace {

// Skips whitespace and '#' comments, then reads an unsigned decimal.
std::uint32_t pgm_number(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
        throw FormatError("malformed PGM header", pos);
    }
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        v = v * 10 + (bytes[pos] - '0');
        if (v > std::numeric_limits<std::uint32_t>::max()) {
            throw FormatError("PGM header value overflow", pos);
        }
        ++pos;
    }
    return static_cast<std::uint32_t>(v);
}

} // namespace

GrayFrame read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw FormatError(path.string() + ": not a binary PGM (P5)", 0);
    }
    std::size_t pos = 2;
    GrayFrame frame;
    frame.width = pgm_number(bytes, pos);
    frame.height = pgm_number(bytes, pos);
    const std::uint32_t maxval = pgm_number(bytes, pos);
    if (maxval == 0 || maxval > 65535) {
        throw FormatError(path.string() + ": PGM maxval out of range", pos);
    }
    ++pos; // single whitespace before the raster
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::uint64_t count = static_cast<std::uint64_t>(frame.width) * frame.height;
    if (pos > bytes.size() || bytes.size() - pos < count * bpp) {
        throw FormatError(path.string() + ": truncated PGM raster", bytes.size());
    }
    frame.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t v = bpp == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
        frame.pixels[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
    return frame;
}

void write_pgm(const GrayFrame& frame, const std::filesystem::path& path) {
    std::vector<std::uint8_t> out;
    const std::string header = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    out.assign(header.begin(), header.end());
    for (float v : frame.pixels) {
        out.push_back(static_cast<std::uint8_t>(std::lround(clamp_score(v) * 255.0f)));
    }
    write_bytes(out, path);
}

GrayFrame frame_difference(const GrayFrame& prev, const GrayFrame& cur, const GrayFrame& next) {
    const auto same = [&](const GrayFrame& f) { return f.width == cur.width && f.height == cur.height; };
    if (!same(prev) || !same(next)) {
        throw InvalidArgument("frame dimensions differ");
    }
    GrayFrame out{cur.width, cur.height, std::vector<float>(cur.pixels.size())};
    for (std::size_t i = 0; i < cur.pixels.size(); ++i) {
        const float d = std::abs(cur.pixels[i] - prev.pixels[i]) + std::abs(cur.pixels[i] - next.pixels[i]);
        out.pixels[i] = std::clamp(d, 0.0f, 1.0f);
    }
    return out;
}

MergedMaps merge_maps(const ConfidenceMapStack& color, const ConfidenceMapStack& diff) {
    if (color.width != diff.width || color.height != diff.height) {
        throw InvalidArgument("color and diff stacks differ in size");
    }
    if (color.frame_index != diff.frame_index) {
        throw InvalidArgument("color and diff stacks belong to different frames (" +
                              std::to_string(color.frame_index) + " vs " + std::to_string(diff.frame_index) + ")");
    }
    MergedMaps out;
    out.stack = color;
    for (auto j : kUpperBodyJoints) {
        auto dst = out.stack.plane(j);
        const auto src = diff.plane(j);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = std::max(dst[i], src[i]);
        }
    }
    for (auto j : kLimbJoints) {
        const auto src = diff.plane(j);
        out.fallback[index(j)].assign(src.begin(), src.end());
    }
    return out;
}

std::vector<PlanePeak> nms_plane(std::span<const float> plane, std::uint32_t width, std::uint32_t height, int radius,
                                 double threshold) {
    if (radius < 1) {
        throw InvalidArgument("NMS radius must be at least 1");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InvalidArgument("NMS threshold must lie in (0, 1)");
    }
    if (plane.size() != static_cast<std::size_t>(width) * height) {
        throw InvalidArgument("plane size does not match its dimensions");
    }
    std::vector<PlanePeak> peaks;
    const int w = static_cast<int>(width);
    const int h = static_cast<int>(height);
    for (int y = 0; y < h; ++y) {
        const float* row = plane.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < w; ++x) {
            const float v = row[x];
            if (!(v > threshold)) {
                continue;
            }
            bool peak = true;
            bool flat = true;
            const int qy0 = std::max(0, y - radius);
            const int qy1 = std::min(h - 1, y + radius);
            const int qx0 = std::max(0, x - radius);
            const int qx1 = std::min(w - 1, x + radius);
            for (int qy = qy0; qy <= qy1 && peak; ++qy) {
                const float* qrow = plane.data() + static_cast<std::size_t>(qy) * width;
                for (int qx = qx0; qx <= qx1; ++qx) {
                    if (qy == y && qx == x) {
                        continue;
                    }
                    const float q = qrow[qx];
                    if (q > v || (q == v && (qy < y || (qy == y && qx < x)))) {
                        peak = false;
                        break;
                    }
                    if (q < v) {
                        flat = false;
                    }
                }
            }
            if (peak && !flat) {
                peaks.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), v});
            }
        }
    }
    return peaks;
}

namespace {

void append_peaks(std::vector<KeypointCandidate>& out, JointId joint, const std::vector<PlanePeak>& peaks,
                  CandidateSource source) {
    for (const auto& p : peaks) {
        out.push_back({joint, {static_cast<double>(p.x), static_cast<double>(p.y)}, p.score, source});
    }
}

} // namespace

std::vector<KeypointCandidate> nms_extract(const ConfidenceMapStack& stack, int radius, double threshold) {
    const auto source = stack.stream == Stream::color ? CandidateSource::color : CandidateSource::diff;
    std::vector<KeypointCandidate> out;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto joint = joint_at(j);
        append_peaks(out, joint, nms_plane(stack.plane(joint), stack.width, stack.height, radius, threshold), source);
    }
    return out;
}

std::vector<KeypointCandidate> extract_candidates(const MergedMaps& maps, int radius, double threshold) {
    const auto& s = maps.stack;
    std::vector<KeypointCandidate> out;
    for (auto joint : kUpperBodyJoints) {
        append_peaks(out, joint, nms_plane(s.plane(joint), s.width, s.height, radius, threshold),
                     CandidateSource::merged);
    }
    for (auto joint : kLimbJoints) {
        auto peaks = nms_plane(s.plane(joint), s.width, s.height, radius, threshold);
        if (!peaks.empty() || !maps.has_fallback(joint)) {
            append_peaks(out, joint, peaks, CandidateSource::color);
            continue;
        }
        append_peaks(out, joint, nms_plane(maps.fallback[index(joint)], s.width, s.height, radius, threshold),
                     CandidateSource::diff);
    }
    return out;
}

} // namespace cowpose
