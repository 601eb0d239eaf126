#include "cowpose/render.hpp"

#include "cowpose/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cowpose {

namespace {

constexpr Rgb kContour = {0, 220, 0};
constexpr double kJointRadius = 5.0;

constexpr std::array<Rgb, 6> kPalette = {{
    {230, 60, 60},
    {60, 120, 240},
    {240, 200, 40},
    {200, 60, 220},
    {40, 210, 210},
    {250, 140, 30},
}};

} // namespace

RgbImage::RgbImage(std::uint32_t w, std::uint32_t h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

void RgbImage::set(long x, long y, Rgb color) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) {
        return;
    }
    auto* p = pixels.data() + (static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3;
    p[0] = color[0];
    p[1] = color[1];
    p[2] = color[2];
}

Rgb RgbImage::get(std::uint32_t x, std::uint32_t y) const {
    const auto* p = pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    return {p[0], p[1], p[2]};
}

void draw_line(RgbImage& img, Vec2 a, Vec2 b, Rgb color) {
    long x0 = std::lround(a.x);
    long y0 = std::lround(a.y);
    const long x1 = std::lround(b.x);
    const long y1 = std::lround(b.y);
    const long dx = std::abs(x1 - x0);
    const long dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1;
    const long sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
        img.set(x0, y0, color);
        if (x0 == x1 && y0 == y1) {
            break;
        }
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void draw_disc(RgbImage& img, Vec2 c, double radius, Rgb color) {
    const long r = std::lround(std::ceil(radius));
    const long cx = std::lround(c.x);
    const long cy = std::lround(c.y);
    for (long y = -r; y <= r; ++y) {
        for (long x = -r; x <= r; ++x) {
            if (static_cast<double>(x * x + y * y) <= radius * radius) {
                img.set(cx + x, cy + y, color);
            }
        }
    }
}

void draw_ring(RgbImage& img, Vec2 c, double radius, Rgb color) {
    const long r = std::lround(std::ceil(radius));
    const long cx = std::lround(c.x);
    const long cy = std::lround(c.y);
    for (long y = -r; y <= r; ++y) {
        for (long x = -r; x <= r; ++x) {
            const double d = std::sqrt(static_cast<double>(x * x + y * y));
            if (std::abs(d - radius) <= 0.75) {
                img.set(cx + x, cy + y, color);
            }
        }
    }
}

Rgb track_color(std::optional<int> track_id) {
    if (!track_id) {
        return {255, 255, 255};
    }
    const auto n = static_cast<int>(kPalette.size());
    return kPalette[static_cast<std::size_t>(((*track_id % n) + n) % n)];
}

RgbImage render_frame(const SequenceFrame& frame, std::uint32_t width, std::uint32_t height) {
    RgbImage img(width, height);
    for (const auto& cow : frame.cows) {
        const Rgb color = track_color(cow.track_id);
        for (std::size_t i = 0; i < kContourOrder.size(); ++i) {
            const auto a = kContourOrder[i];
            const auto b = kContourOrder[(i + 1) % kContourOrder.size()];
            if (cow.present(a) && cow.present(b)) {
                draw_line(img, cow[a].position, cow[b].position, kContour);
            }
        }
        for (const auto& limb : kLimbs) {
            if (cow.present(limb.anchor) && cow.present(limb.leg)) {
                draw_line(img, cow[limb.anchor].position, cow[limb.leg].position, color);
            }
            if (cow.present(limb.leg) && cow.present(limb.hoof)) {
                draw_line(img, cow[limb.leg].position, cow[limb.hoof].position, color);
            }
        }
        for (const auto& js : cow.joints) {
            if (js.status == JointStatus::predicted) {
                draw_ring(img, js.position, kJointRadius, color);
            } else if (js.present()) {
                draw_disc(img, js.position, kJointRadius, color);
            }
        }
    }
    return img;
}

std::string render_svg(const SequenceFrame& frame, std::uint32_t width, std::uint32_t height) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n";
    const auto hex = [](Rgb c) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
        return std::string(buf);
    };
    for (const auto& cow : frame.cows) {
        const auto color = hex(track_color(cow.track_id));
        if (cow.upper_body_complete()) {
            out << "<polygon fill=\"none\" stroke=\"" << hex(kContour) << "\" points=\"";
            for (auto j : kContourOrder) {
                out << cow[j].position.x << ',' << cow[j].position.y << ' ';
            }
            out << "\"/>\n";
        }
        for (const auto& limb : kLimbs) {
            const JointId chain[] = {limb.anchor, limb.leg, limb.hoof};
            for (int s = 0; s < 2; ++s) {
                if (cow.present(chain[s]) && cow.present(chain[s + 1])) {
                    out << "<line stroke=\"" << color << "\" x1=\"" << cow[chain[s]].position.x << "\" y1=\""
                        << cow[chain[s]].position.y << "\" x2=\"" << cow[chain[s + 1]].position.x << "\" y2=\""
                        << cow[chain[s + 1]].position.y << "\"/>\n";
                }
            }
        }
        for (const auto& js : cow.joints) {
            if (!js.present()) {
                continue;
            }
            const bool hollow = js.status == JointStatus::predicted;
            out << "<circle cx=\"" << js.position.x << "\" cy=\"" << js.position.y << "\" r=\"" << kJointRadius
                << "\" " << (hollow ? "fill=\"none\" stroke=\"" : "fill=\"") << color << "\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace cowpose
