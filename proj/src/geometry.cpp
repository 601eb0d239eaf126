#include "cowpose/geometry.hpp"

#include "cowpose/error.hpp"

#include <algorithm>
#include <numbers>

namespace cowpose {

Vec2 mean(std::span<const Vec2> points) {
    if (points.empty()) {
        throw InvalidArgument("mean of an empty point set");
    }
    Vec2 sum;
    for (const auto& p : points) {
        sum += p;
    }
    return sum / static_cast<double>(points.size());
}

std::pair<double, double> Sym2::eigenvalues() const {
    const double half_trace = 0.5 * (xx + yy);
    const double d = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
    return {half_trace - d, half_trace + d};
}

Sym2 Sym2::inverse() const {
    const double d = det();
    if (d == 0.0) {
        throw InvalidArgument("singular 2x2 matrix");
    }
    return {yy / d, -xy / d, xx / d};
}

Rect bounding_rect(std::span<const Vec2> points) {
    if (points.empty()) {
        throw InvalidArgument("bounding rectangle of an empty point set");
    }
    Rect r{points[0].x, points[0].y, points[0].x, points[0].y};
    for (const auto& p : points) {
        r.x0 = std::min(r.x0, p.x);
        r.y0 = std::min(r.y0, p.y);
        r.x1 = std::max(r.x1, p.x);
        r.y1 = std::max(r.y1, p.y);
    }
    return r;
}

double signed_area(std::span<const Vec2> polygon) {
    double twice = 0.0;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        twice += cross(polygon[i], polygon[(i + 1) % n]);
    }
    return 0.5 * twice;
}

bool point_in_polygon(std::span<const Vec2> polygon, Vec2 p) {
    bool inside = false;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = polygon[i];
        const Vec2 b = polygon[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

} // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 != o2 && o3 != o4) {
        return true;
    }
    return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
           (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

bool is_simple(std::span<const Vec2> polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                continue;
            }
            if (segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) {
                return false;
            }
        }
    }
    return true;
}

double angle_at(Vec2 vertex, Vec2 a, Vec2 b) {
    const Vec2 u = a - vertex;
    const Vec2 v = b - vertex;
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) {
        return 0.0;
    }
    const double c = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

} // namespace cowpose
