#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace cowpose {

// Image-plane point or displacement in pixels; x grows right, y grows down.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(Vec2 o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    constexpr Vec2& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }
    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

Vec2 mean(std::span<const Vec2> points);

// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }
    // Eigenvalues, smallest first.
    std::pair<double, double> eigenvalues() const;
    Sym2 inverse() const;
    // v^T M v
    double quadratic(Vec2 v) const { return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y; }
    double frobenius() const { return std::sqrt(xx * xx + 2.0 * xy * xy + yy * yy); }

    friend Sym2 operator-(Sym2 a, Sym2 b) { return {a.xx - b.xx, a.xy - b.xy, a.yy - b.yy}; }
    friend bool operator==(Sym2, Sym2) = default;
};

// Axis-aligned rectangle with inclusive bounds.
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    friend bool operator==(Rect, Rect) = default;
};

Rect bounding_rect(std::span<const Vec2> points);

using Polygon = std::vector<Vec2>;

// Shoelace area, positive for counter-clockwise in a y-up frame.
double signed_area(std::span<const Vec2> polygon);

// Even-odd test.
bool point_in_polygon(std::span<const Vec2> polygon, Vec2 p);

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

// True when no two non-adjacent edges of the closed polygon touch.
bool is_simple(std::span<const Vec2> polygon);

// Angle at `vertex` between the rays towards `a` and `b`, in degrees [0, 180].
double angle_at(Vec2 vertex, Vec2 a, Vec2 b);

} // namespace cowpose
