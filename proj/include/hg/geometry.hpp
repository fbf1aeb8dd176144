#pragma once

#include <cmath>

namespace hg {

/// Continuous image coordinates: pixel i spans [i, i + 1) and has its center at i + 0.5.
struct Point2 {
    double x = 0;
    double y = 0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    bool operator==(const Point2&) const = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// p' = [a b; c d] p + [tx; ty]
struct Affine2 {
    double a = 1, b = 0, tx = 0;
    double c = 0, d = 1, ty = 0;

    static Affine2 identity() { return {}; }
    static Affine2 translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }
    static Affine2 scaling(double s) { return {s, 0, 0, 0, s, 0}; }
    static Affine2 rotation_degrees(double deg) {
        const double r = deg * 3.14159265358979323846 / 180.0;
        const double cs = std::cos(r), sn = std::sin(r);
        return {cs, -sn, 0, sn, cs, 0};
    }
    /// x -> width - x
    static Affine2 mirror_x(double width) { return {-1, 0, width, 0, 1, 0}; }

    Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }

    /// Composition: (then(next)).apply(p) == next.apply(apply(p)).
    Affine2 then(const Affine2& n) const {
        return {n.a * a + n.b * c, n.a * b + n.b * d, n.a * tx + n.b * ty + n.tx,
                n.c * a + n.d * c, n.c * b + n.d * d, n.c * tx + n.d * ty + n.ty};
    }

    Affine2 inverse() const {
        const double det = a * d - b * c;
        const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
        return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
    }
};

}  // namespace hg
