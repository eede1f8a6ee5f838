#pragma once

#include <cmath>

namespace coalab {

/// Point or displacement in the plane. Units depend on the frame: arena units
/// inside a world, meters in the global mission plane.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    constexpr Vec2& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }

    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;

    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Scales v down so that |v| <= limit. Direction is preserved.
inline Vec2 clamp_norm(const Vec2& v, double limit) {
    const double n = v.norm();
    if (n <= limit || n == 0.0) {
        return v;
    }
    return v * (limit / n);
}

}  // namespace coalab
