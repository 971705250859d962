#pragma once

#include <cmath>

namespace waydcm {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
  double angle() const { return std::atan2(y, x); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Absolute angular difference in degrees, wrapped to [0, 180].
inline double abs_angle_deg(double a_rad, double b_rad) {
  const double d = std::fabs(wrap_angle(a_rad - b_rad));
  return d * 180.0 / kPi;
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double deg) { return deg * kPi / 180.0; }

// Rigid transform between the world frame and the target-centric frame.
// world = R(heading) * local + origin
struct FrameTransform {
  Vec2 origin;
  double heading = 0.0;

  Vec2 to_local(const Vec2& world) const {
    const double c = std::cos(heading), s = std::sin(heading);
    const Vec2 d = world - origin;
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
  }
  Vec2 to_world(const Vec2& local) const {
    const double c = std::cos(heading), s = std::sin(heading);
    return {c * local.x - s * local.y + origin.x,
            s * local.x + c * local.y + origin.y};
  }
};

}  // namespace waydcm
