#pragma once

#include <cmath>
#include <numbers>

#include "posture/errors.hpp"

// Orientation math for the posture pipeline.
//
// CONVENTIONS
// ===========
// Quaternion: Hamilton, scalar FIRST (w, x, y, z), unit norm. The AHRS board
// reports orientation in this layout and all downstream math assumes it.
// q and -q encode the same rotation; everything derived here (DCM, sensor
// normal, thoracic angle) is quadratic in the components and therefore gives
// bit-identical results for q and -q.
//
// quat_to_dcm returns the world-to-body direction cosine matrix:
//
//   C = | w2+x2-y2-z2   2(xy+wz)     2(xz-wy)    |
//       | 2(xy-wz)      w2-x2+y2-z2  2(yz+wx)    |
//       | 2(xz+wy)      2(yz-wx)     w2-x2-y2+z2 |
//
// Row i is the body i-axis expressed in world coordinates; column 2
// (zero-based) is the world vertical expressed in the sensor frame — the
// "sensor normal". The tilt of that normal away from its calibrated upright
// reference is the thoracic angle. Rotations about the world vertical (yaw)
// leave the normal, and hence the angle, unchanged.
//
// Euler angles use the aerospace Z-Y-X (yaw-pitch-roll) sequence, degrees.
// The extraction is singular at |pitch| = 90 deg; the gimbal_lock flag trips
// above 89.9 deg and roll is folded into yaw there.

namespace posture {

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;
inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
};

struct Quaternion {
  double w = 1.0;  // scalar part
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Quaternion conjugate() const { return {w, -x, -y, -z}; }
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  // Hamilton product; (a * b) applies b first, then a, in world frame.
  constexpr Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  constexpr Quaternion operator-() const { return {-w, -x, -y, -z}; }

  static Quaternion from_axis_angle(const Vec3& unit_axis, double angle_deg) {
    const double half = 0.5 * angle_deg * kRadPerDeg;
    const double s = std::sin(half);
    return {std::cos(half), s * unit_axis.x, s * unit_axis.y, s * unit_axis.z};
  }

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
};

// 3x3 rotation matrix, row-major.
struct Dcm {
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  constexpr double operator()(int r, int c) const { return m[r][c]; }
  constexpr double& operator()(int r, int c) { return m[r][c]; }

  constexpr Vec3 row(int r) const { return {m[r][0], m[r][1], m[r][2]}; }
  constexpr Vec3 col(int c) const { return {m[0][c], m[1][c], m[2][c]}; }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  constexpr Dcm operator*(const Dcm& o) const {
    Dcm r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    return r;
  }

  constexpr Dcm transposed() const {
    Dcm r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  constexpr double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
};

struct EulerAngles {
  double roll_deg = 0.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  bool gimbal_lock = false;
};

// Pitch magnitude above which the Z-Y-X extraction is treated as singular.
inline constexpr double kGimbalLockPitchDeg = 89.9;

/// Scales a quaternion to unit norm. Throws ZeroNormQuaternion when the
/// norm is at or below 1e-12.
inline Quaternion normalize(const Quaternion& q) {
  const double n = q.norm();
  if (n <= 1e-12) fail(Errc::zero_norm_quaternion, "quaternion norm is zero");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

namespace detail {
inline void require_unit_quat(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6)
    fail(Errc::not_normalized, "quaternion is not unit norm");
}
}  // namespace detail

/// World-to-body DCM for a unit quaternion (layout documented above).
/// Throws NotNormalized when |norm - 1| > 1e-6.
inline Dcm quat_to_dcm(const Quaternion& q) {
  detail::require_unit_quat(q);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Dcm d;
  d.m[0][0] = w * w + x * x - y * y - z * z;
  d.m[0][1] = 2.0 * (x * y + w * z);
  d.m[0][2] = 2.0 * (x * z - w * y);
  d.m[1][0] = 2.0 * (x * y - w * z);
  d.m[1][1] = w * w - x * x + y * y - z * z;
  d.m[1][2] = 2.0 * (y * z + w * x);
  d.m[2][0] = 2.0 * (x * z + w * y);
  d.m[2][1] = 2.0 * (y * z - w * x);
  d.m[2][2] = w * w - x * x - y * y + z * z;
  return d;
}

/// Third DCM column: the world vertical in the sensor frame. Identity
/// orientation gives (0, 0, 1); yaw leaves it unchanged.
inline Vec3 sensor_normal(const Quaternion& q) {
  detail::require_unit_quat(q);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z};
}

/// Angle in degrees between the calibrated upright normal and the current
/// one, range [0, 180]. Equals arccos of the clamped dot product for unit
/// inputs; the atan2 form used here stays accurate near 0 and 180 degrees.
/// Throws NonUnitInput when either magnitude deviates from 1 by > 1e-6.
inline double thoracic_angle(const Vec3& n_ref, const Vec3& n_cur) {
  if (std::abs(n_ref.norm() - 1.0) > 1e-6)
    fail(Errc::non_unit_input, "reference normal is not unit length");
  if (std::abs(n_cur.norm() - 1.0) > 1e-6)
    fail(Errc::non_unit_input, "current normal is not unit length");
  const double c = n_ref.dot(n_cur);
  const double s = n_ref.cross(n_cur).norm();
  return std::atan2(s, c) * kDegPerRad;
}

/// Z-Y-X Euler angles in degrees. Within the gimbal band (|pitch| > 89.9 deg)
/// only roll-yaw sums are observable; roll is reported as 0 and the flag set.
inline EulerAngles quat_to_euler(const Quaternion& q) {
  const Dcm d = quat_to_dcm(q);
  EulerAngles e;
  double sp = -d(0, 2);
  if (sp > 1.0) sp = 1.0;
  if (sp < -1.0) sp = -1.0;
  e.pitch_deg = std::asin(sp) * kDegPerRad;
  e.gimbal_lock = std::abs(e.pitch_deg) > kGimbalLockPitchDeg;
  if (e.gimbal_lock) {
    e.roll_deg = 0.0;
    e.yaw_deg = std::atan2(-d(1, 0), d(1, 1)) * kDegPerRad;
  } else {
    e.roll_deg = std::atan2(d(1, 2), d(2, 2)) * kDegPerRad;
    e.yaw_deg = std::atan2(d(0, 1), d(0, 0)) * kDegPerRad;
  }
  return e;
}

}  // namespace posture
