#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "posture/orientation.hpp"
#include "posture/sensor_models.hpp"

// Deterministic random helpers shared by the test suites.
//
// Only the raw mt19937_64 stream is used; the mapping to doubles is done by
// hand because std::uniform_real_distribution is allowed to differ between
// standard library implementations and these tests pin exact seeds.

namespace testsupport {

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Standard normal via Box-Muller (one value per call, no caching).
inline double normal(std::mt19937_64& eng) {
  const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Uniformly distributed unit quaternion (normalized 4-normal vector).
inline posture::Quaternion random_unit_quaternion(std::mt19937_64& eng) {
  while (true) {
    posture::Quaternion q{normal(eng), normal(eng), normal(eng), normal(eng)};
    const double n = q.norm();
    if (n > 1e-6) return {q.w / n, q.x / n, q.y / n, q.z / n};
  }
}

// Uniformly distributed unit vector.
inline posture::Vec3 random_unit_vec3(std::mt19937_64& eng) {
  while (true) {
    posture::Vec3 v{normal(eng), normal(eng), normal(eng)};
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

// Random but always-valid motion script: 2-7 contiguous segments starting at
// t=0, mixing upright stretches with slouch/bend episodes of varied peaks.
inline posture::MotionScript random_script(std::mt19937_64& eng) {
  const int n_segments = 2 + static_cast<int>(eng() % 6);
  posture::MotionScript script;
  std::int64_t t = 0;
  for (int i = 0; i < n_segments; ++i) {
    posture::MotionSegment seg;
    seg.start_ms = t;
    seg.end_ms = t + 600 + static_cast<std::int64_t>(eng() % 5400);
    const std::uint64_t kind = eng() % 5;
    if (kind <= 1) {
      seg.posture = posture::Posture::Upright;
      seg.peak_angle_deg = 0.0;
    } else {
      seg.posture = kind <= 3 ? posture::Posture::Slouch : posture::Posture::Bend;
      seg.peak_angle_deg = uniform(eng, 5.0, 45.0);
    }
    script.push_back(seg);
    t = seg.end_ms;
  }
  return script;
}

}  // namespace testsupport
