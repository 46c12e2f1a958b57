#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"
#include "posture/orientation.hpp"

// Upright-reference capture: the wearer stands still for the first seconds of
// a session and the device records what "upright" looks like for their build.
//
// The reference is the renormalized mean of the per-sample sensor normals —
// averaging normals instead of quaternions sidesteps the q/-q sign ambiguity
// of naive quaternion means, and the normal is the only orientation quantity
// consumed downstream. Averaging happens in timestamp order regardless of
// input order, so permuting the input changes nothing, bit for bit.

namespace posture {

struct CalibrationProfile {
  Vec3 reference_normal{0.0, 0.0, 1.0};
  double flex_baseline_ohms = 0.0;
  std::int64_t duration_ms = 0;
  std::int64_t sample_count = 0;
  double motion_spread_deg = 0.0;  // max angular deviation seen in the window
};

/// Builds the upright reference from the first window_ms of a stream.
///
/// The window is every sample with timestamp <= (earliest timestamp +
/// window_ms). Throws InsufficientData when the stream is empty or spans less
/// than window_ms; ExcessiveMotion when the mean normal degenerates (wild
/// motion cancels the vectors) or the observed spread exceeds max_spread_deg.
inline CalibrationProfile calibrate(const Trace& samples, std::int64_t window_ms = 10000,
                                    double max_spread_deg = 5.0) {
  if (samples.empty()) fail(Errc::insufficient_data, "no samples to calibrate from");

  std::int64_t t_min = samples.front().timestamp_ms;
  std::int64_t t_max = t_min;
  for (const ImuSample& s : samples) {
    t_min = std::min(t_min, s.timestamp_ms);
    t_max = std::max(t_max, s.timestamp_ms);
  }
  if (t_max - t_min < window_ms)
    fail(Errc::insufficient_data, "stream spans less than the calibration window");

  // Gather the window and process it in timestamp order (order-canonical).
  struct Entry {
    std::int64_t t;
    Vec3 normal;
    double flex;
  };
  std::vector<Entry> window;
  for (const ImuSample& s : samples)
    if (s.timestamp_ms <= t_min + window_ms)
      window.push_back({s.timestamp_ms, sensor_normal(s.quat), s.flex_ohms});
  std::stable_sort(window.begin(), window.end(),
                   [](const Entry& a, const Entry& b) { return a.t < b.t; });

  Vec3 sum{0, 0, 0};
  double flex_sum = 0.0;
  for (const Entry& e : window) {
    sum = sum + e.normal;
    flex_sum += e.flex;
  }
  const double n = static_cast<double>(window.size());
  const Vec3 mean = sum / n;
  if (mean.norm() < 1e-6)
    fail(Errc::excessive_motion, "sensor normals cancel out; the wearer was not still");

  CalibrationProfile profile;
  profile.reference_normal = mean.normalized();
  profile.flex_baseline_ohms = flex_sum / n;
  profile.duration_ms = window.back().t - window.front().t;
  profile.sample_count = static_cast<std::int64_t>(window.size());

  double spread = 0.0;
  for (const Entry& e : window)
    spread = std::max(spread, thoracic_angle(profile.reference_normal, e.normal.normalized()));
  profile.motion_spread_deg = spread;
  if (spread > max_spread_deg)
    fail(Errc::excessive_motion, "movement during calibration exceeded the stillness limit");
  return profile;
}

// --- profile file format: one key=value per line, full double precision ---

inline void write_profile(std::ostream& out, const CalibrationProfile& p) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "reference_normal_x=%.17g\nreference_normal_y=%.17g\n"
                "reference_normal_z=%.17g\nflex_baseline_ohms=%.17g\n"
                "duration_ms=%lld\nsample_count=%lld\nmotion_spread_deg=%.17g\n",
                p.reference_normal.x, p.reference_normal.y, p.reference_normal.z,
                p.flex_baseline_ohms, static_cast<long long>(p.duration_ms),
                static_cast<long long>(p.sample_count), p.motion_spread_deg);
  out << buf;
}

inline CalibrationProfile read_profile(std::istream& in) {
  std::map<std::string, double> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::bad_config, "profile line " + std::to_string(line_no) + " is not key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(value, &used);
    } catch (const std::exception&) {
      fail(Errc::bad_config, "profile value for '" + key + "' is not a number");
    }
    if (used != value.size())
      fail(Errc::bad_config, "profile value for '" + key + "' is not a number");
    if (!kv.emplace(key, parsed).second)
      fail(Errc::bad_config, "duplicate profile key '" + key + "'");
  }

  const char* required[] = {"reference_normal_x", "reference_normal_y", "reference_normal_z",
                            "flex_baseline_ohms", "duration_ms",        "sample_count",
                            "motion_spread_deg"};
  for (const char* key : required)
    if (kv.find(key) == kv.end())
      fail(Errc::bad_config, std::string("profile is missing key '") + key + "'");
  for (const auto& [key, value] : kv) {
    (void)value;
    if (std::find_if(std::begin(required), std::end(required),
                     [&](const char* k) { return key == k; }) == std::end(required))
      fail(Errc::bad_config, "unknown profile key '" + key + "'");
  }

  CalibrationProfile p;
  p.reference_normal = {kv["reference_normal_x"], kv["reference_normal_y"],
                        kv["reference_normal_z"]};
  p.flex_baseline_ohms = kv["flex_baseline_ohms"];
  p.duration_ms = static_cast<std::int64_t>(kv["duration_ms"]);
  p.sample_count = static_cast<std::int64_t>(kv["sample_count"]);
  p.motion_spread_deg = kv["motion_spread_deg"];
  return p;
}

}  // namespace posture
