#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"
#include "posture/orientation.hpp"

// Synthetic trace generation: motion scripts, the flex-sensor resistance
// model, and a deterministic IMU channel synthesizer used by the tests, the
// evaluation harness, and the CLI.
//
// MOTION MODEL
// ============
// The torso rotates about the pitch axis (body y). Each script segment is an
// episode on an upright baseline: the commanded angle ramps from 0 up to the
// segment's peak over ramp_ms = min(500 ms, length/4), holds, and ramps back
// to 0 by the segment's end, using the smooth half-cosine (1 - cos(pi*u))/2.
// Upright segments command 0 throughout.
//
// FLEX MODEL
// ==========
// The flex strip lies along the spine, so it bends when the user slouches
// (spine curves) and stays flat when the user bends at the hips (spine
// straight) — that asymmetry is the whole discrimination signal. During
// Slouch segments the resistance tracks the commanded angle linearly with
// full scale at 45 degrees; everywhere else it sits at flat_ohms. With the
// default 10 kOhm -> 110 kOhm range, the 33 kOhm detector threshold is
// crossed at ~10.35 degrees commanded, comfortably before the detector's
// angle band, so a slouch is never transiently classified as a bend.
//
// CHANNELS
// ========
// accel = gravity unit vector in the body frame (sensor normal); gyro =
// central difference of the commanded angle about y plus a constant drift
// bias on all three axes; mag = fixed world field (25, 0, 40) uT rotated into
// the body frame. Every channel is quantized to float32 (and flex to whole
// ohms) so traces survive the 32-bit wire format bit-exactly.

namespace posture {

enum class Posture { Upright, Slouch, Bend };

struct MotionSegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  Posture posture = Posture::Upright;
  double peak_angle_deg = 0.0;  // must be 0 for Upright segments
};

using MotionScript = std::vector<MotionSegment>;

// Flex-sensor resistance: linear in bend fraction across the datasheet range.
struct FlexModel {
  double flat_ohms = 10000.0;
  double full_bend_ohms = 110000.0;
  double tolerance_fraction = 0.30;  // datasheet part-to-part spread
};

inline double flex_resistance(const FlexModel& model, double bend_fraction) {
  if (!(bend_fraction >= 0.0 && bend_fraction <= 1.0))
    fail(Errc::out_of_range, "bend_fraction must be in [0, 1]");
  return model.flat_ohms + (model.full_bend_ohms - model.flat_ohms) * bend_fraction;
}

// Commanded trunk angle at which the flex channel reads full scale.
inline constexpr double kFlexFullScaleDeg = 45.0;

struct TraceOptions {
  double rate_hz = 100.0;
  double noise_deg = 0.0;       // uniform +/- noise added to the angle
  double gyro_drift_dps = 0.0;  // constant bias on all three gyro axes
  std::uint64_t seed = 1;
  FlexModel flex{};
  // When set, the flex endpoints are perturbed once per trace by a uniform
  // factor within +/- tolerance_fraction, modeling part-to-part spread.
  bool apply_flex_tolerance = false;
};

inline void validate_script(const MotionScript& script) {
  if (script.empty()) fail(Errc::invalid_script, "script has no segments");
  if (script.front().start_ms != 0) fail(Errc::invalid_script, "script must start at t=0");
  for (std::size_t i = 0; i < script.size(); ++i) {
    const MotionSegment& s = script[i];
    if (s.end_ms <= s.start_ms) fail(Errc::invalid_script, "segment end must exceed start");
    if (i > 0 && s.start_ms != script[i - 1].end_ms)
      fail(Errc::invalid_script, "segments must be contiguous");
    if (!(s.peak_angle_deg >= 0.0 && s.peak_angle_deg <= 90.0))
      fail(Errc::invalid_script, "peak angle must be in [0, 90] degrees");
    if (s.posture == Posture::Upright && s.peak_angle_deg != 0.0)
      fail(Errc::invalid_script, "upright segments must command 0 degrees");
  }
}

namespace detail {

inline double half_cosine(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }

inline std::int64_t ramp_ms(const MotionSegment& s) {
  return std::min<std::int64_t>(500, (s.end_ms - s.start_ms) / 4);
}

// Commanded angle within one segment's bell profile.
inline double segment_angle(const MotionSegment& s, std::int64_t t_ms) {
  const double a = s.peak_angle_deg;
  if (a == 0.0) return 0.0;
  const std::int64_t len = s.end_ms - s.start_ms;
  const std::int64_t r = ramp_ms(s);
  const std::int64_t u = t_ms - s.start_ms;
  if (r <= 0) return a;
  if (u < r) return a * half_cosine(static_cast<double>(u) / static_cast<double>(r));
  if (u > len - r) return a * half_cosine(static_cast<double>(len - u) / static_cast<double>(r));
  return a;
}

// Commanded angle over the whole script (0 outside it). Linear scan is fine:
// generation walks time forward and scripts are short.
inline double commanded_angle(const MotionScript& script, std::int64_t t_ms) {
  for (const MotionSegment& s : script)
    if (t_ms >= s.start_ms && t_ms < s.end_ms) return segment_angle(s, t_ms);
  return 0.0;
}

inline const MotionSegment* segment_at(const MotionScript& script, std::int64_t t_ms) {
  for (const MotionSegment& s : script)
    if (t_ms >= s.start_ms && t_ms < s.end_ms) return &s;
  return nullptr;
}

// Uniform double in [-1, 1) from the top 53 bits of the engine's output.
// Hand-rolled so traces are identical across standard libraries.
inline double uniform_pm1(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-52 - 1.0;
}

inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

// Deterministically synthesizes a trace for a motion script. See the file
// header for the motion, flex, and channel models.
inline Trace generate_trace(const MotionScript& script, const TraceOptions& opt = {}) {
  validate_script(script);
  if (!(opt.rate_hz > 0.0)) fail(Errc::out_of_range, "rate_hz must be positive");

  std::mt19937_64 eng(opt.seed);
  FlexModel flex = opt.flex;
  if (opt.apply_flex_tolerance) {
    const double factor = 1.0 + flex.tolerance_fraction * detail::uniform_pm1(eng);
    flex.flat_ohms *= factor;
    flex.full_bend_ohms *= factor;
  }

  const std::int64_t end_ms = script.back().end_ms;
  const double period_ms = 1000.0 / opt.rate_hz;
  const Vec3 world_field{25.0, 0.0, 40.0};  // uT, arbitrary fixed north+down

  Trace trace;
  trace.reserve(static_cast<std::size_t>(static_cast<double>(end_ms) / period_ms) + 1);

  for (std::int64_t i = 0;; ++i) {
    const std::int64_t t = std::llround(static_cast<double>(i) * period_ms);
    if (t >= end_ms) break;

    const double commanded = detail::commanded_angle(script, t);
    const double angle = commanded + opt.noise_deg * detail::uniform_pm1(eng);
    const Quaternion q = Quaternion::from_axis_angle({0, 1, 0}, angle);

    // Rate from the commanded profile (central difference, one-sided at the
    // trace edges), plus the constant drift bias on every axis.
    const std::int64_t t_prev = std::llround(static_cast<double>(i - 1) * period_ms);
    const std::int64_t t_next = std::llround(static_cast<double>(i + 1) * period_ms);
    const double a_prev = i > 0 ? detail::commanded_angle(script, t_prev) : commanded;
    const double a_next = t_next < end_ms ? detail::commanded_angle(script, t_next) : commanded;
    const std::int64_t lo = i > 0 ? t_prev : t;
    const std::int64_t hi = t_next < end_ms ? t_next : t;
    const double rate_dps =
        hi > lo ? (a_next - a_prev) / (static_cast<double>(hi - lo) / 1000.0) : 0.0;

    const Vec3 g = sensor_normal(q);
    const Vec3 m = quat_to_dcm(q) * world_field;

    const MotionSegment* seg = detail::segment_at(script, t);
    double flex_ohms = flex.flat_ohms;
    if (seg != nullptr && seg->posture == Posture::Slouch) {
      const double fraction = std::clamp(commanded / kFlexFullScaleDeg, 0.0, 1.0);
      flex_ohms = flex_resistance(flex, fraction);
    }

    ImuSample s;
    s.timestamp_ms = t;
    s.ax = detail::quantize_f32(g.x);
    s.ay = detail::quantize_f32(g.y);
    s.az = detail::quantize_f32(g.z);
    s.gx = detail::quantize_f32(opt.gyro_drift_dps);
    s.gy = detail::quantize_f32(rate_dps + opt.gyro_drift_dps);
    s.gz = detail::quantize_f32(opt.gyro_drift_dps);
    s.mx = detail::quantize_f32(m.x);
    s.my = detail::quantize_f32(m.y);
    s.mz = detail::quantize_f32(m.z);
    s.quat.w = detail::quantize_f32(q.w);
    s.quat.x = detail::quantize_f32(q.x);
    s.quat.y = detail::quantize_f32(q.y);
    s.quat.z = detail::quantize_f32(q.z);
    s.flex_ohms = std::round(flex_ohms);
    trace.push_back(s);
  }
  return trace;
}

// The five-interval benchmark scenario (upright / slouch / upright / bend /
// upright). Interval boundaries are 100 Hz sample indices, i.e. 10 ms apart;
// the slouch interval is the sole ground-truth positive.
inline std::pair<Trace, std::vector<TruthInterval>> table2_trace(double rate_hz = 100.0) {
  const MotionScript script = {
      {0, 1000, Posture::Upright, 0.0},     {1000, 2400, Posture::Slouch, 25.0},
      {2400, 3500, Posture::Upright, 0.0},  {3500, 5200, Posture::Bend, 25.0},
      {5200, 6000, Posture::Upright, 0.0},
  };
  TraceOptions opt;
  opt.rate_hz = rate_hz;
  opt.noise_deg = 0.5;
  opt.seed = 20260210;
  return {generate_trace(script, opt), {{1000, 2400}}};
}

/// Ground truth for a script: every slouch segment is a positive interval.
inline std::vector<TruthInterval> truth_from_script(const MotionScript& script) {
  validate_script(script);
  std::vector<TruthInterval> truth;
  for (const MotionSegment& s : script)
    if (s.posture == Posture::Slouch) truth.push_back({s.start_ms, s.end_ms});
  return truth;
}

// --- motion script CSV ---
//
// Header kScriptCsvHeader, then one row per segment with posture spelled
// upright / slouch / bend. Segments must be contiguous from t=0 (the same
// rules validate_script enforces).

inline constexpr const char* kScriptCsvHeader = "start_ms,end_ms,posture,peak_angle_deg";

inline const char* posture_name(Posture p) {
  switch (p) {
    case Posture::Upright: return "upright";
    case Posture::Slouch: return "slouch";
    case Posture::Bend: return "bend";
  }
  return "?";
}

inline void write_script_csv(std::ostream& out, const MotionScript& script) {
  out << kScriptCsvHeader << '\n';
  char buf[128];
  for (const MotionSegment& s : script) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%s,%.9g\n",
                  static_cast<long long>(s.start_ms), static_cast<long long>(s.end_ms),
                  posture_name(s.posture), s.peak_angle_deg);
    out << buf;
  }
}

inline MotionScript read_script_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::malformed_header, "empty script file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScriptCsvHeader)
    fail(Errc::malformed_header, "expected header '" + std::string(kScriptCsvHeader) + "'");

  MotionScript script;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 4)
      fail(Errc::bad_field_count, "row " + std::to_string(row) + ": expected 4 fields, got " +
                                      std::to_string(fields.size()));
    MotionSegment seg;
    try {
      std::size_t used = 0;
      seg.start_ms = std::stoll(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing junk");
      seg.end_ms = std::stoll(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing junk");
      seg.peak_angle_deg = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      fail(Errc::unparseable_number, "row " + std::to_string(row) + ": unparseable number");
    }
    if (fields[2] == "upright") seg.posture = Posture::Upright;
    else if (fields[2] == "slouch") seg.posture = Posture::Slouch;
    else if (fields[2] == "bend") seg.posture = Posture::Bend;
    else
      fail(Errc::invalid_script,
           "row " + std::to_string(row) + ": unknown posture '" + fields[2] + "'");
    script.push_back(seg);
  }
  validate_script(script);
  return script;
}

}  // namespace posture
