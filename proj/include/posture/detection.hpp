#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posture/calibration.hpp"
#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"
#include "posture/orientation.hpp"

// The decision core: a per-sample state machine that discriminates slouching
// from benign bending and debounces transient slouches before alerting.
//
// Per sample, let theta = angle between the calibrated upright normal and the
// current sensor normal, and bent = flex resistance at/above threshold (the
// spine strip bends when the spine curves — i.e. during a slouch — and stays
// flat during a hip bend):
//
//   theta >= threshold,  bent     -> CandidateSlouch; after theta has held
//                                    at/above threshold continuously for
//                                    debounce_ms -> SlouchAlert, emitting
//                                    SlouchStart + VibrateOn
//   theta >= threshold, !bent     -> Bending (BendStart on entry); never
//                                    vibrates
//   theta <= threshold-hysteresis -> Upright; leaving SlouchAlert emits
//                                    VibrateOff + SlouchEnd, leaving Bending
//                                    emits BendEnd
//   in between                    -> hysteresis band: the current mode is
//                                    retained, but band samples break the
//                                    continuous-above-threshold streak
//
// The debounce streak never spans a mode boundary: entering CandidateSlouch
// (from Upright or mid-bend) restarts the clock, so time spent bending can
// not count toward a slouch alert. The vibration motor is on exactly while
// the mode is SlouchAlert, so VibrateOn/VibrateOff strictly alternate.
//
// An optional idle timer fires IdleAlert when the angle stays within
// kIdleStillnessDeg of its anchor for idle_timeout_ms, at most once per
// still period; any larger move re-anchors and re-arms it.

namespace posture {

enum class EventKind {
  SlouchStart,
  SlouchEnd,
  BendStart,
  BendEnd,
  VibrateOn,
  VibrateOff,
  IdleAlert,
};

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::SlouchStart: return "SlouchStart";
    case EventKind::SlouchEnd: return "SlouchEnd";
    case EventKind::BendStart: return "BendStart";
    case EventKind::BendEnd: return "BendEnd";
    case EventKind::VibrateOn: return "VibrateOn";
    case EventKind::VibrateOff: return "VibrateOff";
    case EventKind::IdleAlert: return "IdleAlert";
  }
  return "?";
}

struct PostureEvent {
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::SlouchStart;
  double angle_deg = 0.0;  // thoracic angle at emission
};

struct DetectorConfig {
  double angle_threshold_deg = 20.0;
  double flex_threshold_ohms = 33000.0;
  std::int64_t debounce_ms = 3000;
  double hysteresis_deg = 2.0;
  std::optional<std::int64_t> idle_timeout_ms{};  // disabled by default
  // When true, flex_threshold_ohms is a delta above the calibration flex
  // baseline instead of an absolute resistance.
  bool flex_threshold_relative = false;
};

// Angle wiggle room within which the wearer counts as "not moving" for the
// idle timer.
inline constexpr double kIdleStillnessDeg = 2.0;

inline void validate_config(const DetectorConfig& c) {
  if (!(c.hysteresis_deg >= 0.0)) fail(Errc::out_of_range, "hysteresis must be >= 0");
  if (!(c.angle_threshold_deg > c.hysteresis_deg))
    fail(Errc::out_of_range, "angle threshold must exceed the hysteresis band");
  if (c.debounce_ms < 0) fail(Errc::out_of_range, "debounce must be >= 0");
  if (!(c.flex_threshold_ohms > 0.0)) fail(Errc::out_of_range, "flex threshold must be > 0");
  if (c.idle_timeout_ms.has_value() && *c.idle_timeout_ms <= 0)
    fail(Errc::out_of_range, "idle timeout must be > 0 when set");
}

enum class Mode { Upright, CandidateSlouch, SlouchAlert, Bending };

struct DetectorState {
  Mode mode = Mode::Upright;
  bool vibrating = false;
  std::int64_t candidate_since_ms = -1;  // CandidateSlouch entry time
  std::int64_t above_since_ms = -1;      // start of the continuous theta>=threshold streak
  std::int64_t last_timestamp_ms = std::numeric_limits<std::int64_t>::min();
  // Idle tracking.
  std::int64_t last_motion_ms = 0;
  double idle_anchor_deg = 0.0;
  bool idle_anchor_set = false;
  bool idle_alerted = false;
};

/// Advances the state machine by one sample, appending any events emitted at
/// this sample to `out`. Returns the thoracic angle for the sample.
/// Throws NonMonotonicTimestamp when timestamps do not strictly increase and
/// UncalibratedDetector when the profile is empty or degenerate.
inline double step(DetectorState& state, const ImuSample& sample, const DetectorConfig& config,
                   const CalibrationProfile& calib, std::vector<PostureEvent>& out) {
  if (calib.sample_count < 1 || std::abs(calib.reference_normal.norm() - 1.0) > 1e-6)
    fail(Errc::uncalibrated_detector, "detector needs a valid calibration profile");
  if (sample.timestamp_ms <= state.last_timestamp_ms)
    fail(Errc::non_monotonic_timestamp, "sample timestamps must strictly increase");
  state.last_timestamp_ms = sample.timestamp_ms;

  const std::int64_t t = sample.timestamp_ms;
  const double theta = thoracic_angle(calib.reference_normal, sensor_normal(sample.quat));
  const double flex_threshold = config.flex_threshold_relative
                                    ? calib.flex_baseline_ohms + config.flex_threshold_ohms
                                    : config.flex_threshold_ohms;
  const bool bent = sample.flex_ohms >= flex_threshold;
  const bool high = theta >= config.angle_threshold_deg;
  const bool low = theta <= config.angle_threshold_deg - config.hysteresis_deg;

  if (high) {
    if (state.above_since_ms < 0) state.above_since_ms = t;
  } else {
    state.above_since_ms = -1;
  }

  auto emit = [&](EventKind kind) { out.push_back({t, kind, theta}); };

  switch (state.mode) {
    case Mode::Upright:
      if (high && bent) {
        state.mode = Mode::CandidateSlouch;
        state.candidate_since_ms = t;
      } else if (high) {
        state.mode = Mode::Bending;
        emit(EventKind::BendStart);
      }
      break;
    case Mode::CandidateSlouch:
      if (low) {
        state.mode = Mode::Upright;
        state.candidate_since_ms = -1;
      } else if (high && !bent) {
        state.mode = Mode::Bending;
        state.candidate_since_ms = -1;
        emit(EventKind::BendStart);
      }
      break;
    case Mode::SlouchAlert:
      if (low) {
        state.mode = Mode::Upright;
        state.vibrating = false;
        state.candidate_since_ms = -1;
        emit(EventKind::VibrateOff);
        emit(EventKind::SlouchEnd);
      } else if (high && !bent) {
        state.mode = Mode::Bending;
        state.vibrating = false;
        state.candidate_since_ms = -1;
        emit(EventKind::VibrateOff);
        emit(EventKind::SlouchEnd);
        emit(EventKind::BendStart);
      }
      break;
    case Mode::Bending:
      if (low) {
        state.mode = Mode::Upright;
        emit(EventKind::BendEnd);
      } else if (high && bent) {
        state.mode = Mode::CandidateSlouch;
        state.candidate_since_ms = t;
        emit(EventKind::BendEnd);
      }
      break;
  }

  // Debounce promotion: the streak must lie entirely within the current
  // CandidateSlouch episode.
  if (state.mode == Mode::CandidateSlouch && state.above_since_ms >= 0) {
    const std::int64_t streak_start = std::max(state.above_since_ms, state.candidate_since_ms);
    if (t - streak_start >= config.debounce_ms) {
      state.mode = Mode::SlouchAlert;
      state.vibrating = true;
      emit(EventKind::SlouchStart);
      emit(EventKind::VibrateOn);
    }
  }

  // Idle timer: re-anchor on any move beyond the stillness window, alert once
  // per still period.
  if (!state.idle_anchor_set || std::abs(theta - state.idle_anchor_deg) > kIdleStillnessDeg) {
    state.idle_anchor_set = true;
    state.idle_anchor_deg = theta;
    state.last_motion_ms = t;
    state.idle_alerted = false;
  } else if (config.idle_timeout_ms.has_value() && !state.idle_alerted &&
             t - state.last_motion_ms >= *config.idle_timeout_ms) {
    state.idle_alerted = true;
    emit(EventKind::IdleAlert);
  }

  return theta;
}

struct RunResult {
  std::vector<PostureEvent> events;
  std::vector<double> angles_deg;  // one thoracic angle per input sample
};

/// Folds `step` over a whole trace. O(1) work per sample.
inline RunResult run(const Trace& trace, const DetectorConfig& config,
                     const CalibrationProfile& calib) {
  validate_config(config);
  RunResult result;
  result.angles_deg.reserve(trace.size());
  DetectorState state;
  for (const ImuSample& sample : trace)
    result.angles_deg.push_back(step(state, sample, config, calib, result.events));
  return result;
}

// --- event stream CSV: timestamp_ms,kind,angle_deg ---

inline constexpr const char* kEventCsvHeader = "timestamp_ms,kind,angle_deg";

inline void write_events_csv(std::ostream& out, const std::vector<PostureEvent>& events) {
  out << kEventCsvHeader << '\n';
  char buf[128];
  for (const PostureEvent& e : events) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.9g\n", static_cast<long long>(e.timestamp_ms),
                  event_kind_name(e.kind), e.angle_deg);
    out << buf;
  }
}

inline std::vector<PostureEvent> read_events_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEventCsvHeader)
    fail(Errc::malformed_header, std::string("expected event header '") + kEventCsvHeader + "'");

  const EventKind kinds[] = {EventKind::SlouchStart, EventKind::SlouchEnd, EventKind::BendStart,
                             EventKind::BendEnd,     EventKind::VibrateOn, EventKind::VibrateOff,
                             EventKind::IdleAlert};
  std::vector<PostureEvent> events;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string at = " at data row " + std::to_string(row);
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos)
      fail(Errc::bad_field_count, "expected 3 fields" + at);

    PostureEvent e;
    try {
      std::size_t used = 0;
      e.timestamp_ms = std::stoll(line.substr(0, c1), &used);
      if (used != c1) throw std::invalid_argument("trailing junk");
      const std::string angle = line.substr(c2 + 1);
      e.angle_deg = std::stod(angle, &used);
      if (used != angle.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      fail(Errc::unparseable_number, "unparseable numeric field" + at);
    }

    const std::string kind = line.substr(c1 + 1, c2 - c1 - 1);
    bool known = false;
    for (EventKind k : kinds)
      if (kind == event_kind_name(k)) {
        e.kind = k;
        known = true;
        break;
      }
    if (!known) fail(Errc::unparseable_number, "unknown event kind '" + kind + "'" + at);
    events.push_back(e);
  }
  return events;
}

}  // namespace posture
