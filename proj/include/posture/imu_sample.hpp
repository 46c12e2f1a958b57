#pragma once

#include <cstdint>
#include <vector>

#include "posture/orientation.hpp"

namespace posture {

// One 100 Hz tick from the sensor head: 9-DOF readings, the fused orientation
// quaternion, and the flex-sensor resistance.
//
// Units: accel in g, angular rate in deg/s, magnetic field in microtesla,
// resistance in ohms. Within a trace, timestamps are strictly increasing and
// the quaternion is unit norm within 1e-6.
struct ImuSample {
  std::int64_t timestamp_ms = 0;
  double ax = 0.0, ay = 0.0, az = 0.0;
  double gx = 0.0, gy = 0.0, gz = 0.0;
  double mx = 0.0, my = 0.0, mz = 0.0;
  Quaternion quat;
  double flex_ohms = 0.0;
};

using Trace = std::vector<ImuSample>;

// Ground-truth label accompanying a generated trace: one interval per real
// slouch episode. start < end; intervals within a list are sorted and
// non-overlapping.
struct TruthInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

}  // namespace posture
