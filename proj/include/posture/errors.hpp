#pragma once

#include <stdexcept>
#include <string>

namespace posture {

// Every failure the library reports, by name. The CLI prints the name on
// stderr and exits nonzero; tests match on the code.
enum class Errc {
  zero_norm_quaternion,
  not_normalized,
  non_unit_input,
  out_of_range,
  invalid_script,
  insufficient_data,
  excessive_motion,
  non_monotonic_timestamp,
  uncalibrated_detector,
  empty_matrix,
  too_few_rows,
  not_symmetric,
  no_convergence,
  all_zero_variance,
  unsorted_input,
  no_positives,
  malformed_header,
  bad_field_count,
  unparseable_number,
  bad_config,
};

inline const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::zero_norm_quaternion: return "ZeroNormQuaternion";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::non_unit_input: return "NonUnitInput";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::invalid_script: return "InvalidScript";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::excessive_motion: return "ExcessiveMotion";
    case Errc::non_monotonic_timestamp: return "NonMonotonicTimestamp";
    case Errc::uncalibrated_detector: return "UncalibratedDetector";
    case Errc::empty_matrix: return "EmptyMatrix";
    case Errc::too_few_rows: return "TooFewRows";
    case Errc::not_symmetric: return "NotSymmetric";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::all_zero_variance: return "AllZeroVariance";
    case Errc::unsorted_input: return "UnsortedInput";
    case Errc::no_positives: return "NoPositives";
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::bad_field_count: return "BadFieldCount";
    case Errc::unparseable_number: return "UnparseableNumber";
    case Errc::bad_config: return "BadConfig";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }
  const char* name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace posture
