#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "posture/detection.hpp"
#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"

// Scoring detected slouch alerts against ground-truth slouch intervals.
//
// An "alert" is a VibrateOn event (the single moment the wearer is buzzed);
// other event kinds are ignored by the matcher. Matching is greedy,
// earliest-first, and one-to-one: walking alerts in time order, each alert
// claims the earliest-starting still-unclaimed truth interval that contains
// it once the interval is widened by slack_ms on both sides. A claimed
// interval counts one true positive; an alert that claims nothing is a false
// positive; an interval never claimed is a false negative. Every alert and
// every interval is counted exactly once, so
//   true_positives + false_positives == alert count
//   true_positives + false_negatives == interval count (positives).

namespace posture {

struct ConfusionStats {
  std::int64_t true_positives = 0;
  std::int64_t false_positives = 0;
  std::int64_t false_negatives = 0;
  std::int64_t positives = 0;  // true_positives + false_negatives
  // Convenience copy of true_positives / positives; 0 when positives == 0
  // (use sensitivity() to make the undefined case an error instead).
  double sensitivity = 0.0;
};

inline ConfusionStats make_stats(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) fail(Errc::out_of_range, "counts must be non-negative");
  ConfusionStats s;
  s.true_positives = tp;
  s.false_positives = fp;
  s.false_negatives = fn;
  s.positives = tp + fn;
  s.sensitivity = s.positives > 0 ? static_cast<double>(tp) / static_cast<double>(s.positives)
                                  : 0.0;
  return s;
}

/// True-positive rate. Throws NoPositives when there is nothing to detect.
inline double sensitivity(const ConfusionStats& s) {
  if (s.positives <= 0) fail(Errc::no_positives, "no positive intervals to score against");
  return static_cast<double>(s.true_positives) / static_cast<double>(s.positives);
}

namespace detail {
inline void require_valid_truth(const std::vector<TruthInterval>& truth) {
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].end_ms <= truth[i].start_ms)
      fail(Errc::unsorted_input,
           "truth interval " + std::to_string(i) + " has end <= start");
    if (i > 0 && truth[i].start_ms < truth[i - 1].end_ms)
      fail(Errc::unsorted_input,
           "truth intervals must be sorted and non-overlapping (interval " +
               std::to_string(i) + ")");
  }
}
}  // namespace detail

/// Matches VibrateOn events against truth intervals (see file header).
/// Throws UnsortedInput for out-of-order alerts or invalid truth, OutOfRange
/// for negative slack.
inline ConfusionStats match_events(const std::vector<PostureEvent>& events,
                                   const std::vector<TruthInterval>& truth,
                                   std::int64_t slack_ms = 1000) {
  if (slack_ms < 0) fail(Errc::out_of_range, "slack_ms must be non-negative");
  detail::require_valid_truth(truth);

  std::vector<std::int64_t> alerts;
  for (const PostureEvent& e : events)
    if (e.kind == EventKind::VibrateOn) alerts.push_back(e.timestamp_ms);
  for (std::size_t i = 1; i < alerts.size(); ++i)
    if (alerts[i] < alerts[i - 1]) fail(Errc::unsorted_input, "alerts are not in time order");

  std::vector<bool> claimed(truth.size(), false);
  std::int64_t tp = 0, fp = 0;
  for (const std::int64_t t : alerts) {
    bool matched = false;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (claimed[i]) continue;
      if (t >= truth[i].start_ms - slack_ms && t <= truth[i].end_ms + slack_ms) {
        claimed[i] = true;
        matched = true;
        break;  // intervals are sorted by start, so the first hit is earliest
      }
    }
    matched ? ++tp : ++fp;
  }
  const std::int64_t fn =
      static_cast<std::int64_t>(truth.size()) - tp;
  return make_stats(tp, fp, fn);
}

// --- truth interval CSV ---

inline constexpr const char* kTruthCsvHeader = "start_ms,end_ms";

inline void write_truth_csv(std::ostream& out, const std::vector<TruthInterval>& truth) {
  out << kTruthCsvHeader << '\n';
  for (const TruthInterval& t : truth) out << t.start_ms << ',' << t.end_ms << '\n';
}

inline std::vector<TruthInterval> read_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::malformed_header, "empty truth file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTruthCsvHeader)
    fail(Errc::malformed_header, "expected header '" + std::string(kTruthCsvHeader) + "'");

  std::vector<TruthInterval> truth;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      fail(Errc::bad_field_count, "row " + std::to_string(row) + ": expected 2 fields");
    TruthInterval t{};
    try {
      std::size_t used = 0;
      t.start_ms = std::stoll(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing junk");
      const std::string rest = line.substr(comma + 1);
      t.end_ms = std::stoll(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      fail(Errc::unparseable_number, "row " + std::to_string(row) + ": unparseable timestamp");
    }
    truth.push_back(t);
  }
  return truth;
}

// --- presentation ---

inline std::string format_stats(const ConfusionStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "false positives  %8lld\n"
                "true positives   %8lld\n"
                "false negatives  %8lld\n"
                "positives        %8lld\n"
                "sensitivity      %10.6f\n",
                static_cast<long long>(s.false_positives),
                static_cast<long long>(s.true_positives),
                static_cast<long long>(s.false_negatives),
                static_cast<long long>(s.positives), s.sensitivity);
  return buf;
}

inline void write_stats_csv(std::ostream& out, const ConfusionStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "false_positives,true_positives,false_negatives,positives,sensitivity\n"
                "%lld,%lld,%lld,%lld,%.9g\n",
                static_cast<long long>(s.false_positives),
                static_cast<long long>(s.true_positives),
                static_cast<long long>(s.false_negatives),
                static_cast<long long>(s.positives), s.sensitivity);
  out << buf;
}

}  // namespace posture
