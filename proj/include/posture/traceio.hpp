#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"

// Wire formats for sample traces.
//
// CSV: one header row (kTraceCsvHeader) then one row per sample. The real
// columns are float32-typed, like the binary frames: they are printed with
// %.9g (enough digits to round-trip any float32 exactly) and parsed at
// float32 precision, so write->read reproduces each value bit for bit.
// Timestamps are integers. Rows must be in non-decreasing timestamp order.
//
// Binary framing (65 bytes per sample):
//   offset  size  field
//   0       2     sync bytes 0xAA 0x55
//   2       1     payload length, always 60
//   3       4     timestamp_ms as little-endian uint32
//   7       52    ax ay az gx gy gz mx my mz qw qx qy qz as little-endian
//                 IEEE-754 float32 (same order as the CSV columns)
//   59      4     flex_ohms rounded to whole ohms, little-endian uint32
//   63      2     CRC-16/CCITT-FALSE over bytes 2..62 (length + payload),
//                 transmitted big-endian
//
// CRC-16/CCITT-FALSE: polynomial 0x1021, initial value 0xFFFF, no input or
// output reflection, no final XOR; check value crc("123456789") = 0x29B1.
// Two independent implementations are provided (bit-by-bit shift register
// and table-driven) so each can vouch for the other.
//
// FrameDecoder tolerates a dirty stream: bytes outside a valid sync pattern
// are skipped silently, and a frame that starts with a valid sync but fails
// (wrong length byte, CRC mismatch, or cut off at end of stream) produces a
// diagnostic carrying the frame's global byte offset, after which scanning
// resumes one byte past the failed sync. The decoder never throws on input
// bytes.

namespace posture {

// --- CRC-16/CCITT-FALSE ---

/// Reference implementation: one bit at a time through the shift register.
inline std::uint16_t crc16_ccitt_bitwise(const std::uint8_t* data, std::size_t size) {
  std::uint16_t crc = 0xFFFF;
  for (std::size_t i = 0; i < size; ++i) {
    crc = static_cast<std::uint16_t>(crc ^ (static_cast<std::uint16_t>(data[i]) << 8));
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
  }
  return crc;
}

namespace detail {
inline const std::array<std::uint16_t, 256>& crc16_table() {
  static const std::array<std::uint16_t, 256> table = [] {
    std::array<std::uint16_t, 256> t{};
    for (unsigned i = 0; i < 256; ++i) {
      std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
      for (int bit = 0; bit < 8; ++bit)
        crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                             : static_cast<std::uint16_t>(crc << 1);
      t[i] = crc;
    }
    return t;
  }();
  return table;
}
}  // namespace detail

/// Production implementation: byte-at-a-time table lookup.
inline std::uint16_t crc16_ccitt(const std::uint8_t* data, std::size_t size) {
  const auto& table = detail::crc16_table();
  std::uint16_t crc = 0xFFFF;
  for (std::size_t i = 0; i < size; ++i)
    crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ data[i]) & 0xFF]);
  return crc;
}

inline std::uint16_t crc16_ccitt(const std::vector<std::uint8_t>& data) {
  return crc16_ccitt(data.data(), data.size());
}

// --- binary frames ---

inline constexpr std::size_t kFramePayloadSize = 60;
inline constexpr std::size_t kFrameSize = 65;  // sync(2) + len(1) + payload + crc(2)
inline constexpr std::uint8_t kFrameSync0 = 0xAA;
inline constexpr std::uint8_t kFrameSync1 = 0x55;

namespace detail {
inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline void put_f32_le(std::vector<std::uint8_t>& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32_le(out, bits);
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline double get_f32_le(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return static_cast<double>(f);
}
}  // namespace detail

/// Appends one 65-byte frame. Throws OutOfRange when the timestamp or the
/// rounded flex resistance does not fit a uint32.
inline void encode_frame(const ImuSample& s, std::vector<std::uint8_t>& out) {
  if (s.timestamp_ms < 0 || s.timestamp_ms > 0xFFFFFFFFLL)
    fail(Errc::out_of_range, "frame timestamp must fit a uint32");
  const long long flex = std::llround(s.flex_ohms);
  if (flex < 0 || flex > 0xFFFFFFFFLL)
    fail(Errc::out_of_range, "frame flex resistance must fit a uint32");

  const std::size_t start = out.size();
  out.push_back(kFrameSync0);
  out.push_back(kFrameSync1);
  out.push_back(static_cast<std::uint8_t>(kFramePayloadSize));
  detail::put_u32_le(out, static_cast<std::uint32_t>(s.timestamp_ms));
  for (double v : {s.ax, s.ay, s.az, s.gx, s.gy, s.gz, s.mx, s.my, s.mz, s.quat.w, s.quat.x,
                   s.quat.y, s.quat.z})
    detail::put_f32_le(out, v);
  detail::put_u32_le(out, static_cast<std::uint32_t>(flex));

  const std::uint16_t crc = crc16_ccitt(out.data() + start + 2, 1 + kFramePayloadSize);
  out.push_back(static_cast<std::uint8_t>(crc >> 8));  // big-endian on the wire
  out.push_back(static_cast<std::uint8_t>(crc & 0xFF));
}

inline std::vector<std::uint8_t> encode_trace(const Trace& trace) {
  std::vector<std::uint8_t> out;
  out.reserve(trace.size() * kFrameSize);
  for (const ImuSample& s : trace) encode_frame(s, out);
  return out;
}

enum class FrameIssue { BadLength, BadCrc, Truncated };

inline const char* frame_issue_name(FrameIssue issue) {
  switch (issue) {
    case FrameIssue::BadLength: return "BadLength";
    case FrameIssue::BadCrc: return "BadCrc";
    case FrameIssue::Truncated: return "Truncated";
  }
  return "?";
}

struct FrameDiagnostic {
  std::uint64_t offset = 0;  // global byte offset of the frame's first sync byte
  FrameIssue issue = FrameIssue::BadCrc;
};

class FrameDecoder {
 public:
  /// Feeds bytes into the scanner; may be called any number of times with
  /// arbitrary chunk boundaries.
  void push(const std::uint8_t* data, std::size_t size) {
    buffer_.insert(buffer_.end(), data, data + size);
    scan(false);
  }
  void push(const std::vector<std::uint8_t>& data) { push(data.data(), data.size()); }

  /// Marks end of stream: a pending frame start that can no longer complete
  /// becomes a Truncated diagnostic. Returns the accumulated samples.
  const std::vector<ImuSample>& finish() {
    scan(true);
    return samples_;
  }

  const std::vector<ImuSample>& samples() const { return samples_; }
  const std::vector<FrameDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  void scan(bool at_end) {
    std::size_t pos = 0;
    const std::size_t n = buffer_.size();
    while (pos < n) {
      if (buffer_[pos] != kFrameSync0) {
        ++pos;  // inter-frame noise: skip silently
        continue;
      }
      if (pos + 1 >= n) {
        // A lone trailing sync prefix is indistinguishable from noise.
        if (at_end) ++pos;
        break;
      }
      if (buffer_[pos + 1] != kFrameSync1) {
        ++pos;
        continue;
      }
      if (pos + 3 > n) {
        if (at_end) {
          // Sync seen but the stream ends before the frame can complete:
          // one diagnostic for the cut, nothing left worth rescanning.
          diagnostics_.push_back({base_offset_ + pos, FrameIssue::Truncated});
          pos = n;
        }
        break;
      }
      if (buffer_[pos + 2] != kFramePayloadSize) {
        diagnostics_.push_back({base_offset_ + pos, FrameIssue::BadLength});
        ++pos;
        continue;
      }
      if (pos + kFrameSize > n) {
        if (at_end) {
          diagnostics_.push_back({base_offset_ + pos, FrameIssue::Truncated});
          pos = n;
        }
        break;
      }
      const std::uint8_t* frame = buffer_.data() + pos;
      const std::uint16_t expected =
          static_cast<std::uint16_t>((static_cast<std::uint16_t>(frame[63]) << 8) | frame[64]);
      if (crc16_ccitt(frame + 2, 1 + kFramePayloadSize) != expected) {
        diagnostics_.push_back({base_offset_ + pos, FrameIssue::BadCrc});
        ++pos;
        continue;
      }
      ImuSample s;
      const std::uint8_t* p = frame + 3;
      s.timestamp_ms = detail::get_u32_le(p);
      double* fields[13] = {&s.ax, &s.ay, &s.az, &s.gx,     &s.gy,     &s.gz,    &s.mx,
                            &s.my, &s.mz, &s.quat.w, &s.quat.x, &s.quat.y, &s.quat.z};
      for (int i = 0; i < 13; ++i) *fields[i] = detail::get_f32_le(p + 4 + 4 * i);
      s.flex_ohms = static_cast<double>(detail::get_u32_le(p + 4 + 52));
      samples_.push_back(s);
      pos += kFrameSize;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    base_offset_ += pos;
  }

  std::vector<std::uint8_t> buffer_;
  std::uint64_t base_offset_ = 0;
  std::vector<ImuSample> samples_;
  std::vector<FrameDiagnostic> diagnostics_;
};

/// One-shot convenience: decode a whole buffer.
inline std::vector<ImuSample> decode_frames(const std::vector<std::uint8_t>& bytes,
                                            std::vector<FrameDiagnostic>* diagnostics = nullptr) {
  FrameDecoder decoder;
  decoder.push(bytes);
  std::vector<ImuSample> samples = decoder.finish();
  if (diagnostics) *diagnostics = decoder.diagnostics();
  return samples;
}

// --- trace CSV ---

inline constexpr const char* kTraceCsvHeader =
    "timestamp_ms,ax,ay,az,gx,gy,gz,mx,my,mz,qw,qx,qy,qz,flex_ohms";

inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceCsvHeader << '\n';
  char buf[512];
  for (const ImuSample& s : trace) {
    std::snprintf(buf, sizeof buf,
                  "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(s.timestamp_ms), s.ax, s.ay, s.az, s.gx, s.gy, s.gz,
                  s.mx, s.my, s.mz, s.quat.w, s.quat.x, s.quat.y, s.quat.z, s.flex_ohms);
    out << buf;
  }
}

namespace detail {
inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline double parse_real(const std::string& field, std::size_t row, std::size_t column) {
  const char* begin = field.c_str();
  char* end = nullptr;
  // The column is float32-typed: parse at float32 precision and widen, so a
  // written value comes back as exactly the same double it left as.
  const float value = std::strtof(begin, &end);
  if (end != begin + field.size() || field.empty())
    fail(Errc::unparseable_number,
         "row " + std::to_string(row) + ", field " + std::to_string(column) +
             ": unparseable number '" + field + "'");
  return static_cast<double>(value);
}

inline std::int64_t parse_timestamp(const std::string& field, std::size_t row) {
  try {
    std::size_t used = 0;
    const std::int64_t value = std::stoll(field, &used);
    if (used != field.size()) throw std::invalid_argument("trailing junk");
    return value;
  } catch (const std::exception&) {
    fail(Errc::unparseable_number,
         "row " + std::to_string(row) + ", field 1: unparseable timestamp '" + field + "'");
  }
}
}  // namespace detail

inline Trace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::malformed_header, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader)
    fail(Errc::malformed_header, "expected header '" + std::string(kTraceCsvHeader) + "'");

  Trace trace;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_row(line);
    if (fields.size() != 15)
      fail(Errc::bad_field_count, "row " + std::to_string(row) + ": expected 15 fields, got " +
                                      std::to_string(fields.size()));
    ImuSample s;
    s.timestamp_ms = detail::parse_timestamp(fields[0], row);
    double* reals[14] = {&s.ax, &s.ay, &s.az, &s.gx,     &s.gy,     &s.gz,     &s.mx,
                         &s.my, &s.mz, &s.quat.w, &s.quat.x, &s.quat.y, &s.quat.z, &s.flex_ohms};
    for (std::size_t i = 0; i < 14; ++i) *reals[i] = detail::parse_real(fields[i + 1], row, i + 2);
    if (!trace.empty() && s.timestamp_ms < trace.back().timestamp_ms)
      fail(Errc::non_monotonic_timestamp,
           "row " + std::to_string(row) + ": timestamp moves backwards");
    trace.push_back(s);
  }
  return trace;
}

}  // namespace posture
