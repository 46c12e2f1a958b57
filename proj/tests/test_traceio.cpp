#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "posture/sensor_models.hpp"
#include "posture/traceio.hpp"
#include "support.hpp"

using namespace posture;

namespace {

bool same_sample(const ImuSample& a, const ImuSample& b) {
  return a.timestamp_ms == b.timestamp_ms && a.ax == b.ax && a.ay == b.ay && a.az == b.az &&
         a.gx == b.gx && a.gy == b.gy && a.gz == b.gz && a.mx == b.mx && a.my == b.my &&
         a.mz == b.mz && a.quat.w == b.quat.w && a.quat.x == b.quat.x && a.quat.y == b.quat.y &&
         a.quat.z == b.quat.z && a.flex_ohms == b.flex_ohms;
}

ImuSample plain_sample(std::int64_t t) {
  ImuSample s;
  s.timestamp_ms = t;
  s.ax = 0.0;
  s.ay = 0.0;
  s.az = 1.0;
  s.gx = s.gy = s.gz = 0.0;
  s.mx = 25.0;
  s.my = 0.0;
  s.mz = 40.0;
  s.quat = {1.0, 0.0, 0.0, 0.0};
  s.flex_ohms = 10000.0;
  return s;
}

Trace noisy_trace() {
  const MotionScript script{{0, 1500, Posture::Upright, 0.0},
                            {1500, 5500, Posture::Slouch, 30.0},
                            {5500, 7000, Posture::Upright, 0.0},
                            {7000, 11000, Posture::Bend, 40.0},
                            {11000, 12000, Posture::Upright, 0.0}};
  TraceOptions opt;
  opt.noise_deg = 1.0;
  opt.gyro_drift_dps = 0.2;
  opt.seed = 77;
  return generate_trace(script, opt);
}

}  // namespace

// --- CSV ---

TEST_CASE("trace CSV round-trips generated data bitwise") {
  const Trace trace = noisy_trace();
  std::ostringstream out;
  write_trace_csv(out, trace);
  std::istringstream in(out.str());
  const Trace back = read_trace_csv(in);
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) CHECK(same_sample(back[i], trace[i]));
}

TEST_CASE("empty trace writes only the header") {
  std::ostringstream out;
  write_trace_csv(out, {});
  CHECK(out.str() == std::string(kTraceCsvHeader) + "\n");
  std::istringstream in(out.str());
  CHECK(read_trace_csv(in).empty());
}

TEST_CASE("trace CSV tolerates CRLF and blank lines") {
  std::ostringstream out;
  write_trace_csv(out, {plain_sample(0), plain_sample(10)});
  std::string text = out.str();
  std::string crlf;
  for (char c : text) {
    if (c == '\n') crlf += "\r\n";
    else crlf += c;
  }
  crlf += "\r\n";  // trailing blank line
  std::istringstream in(crlf);
  const Trace back = read_trace_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].timestamp_ms == 10);
}

TEST_CASE("trace CSV equal timestamps are allowed, regressions are not") {
  {
    std::ostringstream out;
    write_trace_csv(out, {plain_sample(5), plain_sample(5)});
    std::istringstream in(out.str());
    CHECK(read_trace_csv(in).size() == 2);
  }
  {
    std::ostringstream out;
    write_trace_csv(out, {plain_sample(10), plain_sample(9)});
    std::istringstream in(out.str());
    try {
      read_trace_csv(in);
      FAIL("expected NonMonotonicTimestamp");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_monotonic_timestamp);
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
}

TEST_CASE("trace CSV reader reports precise errors") {
  {
    std::istringstream in("time,ax\n");
    try {
      read_trace_csv(in);
      FAIL("expected MalformedHeader");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_header);
    }
  }
  {
    std::istringstream in("");
    try {
      read_trace_csv(in);
      FAIL("expected MalformedHeader on empty input");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_header);
    }
  }
  {
    std::istringstream in(std::string(kTraceCsvHeader) + "\n1,2,3\n");
    try {
      read_trace_csv(in);
      FAIL("expected BadFieldCount");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_field_count);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }
  {
    std::istringstream in(std::string(kTraceCsvHeader) +
                          "\n0,0,0,1,0,0,0,25,0,40,1,0,0,0,10000,99\n");
    try {
      read_trace_csv(in);
      FAIL("expected BadFieldCount for extra field");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_field_count);
    }
  }
  {
    std::istringstream in(std::string(kTraceCsvHeader) +
                          "\n0,0,0,oops,0,0,0,25,0,40,1,0,0,0,10000\n");
    try {
      read_trace_csv(in);
      FAIL("expected UnparseableNumber");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unparseable_number);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
      CHECK(std::string(e.what()).find("field 4") != std::string::npos);
    }
  }
  {
    std::istringstream in(std::string(kTraceCsvHeader) +
                          "\nabc,0,0,1,0,0,0,25,0,40,1,0,0,0,10000\n");
    try {
      read_trace_csv(in);
      FAIL("expected UnparseableNumber for timestamp");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unparseable_number);
      CHECK(std::string(e.what()).find("field 1") != std::string::npos);
    }
  }
}

// --- CRC ---

TEST_CASE("CRC check value and empty-input value") {
  const char* check = "123456789";
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(check);
  CHECK(crc16_ccitt_bitwise(bytes, 9) == 0x29B1);
  CHECK(crc16_ccitt(bytes, 9) == 0x29B1);
  CHECK(crc16_ccitt_bitwise(bytes, 0) == 0xFFFF);
  CHECK(crc16_ccitt(bytes, 0) == 0xFFFF);
}

TEST_CASE("bitwise and table CRC implementations agree") {
  std::mt19937_64 eng(701);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(testsupport::uniform(eng, 0.0, 64.0)));
    for (auto& b : data) b = static_cast<std::uint8_t>(eng() & 0xFF);
    CHECK(crc16_ccitt_bitwise(data.data(), data.size()) == crc16_ccitt(data));
  }
}

TEST_CASE("a single flipped bit always changes the CRC") {
  std::mt19937_64 eng(702);
  std::vector<std::uint8_t> data(61);
  for (auto& b : data) b = static_cast<std::uint8_t>(eng() & 0xFF);
  const std::uint16_t clean = crc16_ccitt(data);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int bit = 0; bit < 8; ++bit) {
      data[i] ^= static_cast<std::uint8_t>(1 << bit);
      CHECK(crc16_ccitt(data) != clean);
      data[i] ^= static_cast<std::uint8_t>(1 << bit);
    }
}

// --- frames ---

TEST_CASE("frame layout is exactly as documented") {
  ImuSample s = plain_sample(0x01020304);
  std::vector<std::uint8_t> bytes;
  encode_frame(s, bytes);
  REQUIRE(bytes.size() == kFrameSize);

  CHECK(bytes[0] == 0xAA);
  CHECK(bytes[1] == 0x55);
  CHECK(bytes[2] == 60);
  // timestamp little-endian
  CHECK(bytes[3] == 0x04);
  CHECK(bytes[4] == 0x03);
  CHECK(bytes[5] == 0x02);
  CHECK(bytes[6] == 0x01);
  // az = 1.0f -> 0x3F800000 little-endian at payload float slot 2
  CHECK(bytes[7 + 8] == 0x00);
  CHECK(bytes[7 + 9] == 0x00);
  CHECK(bytes[7 + 10] == 0x80);
  CHECK(bytes[7 + 11] == 0x3F);
  // qw = 1.0f at float slot 9
  CHECK(bytes[7 + 36 + 3] == 0x3F);
  // flex 10000 -> 0x2710 little-endian
  CHECK(bytes[59] == 0x10);
  CHECK(bytes[60] == 0x27);
  CHECK(bytes[61] == 0x00);
  CHECK(bytes[62] == 0x00);
  // CRC over length+payload, big-endian, cross-checked with the bitwise form
  const std::uint16_t crc = crc16_ccitt_bitwise(bytes.data() + 2, 61);
  CHECK(bytes[63] == static_cast<std::uint8_t>(crc >> 8));
  CHECK(bytes[64] == static_cast<std::uint8_t>(crc & 0xFF));
}

TEST_CASE("encode_frame range checks") {
  for (std::int64_t bad_ts : {static_cast<std::int64_t>(-1), static_cast<std::int64_t>(1) << 32}) {
    ImuSample s = plain_sample(bad_ts);
    std::vector<std::uint8_t> bytes;
    try {
      encode_frame(s, bytes);
      FAIL("expected OutOfRange for timestamp");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::out_of_range);
    }
  }
  for (double bad_flex : {-10.0, 5e9}) {
    ImuSample s = plain_sample(0);
    s.flex_ohms = bad_flex;
    std::vector<std::uint8_t> bytes;
    try {
      encode_frame(s, bytes);
      FAIL("expected OutOfRange for flex");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::out_of_range);
    }
  }
}

TEST_CASE("frames round-trip a generated trace bitwise") {
  const Trace trace = noisy_trace();
  const std::vector<std::uint8_t> bytes = encode_trace(trace);
  REQUIRE(bytes.size() == trace.size() * kFrameSize);

  // Push in randomized chunk sizes to exercise partial-frame buffering.
  std::mt19937_64 eng(703);
  FrameDecoder decoder;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t chunk =
        std::min(bytes.size() - pos,
                 static_cast<std::size_t>(testsupport::uniform(eng, 1.0, 200.0)));
    decoder.push(bytes.data() + pos, chunk);
    pos += chunk;
  }
  const std::vector<ImuSample>& back = decoder.finish();
  CHECK(decoder.diagnostics().empty());
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) CHECK(same_sample(back[i], trace[i]));

  // One-shot convenience decodes identically.
  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> oneshot = decode_frames(bytes, &diags);
  CHECK(diags.empty());
  REQUIRE(oneshot.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) CHECK(same_sample(oneshot[i], trace[i]));
}

TEST_CASE("byte-at-a-time delivery matches one-shot delivery") {
  std::vector<std::uint8_t> bytes = encode_trace({plain_sample(0), plain_sample(10)});
  bytes[70] ^= 0x01;  // corrupt the second frame's payload
  FrameDecoder slow;
  for (std::uint8_t b : bytes) slow.push(&b, 1);
  slow.finish();
  std::vector<FrameDiagnostic> fast_diags;
  const std::vector<ImuSample> fast = decode_frames(bytes, &fast_diags);
  REQUIRE(slow.samples().size() == fast.size());
  for (std::size_t i = 0; i < fast.size(); ++i) CHECK(same_sample(slow.samples()[i], fast[i]));
  REQUIRE(slow.diagnostics().size() == fast_diags.size());
  for (std::size_t i = 0; i < fast_diags.size(); ++i) {
    CHECK(slow.diagnostics()[i].offset == fast_diags[i].offset);
    CHECK(slow.diagnostics()[i].issue == fast_diags[i].issue);
  }
}

TEST_CASE("a flipped payload byte yields one BadCrc and no samples") {
  std::vector<std::uint8_t> bytes = encode_trace({plain_sample(1000)});
  bytes[20] ^= 0x40;
  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> samples = decode_frames(bytes, &diags);
  CHECK(samples.empty());
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].issue == FrameIssue::BadCrc);
  CHECK(diags[0].offset == 0);
}

TEST_CASE("inter-frame noise is skipped silently") {
  std::vector<std::uint8_t> bytes{0x00, 0x13, 0x55};
  encode_frame(plain_sample(500), bytes);
  bytes.push_back(0x10);
  bytes.push_back(0x20);
  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> samples = decode_frames(bytes, &diags);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].timestamp_ms == 500);
  CHECK(diags.empty());
}

TEST_CASE("a cut-off final frame is reported as Truncated with its offset") {
  std::vector<std::uint8_t> bytes = encode_trace({plain_sample(0), plain_sample(10)});
  bytes.resize(kFrameSize + 30);
  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> samples = decode_frames(bytes, &diags);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].timestamp_ms == 0);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].issue == FrameIssue::Truncated);
  CHECK(diags[0].offset == kFrameSize);
}

TEST_CASE("a wrong length byte is reported and scanning recovers") {
  std::vector<std::uint8_t> bytes = encode_trace({plain_sample(0)});
  bytes[2] = 59;
  encode_frame(plain_sample(10), bytes);
  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> samples = decode_frames(bytes, &diags);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].timestamp_ms == 10);
  REQUIRE(!diags.empty());
  CHECK(diags[0].issue == FrameIssue::BadLength);
  CHECK(diags[0].offset == 0);
}

TEST_CASE("random corruption never derails the decoder") {
  const MotionScript script{{0, 2000, Posture::Slouch, 20.0}};
  TraceOptions opt;
  opt.noise_deg = 1.0;
  opt.seed = 99;
  const Trace trace = generate_trace(script, opt);  // 200 samples at 100 Hz
  REQUIRE(trace.size() == 200);
  std::vector<std::uint8_t> bytes = encode_trace(trace);

  std::mt19937_64 eng(704);
  std::vector<bool> touched(trace.size(), false);
  const int corruptions = 13;
  for (int i = 0; i < corruptions; ++i) {
    const std::size_t at =
        static_cast<std::size_t>(testsupport::uniform(eng, 0.0, static_cast<double>(bytes.size())));
    const std::size_t clamped = std::min(at, bytes.size() - 1);
    std::uint8_t flip = 0;
    while (flip == 0) flip = static_cast<std::uint8_t>(eng() & 0xFF);
    bytes[clamped] ^= flip;
    touched[clamped / kFrameSize] = true;
  }
  std::size_t untouched = 0;
  for (bool t : touched)
    if (!t) ++untouched;

  std::vector<FrameDiagnostic> diags;
  const std::vector<ImuSample> samples = decode_frames(bytes, &diags);

  // Every surviving frame decodes; every decoded sample matches the original
  // sample carrying the same timestamp, bit for bit.
  CHECK(samples.size() >= untouched);
  CHECK(!diags.empty());
  std::map<std::int64_t, const ImuSample*> by_time;
  for (const ImuSample& s : trace) by_time[s.timestamp_ms] = &s;
  for (const ImuSample& s : samples) {
    auto it = by_time.find(s.timestamp_ms);
    REQUIRE(it != by_time.end());
    CHECK(same_sample(s, *it->second));
  }
}
