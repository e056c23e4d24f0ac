#pragma once

#include <cstdint>

namespace pcomm {

// Canonical internal units: bytes and seconds. Anything else is converted at
// the CLI/config boundary.
using Bytes = std::uint64_t;
using Seconds = double;
using SecondsPerByte = double;
using BytesPerSecond = double;

namespace units {

inline constexpr double kMicro = 1e-6;
// 1 us/MB = 1e-6 s / 1e6 B.
inline constexpr SecondsPerByte kMicrosPerMegabyte = 1e-12;
inline constexpr BytesPerSecond kGigabytePerSecond = 1e9;
inline constexpr Bytes kKiB = 1024;
inline constexpr Bytes kMiB = 1024 * 1024;

constexpr SecondsPerByte from_us_per_mb(double v) { return v * kMicrosPerMegabyte; }
constexpr double to_us_per_mb(SecondsPerByte v) { return v / kMicrosPerMegabyte; }
constexpr BytesPerSecond from_gb_per_s(double v) { return v * kGigabytePerSecond; }
constexpr Seconds from_us(double v) { return v * kMicro; }
constexpr double to_us(Seconds v) { return v / kMicro; }

}  // namespace units
}  // namespace pcomm
