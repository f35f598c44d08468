// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "moemem/error.hpp"
#include "moemem/rational.hpp"

namespace moemem {

using ParamCount = std::int64_t;
using ByteCount = std::int64_t;

inline constexpr ByteCount kKiB = 1024;
inline constexpr ByteCount kMiB = kKiB * 1024;
inline constexpr ByteCount kGiB = kMiB * 1024;

// Display helpers. Memory is reported in binary units but labeled MB/GB,
// matching how capacity tables for training jobs are usually written.
// Rounding is half-up and done in integer arithmetic so output is stable.
namespace units {

inline std::string fixed_ratio(int128 value, int128 divisor, int decimals) {
  int128 scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  bool negative = value < 0;
  if (negative) value = -value;
  int128 scaled = (value * scale * 2 + divisor) / (divisor * 2);
  auto whole = static_cast<std::int64_t>(scaled / scale);
  auto frac = static_cast<std::int64_t>(scaled % scale);
  std::string out = (negative ? "-" : "") + std::to_string(whole);
  if (decimals > 0) {
    std::string f = std::to_string(frac);
    out += "." + std::string(static_cast<std::size_t>(decimals) - f.size(), '0') + f;
  }
  return out;
}

inline std::string gib(ByteCount bytes, int decimals = 2) { return fixed_ratio(bytes, kGiB, decimals); }
inline std::string mib(ByteCount bytes, int decimals = 1) { return fixed_ratio(bytes, kMiB, decimals); }
inline std::string kib(ByteCount bytes, int decimals = 0) { return fixed_ratio(bytes, kKiB, decimals); }

// Parameter counts in units of 10^9 ("671 B").
inline std::string billions(ParamCount count, int decimals = 2) {
  return fixed_ratio(count, 1'000'000'000, decimals);
}

// 671026522112 -> "671,026,522,112"
inline std::string grouped(std::int64_t value) {
  std::string digits = std::to_string(value < 0 ? -value : value);
  std::string out;
  int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[static_cast<std::size_t>(i)];
  }
  return value < 0 ? "-" + out : out;
}

// "80GiB", "1.5 GB", "512MiB", "1073741824". GB/MB/KB are read as binary
// units, same as the display side. Fractional byte counts are floored.
inline ByteCount parse_bytes(std::string_view text) {
  std::size_t end = 0;
  while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.')) ++end;
  std::string_view number = text.substr(0, end);
  std::string suffix;
  for (char c : text.substr(end)) {
    if (!std::isspace(static_cast<unsigned char>(c))) suffix += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  ByteCount unit = 1;
  if (suffix.empty() || suffix == "b") unit = 1;
  else if (suffix == "k" || suffix == "kb" || suffix == "kib") unit = kKiB;
  else if (suffix == "m" || suffix == "mb" || suffix == "mib") unit = kMiB;
  else if (suffix == "g" || suffix == "gb" || suffix == "gib") unit = kGiB;
  else throw ValidationError("unknown byte unit in '" + std::string(text) + "'");
  Rational value = Rational::parse(number) * unit;
  if (value < 0) throw ValidationError("byte size must be non-negative: '" + std::string(text) + "'");
  return value.floor();
}

}  // namespace units
}  // namespace moemem
