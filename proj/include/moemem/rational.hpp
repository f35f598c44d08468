// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "moemem/error.hpp"

namespace moemem {

// 128-bit intermediates for exact products of 64-bit values.
__extension__ using int128 = __int128;

// Exact fraction over 64-bit integers, always stored in lowest terms with a
// positive denominator. Intermediate products use 128-bit arithmetic and
// overflow on reduction throws std::overflow_error.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT: implicit by intent
  Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_integer() const { return den_ == 1; }

  std::int64_t floor() const {
    std::int64_t q = num_ / den_;
    return (num_ % den_ != 0 && num_ < 0) ? q - 1 : q;
  }
  std::int64_t ceil() const {
    std::int64_t q = num_ / den_;
    return (num_ % den_ != 0 && num_ > 0) ? q + 1 : q;
  }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from_wide(wide(a.num_) * b.den_ + wide(b.num_) * a.den_, wide(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return from_wide(wide(a.num_) * b.den_ - wide(b.num_) * a.den_, wide(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_wide(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return from_wide(wide(a.num_) * b.den_, wide(a.den_) * b.num_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return wide(a.num_) * b.den_ <=> wide(b.num_) * a.den_;
  }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

  // Accepts "3", "-2", "0.125", "1/8". Decimal input is converted exactly.
  static Rational parse(std::string_view text) {
    auto fail = [&] { return ValidationError("not a number: '" + std::string(text) + "'"); };
    if (text.empty()) throw fail();
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      Rational n = parse(text.substr(0, slash));
      Rational d = parse(text.substr(slash + 1));
      if (d.num_ == 0) throw fail();
      return n / d;
    }
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') {
      negative = text[0] == '-';
      i = 1;
    }
    int128 num = 0;
    int128 den = 1;
    bool seen_point = false;
    bool seen_digit = false;
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c == '.' && !seen_point) {
        seen_point = true;
        continue;
      }
      if (c < '0' || c > '9') throw fail();
      seen_digit = true;
      num = num * 10 + (c - '0');
      if (seen_point) den *= 10;
      if (num > kMax || den > kMax) throw fail();
    }
    if (!seen_digit) throw fail();
    return from_wide(negative ? -num : num, den);
  }

 private:
  using Wide = int128;
  static constexpr Wide kMax = INT64_MAX;
  static Wide wide(std::int64_t v) { return static_cast<Wide>(v); }

  static Wide gcd_wide(Wide a, Wide b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      Wide t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational from_wide(Wide num, Wide den) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    Wide g = gcd_wide(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num > kMax || num < -kMax || den > kMax) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  void assign(std::int64_t num, std::int64_t den) { *this = from_wide(num, den); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace moemem
