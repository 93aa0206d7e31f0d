#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace apsq {

/// Exact signed fixed-point number with 16 fractional bits on a 128-bit carrier.
///
/// Every value the datapath produces is `code * 2^e` with e >= -16, or a sum of
/// such values and integer PSUMs, so this representation never rounds.
class Fixed {
 public:
  using Raw = __int128;
  static constexpr int kFracBits = 16;

  constexpr Fixed() = default;

  static constexpr Fixed from_int(std::int64_t v) { return Fixed(static_cast<Raw>(v) * kOne); }
  static constexpr Fixed from_raw(Raw raw) { return Fixed(raw); }

  constexpr Raw raw() const { return raw_; }
  constexpr bool is_integer() const { return raw_ % kOne == 0; }

  /// Truncates toward zero; only meaningful when is_integer().
  constexpr std::int64_t to_int() const { return static_cast<std::int64_t>(raw_ / kOne); }
  double to_double() const { return static_cast<double>(raw_) / static_cast<double>(kOne); }

  constexpr Fixed operator+(Fixed o) const { return Fixed(raw_ + o.raw_); }
  constexpr Fixed operator-(Fixed o) const { return Fixed(raw_ - o.raw_); }
  constexpr Fixed operator-() const { return Fixed(-raw_); }
  constexpr Fixed& operator+=(Fixed o) {
    raw_ += o.raw_;
    return *this;
  }
  constexpr auto operator<=>(const Fixed&) const = default;

  /// Exact decimal rendering, e.g. "-3.5" or "12".
  std::string to_string() const {
    const bool neg = raw_ < 0;
    unsigned __int128 mag = neg ? static_cast<unsigned __int128>(-(raw_ + 1)) + 1
                                : static_cast<unsigned __int128>(raw_);
    unsigned __int128 whole = mag >> kFracBits;
    unsigned __int128 frac = mag & (kOne - 1);
    std::string digits;
    do {
      digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
      whole /= 10;
    } while (whole != 0);
    if (frac != 0) {
      digits.push_back('.');
      // 2^-16 has 16 decimal digits, so this loop terminates exactly.
      while (frac != 0) {
        frac *= 10;
        digits.push_back(static_cast<char>('0' + static_cast<int>(frac >> kFracBits)));
        frac &= (kOne - 1);
      }
    }
    return neg ? "-" + digits : digits;
  }

 private:
  static constexpr Raw kOne = Raw{1} << kFracBits;
  constexpr explicit Fixed(Raw raw) : raw_(raw) {}

  Raw raw_ = 0;
};

}  // namespace apsq
