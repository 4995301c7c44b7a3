#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

namespace adviser {

// USD amount held as an integer count of micro-dollars. Arithmetic on Money
// is exact; conversion from a floating value rounds half away from zero.
class Money {
 public:
  static constexpr std::int64_t kMicrosPerDollar = 1'000'000;

  constexpr Money() = default;

  static constexpr Money from_micros(std::int64_t micros) {
    Money m;
    m.micros_ = micros;
    return m;
  }
  static Money from_dollars(double dollars) {
    return from_micros(static_cast<std::int64_t>(
        std::llround(dollars * static_cast<double>(kMicrosPerDollar))));
  }

  constexpr std::int64_t micros() const { return micros_; }
  double dollars() const {
    return static_cast<double>(micros_) / static_cast<double>(kMicrosPerDollar);
  }

  // "12.345678" with all six fractional digits.
  std::string to_string() const;

  constexpr Money operator+(Money o) const { return from_micros(micros_ + o.micros_); }
  constexpr Money operator-(Money o) const { return from_micros(micros_ - o.micros_); }
  constexpr Money& operator+=(Money o) {
    micros_ += o.micros_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    micros_ -= o.micros_;
    return *this;
  }
  constexpr auto operator<=>(const Money&) const = default;

 private:
  std::int64_t micros_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, Money m) {
  return os << m.to_string();
}

}  // namespace adviser
