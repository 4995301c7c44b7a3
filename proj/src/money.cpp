#include "adviser/money.hpp"

#include <cstdio>
#include <cstdlib>

namespace adviser {

std::string Money::to_string() const {
  const auto whole = std::llabs(micros_ / kMicrosPerDollar);
  const auto frac = std::llabs(micros_ % kMicrosPerDollar);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", micros_ < 0 ? "-" : "",
                static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

}  // namespace adviser
