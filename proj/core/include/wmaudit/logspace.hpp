#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace wmaudit {

/// A positive quantity carried as its natural logarithm, so factors such
/// as 10^1028 survive arithmetic and printing.
class LogScalar {
 public:
  constexpr LogScalar() = default;
  static constexpr LogScalar from_log(double log_value) { return LogScalar(log_value); }
  static LogScalar from_value(double value) { return LogScalar(std::log(value)); }

  constexpr double log() const noexcept { return log_; }
  double log10() const noexcept { return log_ / std::log(10.0); }
  /// May overflow to +inf or underflow to 0.
  double value() const noexcept { return std::exp(log_); }

  friend LogScalar operator*(LogScalar a, LogScalar b) { return LogScalar(a.log_ + b.log_); }
  friend LogScalar operator/(LogScalar a, LogScalar b) { return LogScalar(a.log_ - b.log_); }
  friend bool operator<(LogScalar a, LogScalar b) { return a.log_ < b.log_; }
  friend bool operator<=(LogScalar a, LogScalar b) { return a.log_ <= b.log_; }

  /// "m.mmme+EEE" without going through a double that could overflow.
  std::string to_scientific(int digits = 3) const {
    if (std::isinf(log_)) return log_ > 0 ? "inf" : "0";
    if (std::isnan(log_)) return "nan";
    const double l10 = log10();
    double exponent = std::floor(l10);
    double mantissa = std::pow(10.0, l10 - exponent);
    if (mantissa >= 10.0) {
      mantissa /= 10.0;
      exponent += 1.0;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*fe%+.0f", digits, mantissa, exponent);
    return buf;
  }

 private:
  constexpr explicit LogScalar(double log_value) : log_(log_value) {}
  double log_ = 0.0;
};

}  // namespace wmaudit
