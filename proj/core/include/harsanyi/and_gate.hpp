#pragma once

#include <cmath>
#include <span>
#include <string_view>

namespace harsanyi {

enum class AndMode { kHard, kSoft };

std::string_view and_mode_name(AndMode mode);
AndMode parse_and_mode(std::string_view name);

// Children with more than this many factors are combined in log space.
inline constexpr int kSoftAndLogThreshold = 16;

// Multiplier applied to a unit's linear response by the AND gate, given the
// nonnegative activation signal of each selected child.
//
// Hard: 1 if every signal is nonzero, else 0.
// Soft: geometric mean of tanh(gamma * signal), exactly 0 if any signal is 0.
// An empty child list yields 0.
inline double and_gate(std::span<const double> signals, AndMode mode, double gamma) {
  if (signals.empty()) return 0.0;
  for (double s : signals) {
    if (s == 0.0) return 0.0;
  }
  if (mode == AndMode::kHard) return 1.0;
  const double inv_k = 1.0 / static_cast<double>(signals.size());
  if (static_cast<int>(signals.size()) > kSoftAndLogThreshold) {
    double log_sum = 0.0;
    for (double s : signals) log_sum += std::log(std::tanh(gamma * s));
    return std::exp(log_sum * inv_k);
  }
  double product = 1.0;
  for (double s : signals) product *= std::tanh(gamma * s);
  return std::pow(product, inv_k);
}

}  // namespace harsanyi
