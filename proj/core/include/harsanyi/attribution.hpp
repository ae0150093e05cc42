#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace harsanyi {

enum class Provenance { kBruteForce, kHarsanyiExact, kEstimator };

std::string_view provenance_name(Provenance p);

// Per-player attributions phi(i) for one sample.
struct AttributionVector {
  std::vector<double> phi;
  Provenance provenance = Provenance::kBruteForce;
  // Model evaluations consumed to produce `phi`.
  std::uint64_t inference_count = 0;

  int size() const { return static_cast<int>(phi.size()); }
  double total() const;
};

// Per-sample error (1/sqrt(n)) * ||estimate - truth||_2.
double rmse(std::span<const double> estimate, std::span<const double> truth);
double rmse(const AttributionVector& estimate, const AttributionVector& truth);

// Dataset-level error: mean of the per-sample values.
double mean_rmse(std::span<const AttributionVector> estimates,
                 std::span<const AttributionVector> truths);

}  // namespace harsanyi
