#include "harsanyi/attribution.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "harsanyi/errors.hpp"

namespace harsanyi {

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kBruteForce:
      return "bruteforce";
    case Provenance::kHarsanyiExact:
      return "harsanyi_exact";
    case Provenance::kEstimator:
      return "estimator";
  }
  return "unknown";
}

double AttributionVector::total() const {
  return std::accumulate(phi.begin(), phi.end(), 0.0);
}

double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) {
    throw ContractError("rmse: length mismatch " + std::to_string(estimate.size()) + " vs " +
                        std::to_string(truth.size()));
  }
  if (estimate.empty()) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate[i] - truth[i];
    sq += d * d;
  }
  return std::sqrt(sq) / std::sqrt(static_cast<double>(estimate.size()));
}

double rmse(const AttributionVector& estimate, const AttributionVector& truth) {
  return rmse(estimate.phi, truth.phi);
}

double mean_rmse(std::span<const AttributionVector> estimates,
                 std::span<const AttributionVector> truths) {
  if (estimates.size() != truths.size()) {
    throw ContractError("mean_rmse: sample count mismatch");
  }
  if (estimates.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) sum += rmse(estimates[k], truths[k]);
  return sum / static_cast<double>(estimates.size());
}

}  // namespace harsanyi
