#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "harsanyi/attribution.hpp"
#include "harsanyi/game.hpp"

namespace harsanyi {

struct Budget {
  // Upper bound on oracle calls.
  std::uint64_t inferences = 0;
  std::uint64_t seed = 0;
};

struct EstimateRecord {
  AttributionVector attribution;
  std::uint64_t budget_used = 0;
  std::string estimator;
};

enum class EstimatorKind { kSampling, kAntithetical, kKernelShap, kKernelShapPaired };

std::string_view estimator_name(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view name);
std::vector<EstimatorKind> all_estimators();

// Wraps an oracle and counts every call.
class CountingOracle {
 public:
  explicit CountingOracle(const ValueOracle& inner) : inner_(inner) {}
  double operator()(PlayerSet s) {
    ++calls_;
    return inner_(s);
  }
  std::uint64_t calls() const { return calls_; }

 private:
  const ValueOracle& inner_;
  std::uint64_t calls_ = 0;
};

// Reverse of the permutation; the partner drawn by antithetical sampling.
std::vector<int> antithetic_partner(const std::vector<int>& permutation);

// Monte-Carlo over random permutations with prefix caching: each permutation
// costs n + 1 calls. With budget >= n! (n + 1) and n <= 10 every permutation
// is enumerated once instead.
EstimateRecord permutation_sampling(const ValueOracle& oracle, int n, Budget budget);

// Permutations drawn in (pi, reverse(pi)) pairs, 2 (n + 1) calls per pair.
// Enumerates every permutation once when the budget covers n! (n + 1).
EstimateRecord antithetical_sampling(const ValueOracle& oracle, int n, Budget budget);

// Shapley-kernel weighted least squares with the efficiency constraint
// imposed exactly. V(empty) and V(N) are always evaluated; the remaining
// budget buys sampled coalitions (or complement pairs when `paired`). With
// budget >= 2^n every proper coalition is used with its exact kernel weight.
EstimateRecord kernelshap(const ValueOracle& oracle, int n, Budget budget, bool paired);

EstimateRecord run_estimator(EstimatorKind kind, const ValueOracle& oracle, int n,
                             Budget budget);

// Budget at which the estimator switches to exhaustive enumeration, or 0
// when n is too large for that.
std::uint64_t enumeration_budget(EstimatorKind kind, int n);

// Shapley kernel weight (n-1) / (C(n,s) s (n-s)) for 0 < s < n.
double shapley_kernel_weight(int n, int s);

}  // namespace harsanyi
