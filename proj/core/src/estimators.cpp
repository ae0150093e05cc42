#include "harsanyi/estimators.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "harsanyi/rng.hpp"

namespace harsanyi {
namespace {

constexpr int kMaxEnumeratedPermutationPlayers = 10;

std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
  return f;
}

void check_players(int n, const char* who) {
  if (n < 1 || n > kMaxPlayers) {
    throw CapacityError(std::string(who) + ": player count " + std::to_string(n) +
                        " outside [1, " + std::to_string(kMaxPlayers) + "]");
  }
}

// Adds the marginal contributions along `perm` to `phi`: n + 1 oracle calls.
void accumulate_permutation(CountingOracle& oracle, int n, const std::vector<int>& perm,
                            std::vector<double>& phi) {
  std::uint32_t bits = 0;
  double prev = oracle(PlayerSet(0, n));
  for (int p : perm) {
    bits |= 1u << p;
    const double cur = oracle(PlayerSet(bits, n));
    phi[p] += cur - prev;
    prev = cur;
  }
}

EstimateRecord finish(std::vector<double> phi, double divisor, const CountingOracle& counter,
                      EstimatorKind kind) {
  for (double& v : phi) v /= divisor;
  EstimateRecord rec;
  rec.attribution.phi = std::move(phi);
  rec.attribution.provenance = Provenance::kEstimator;
  rec.attribution.inference_count = counter.calls();
  rec.budget_used = counter.calls();
  rec.estimator = std::string(estimator_name(kind));
  return rec;
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

}  // namespace

std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kSampling:
      return "sampling";
    case EstimatorKind::kAntithetical:
      return "antithetical";
    case EstimatorKind::kKernelShap:
      return "kernelshap";
    case EstimatorKind::kKernelShapPaired:
      return "kernelshap-ps";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (auto kind : all_estimators()) {
    if (estimator_name(kind) == name) return kind;
  }
  throw ContractError("unknown estimator '" + std::string(name) +
                      "' (expected sampling|antithetical|kernelshap|kernelshap-ps)");
}

std::vector<EstimatorKind> all_estimators() {
  return {EstimatorKind::kSampling, EstimatorKind::kAntithetical, EstimatorKind::kKernelShap,
          EstimatorKind::kKernelShapPaired};
}

std::vector<int> antithetic_partner(const std::vector<int>& permutation) {
  return {permutation.rbegin(), permutation.rend()};
}

std::uint64_t enumeration_budget(EstimatorKind kind, int n) {
  switch (kind) {
    case EstimatorKind::kSampling:
      return n <= kMaxEnumeratedPermutationPlayers ? factorial(n) * (n + 1) : 0;
    case EstimatorKind::kAntithetical:
      return n <= kMaxEnumeratedPermutationPlayers
                 ? std::max<std::uint64_t>(factorial(n) * (n + 1), 2 * (n + 1))
                 : 0;
    case EstimatorKind::kKernelShap:
    case EstimatorKind::kKernelShapPaired:
      return n <= kMaxPlayers ? std::max<std::uint64_t>(std::uint64_t{1} << n, n + 2) : 0;
  }
  return 0;
}

double shapley_kernel_weight(int n, int s) {
  return static_cast<double>(n - 1) /
         (binomial(n, s) * static_cast<double>(s) * static_cast<double>(n - s));
}

EstimateRecord permutation_sampling(const ValueOracle& oracle, int n, Budget budget) {
  check_players(n, "permutation_sampling");
  const std::uint64_t per_perm = static_cast<std::uint64_t>(n) + 1;
  if (budget.inferences < per_perm) {
    throw BudgetError("permutation_sampling needs at least n+1=" + std::to_string(per_perm) +
                      " inferences, got " + std::to_string(budget.inferences));
  }
  CountingOracle counter(oracle);
  std::vector<double> phi(n, 0.0);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  const auto full = enumeration_budget(EstimatorKind::kSampling, n);
  if (full != 0 && budget.inferences >= full) {
    do {
      accumulate_permutation(counter, n, perm, phi);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return finish(std::move(phi), static_cast<double>(factorial(n)), counter,
                  EstimatorKind::kSampling);
  }

  Rng rng(budget.seed);
  const std::uint64_t count = budget.inferences / per_perm;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    accumulate_permutation(counter, n, perm, phi);
  }
  return finish(std::move(phi), static_cast<double>(count), counter, EstimatorKind::kSampling);
}

EstimateRecord antithetical_sampling(const ValueOracle& oracle, int n, Budget budget) {
  check_players(n, "antithetical_sampling");
  const std::uint64_t per_pair = 2 * (static_cast<std::uint64_t>(n) + 1);
  if (budget.inferences < per_pair) {
    throw BudgetError("antithetical_sampling needs at least 2(n+1)=" + std::to_string(per_pair) +
                      " inferences, got " + std::to_string(budget.inferences));
  }
  CountingOracle counter(oracle);
  std::vector<double> phi(n, 0.0);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  const auto full = enumeration_budget(EstimatorKind::kAntithetical, n);
  if (full != 0 && budget.inferences >= full) {
    // Each unordered {pi, reverse(pi)} once; a permutation equal to its
    // reverse (n = 1) is visited alone.
    do {
      const auto partner = antithetic_partner(perm);
      if (perm < partner) {
        accumulate_permutation(counter, n, perm, phi);
        accumulate_permutation(counter, n, partner, phi);
      } else if (perm == partner) {
        accumulate_permutation(counter, n, perm, phi);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return finish(std::move(phi), static_cast<double>(factorial(n)), counter,
                  EstimatorKind::kAntithetical);
  }

  Rng rng(budget.seed);
  const std::uint64_t pairs = budget.inferences / per_pair;
  for (std::uint64_t k = 0; k < pairs; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    accumulate_permutation(counter, n, perm, phi);
    accumulate_permutation(counter, n, antithetic_partner(perm), phi);
  }
  return finish(std::move(phi), static_cast<double>(2 * pairs), counter,
                EstimatorKind::kAntithetical);
}

EstimateRecord kernelshap(const ValueOracle& oracle, int n, Budget budget, bool paired) {
  check_players(n, "kernelshap");
  const auto kind = paired ? EstimatorKind::kKernelShapPaired : EstimatorKind::kKernelShap;
  const std::uint64_t minimum = static_cast<std::uint64_t>(n) + 2;
  if (budget.inferences < minimum) {
    throw BudgetError("kernelshap needs at least n+2=" + std::to_string(minimum) +
                      " inferences, got " + std::to_string(budget.inferences));
  }
  CountingOracle counter(oracle);
  const std::uint32_t full_bits = PlayerSet::full_mask(n);
  const double v_empty = counter(PlayerSet(0, n));
  const double v_full = counter(PlayerSet(full_bits, n));
  const double total = v_full - v_empty;

  // Accumulated normal equations Z^T W Z and Z^T W y.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  auto add_row = [&](std::uint32_t bits, double weight) {
    const double y = counter(PlayerSet(bits, n)) - v_empty;
    for (std::uint32_t a = bits; a != 0; a &= a - 1) {
      const int i = std::countr_zero(a);
      rhs[i] += weight * y;
      for (std::uint32_t b = bits; b != 0; b &= b - 1) gram(i, std::countr_zero(b)) += weight;
    }
  };

  if (budget.inferences >= enumeration_budget(kind, n)) {
    for (std::uint32_t s = 1; s < full_bits; ++s) {
      add_row(s, shapley_kernel_weight(n, std::popcount(s)));
    }
  } else if (n > 1) {
    // Coalition sizes drawn with probability proportional to the kernel
    // mass of each size, (n-1) / (s (n-s)); members uniform given the size.
    std::vector<double> size_mass(n - 1);
    for (int s = 1; s < n; ++s) size_mass[s - 1] = 1.0 / (static_cast<double>(s) * (n - s));
    std::discrete_distribution<int> size_dist(size_mass.begin(), size_mass.end());
    Rng rng(budget.seed);
    std::vector<int> players(n);
    auto draw = [&]() {
      const int s = size_dist(rng) + 1;
      std::iota(players.begin(), players.end(), 0);
      std::uint32_t bits = 0;
      for (int k = 0; k < s; ++k) {
        std::uniform_int_distribution<int> pick(k, n - 1);
        std::swap(players[k], players[pick(rng)]);
        bits |= 1u << players[k];
      }
      return bits;
    };
    const std::uint64_t spare = budget.inferences - 2;
    if (paired) {
      for (std::uint64_t k = 0; k < spare / 2; ++k) {
        const std::uint32_t bits = draw();
        add_row(bits, 1.0);
        add_row(~bits & full_bits, 1.0);
      }
    } else {
      for (std::uint64_t k = 0; k < spare; ++k) add_row(draw(), 1.0);
    }
  }

  // [Z^T W Z  1; 1^T  0] [phi; lambda] = [Z^T W y; V(N) - V(empty)]
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  const double scale = gram.cwiseAbs().maxCoeff() > 0 ? gram.cwiseAbs().maxCoeff() : 1.0;
  kkt.topLeftCorner(n, n) = gram / scale;
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(n, 0, 1, n).setOnes();
  Eigen::VectorXd b(n + 1);
  b.head(n) = rhs / scale;
  b[n] = total;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  lu.setThreshold(1e-10);
  if (lu.rank() < n + 1) {
    throw RankError("kernelshap: sampled coalitions span rank " + std::to_string(lu.rank()) +
                    " of " + std::to_string(n + 1) + "; increase the budget");
  }
  const Eigen::VectorXd x = lu.solve(b);
  std::vector<double> phi(x.data(), x.data() + n);
  return finish(std::move(phi), 1.0, counter, kind);
}

EstimateRecord run_estimator(EstimatorKind kind, const ValueOracle& oracle, int n,
                             Budget budget) {
  switch (kind) {
    case EstimatorKind::kSampling:
      return permutation_sampling(oracle, n, budget);
    case EstimatorKind::kAntithetical:
      return antithetical_sampling(oracle, n, budget);
    case EstimatorKind::kKernelShap:
      return kernelshap(oracle, n, budget, false);
    case EstimatorKind::kKernelShapPaired:
      return kernelshap(oracle, n, budget, true);
  }
  throw ContractError("unknown estimator kind");
}

}  // namespace harsanyi
