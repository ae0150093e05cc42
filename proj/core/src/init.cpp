#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "harsanyi/rng.hpp"
#include "harsanyi/training.hpp"

namespace harsanyi {
namespace {

void fill_uniform(std::vector<double>& v, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : v) x = dist(rng);
}

}  // namespace

std::string_view init_kind_name(InitKind kind) {
  return kind == InitKind::kMlpFixedFanin ? "mlp_fixed_fanin" : "cnn_gaussian";
}

void init_params(HarsanyiMlp& model, const InitScheme& scheme, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::kInit);
  std::normal_distribution<double> gauss(0.0, scheme.tau_sd);
  for (int l = 0; l < model.block_count(); ++l) {
    auto& b = model.block(l);
    double expected_fanin = 0.0;
    if (scheme.kind == InitKind::kMlpFixedFanin) {
      if (scheme.fanin < 1 || scheme.fanin > b.pool_size) {
        throw ContractError("fan-in " + std::to_string(scheme.fanin) + " exceeds the pool of " +
                            std::to_string(b.pool_size) + " candidates in block " +
                            std::to_string(l));
      }
      std::vector<int> pool(b.pool_size);
      for (int u = 0; u < b.units; ++u) {
        std::iota(pool.begin(), pool.end(), 0);
        double* tau = b.tau.data() + static_cast<std::size_t>(u) * b.pool_size;
        std::fill(tau, tau + b.pool_size, -1.0);
        for (int k = 0; k < scheme.fanin; ++k) {
          std::uniform_int_distribution<int> pick(k, b.pool_size - 1);
          std::swap(pool[k], pool[pick(rng)]);
          tau[pool[k]] = 1.0;
        }
      }
      expected_fanin = scheme.fanin;
    } else {
      for (double& t : b.tau) t = gauss(rng);
      expected_fanin = std::max(1.0, 0.5 * b.pool_size);
    }
    fill_uniform(b.weights, 1.0 / std::sqrt(expected_fanin), rng);
  }
  fill_uniform(model.head(), 1.0 / std::sqrt(static_cast<double>(model.total_units())), rng);
}

void init_params(HarsanyiCnn& model, const InitScheme& scheme, std::uint64_t seed) {
  if (scheme.kind != InitKind::kCnnGaussian) {
    throw ContractError("conv models take the cnn_gaussian init scheme");
  }
  auto rng = make_rng(seed, Stream::kInit);
  const auto& s = model.config().stem;
  fill_uniform(model.stem().weights, 1.0 / std::sqrt(double(s.in_channels * s.kernel * s.kernel)),
               rng);
  std::fill(model.stem().bias.begin(), model.stem().bias.end(), 0.0);
  std::normal_distribution<double> gauss(0.0, scheme.tau_sd);
  for (auto& b : model.blocks()) {
    for (double& t : b.tau) t = gauss(rng);
    fill_uniform(b.weights, 1.0 / std::sqrt(std::max(1.0, 0.5 * b.in_channels * b.taps())), rng);
  }
  fill_uniform(model.head(), 1.0 / std::sqrt(static_cast<double>(model.total_units())), rng);
}

}  // namespace harsanyi
