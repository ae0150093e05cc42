#pragma once

// Seeded generators and independent oracles shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "harsanyi/cnn.hpp"
#include "harsanyi/game.hpp"
#include "harsanyi/mlp.hpp"
#include "harsanyi/rng.hpp"

namespace harsanyi::testing {

inline Rng rng_for(std::uint64_t seed) { return make_rng(seed, Stream::kSynthetic); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline GameTable random_game(int n, Rng& rng, double scale = 1.0) {
  GameTable g(n, GameKind::kReward);
  for (std::size_t s = 1; s < g.size(); ++s) g[static_cast<std::uint32_t>(s)] = uniform(rng, -scale, scale);
  return g;
}

// Integer-valued game, so sums of dividends are exact in double.
inline GameTable integer_game(int n, Rng& rng) {
  GameTable g(n, GameKind::kReward);
  std::uniform_int_distribution<int> d(-20, 20);
  for (std::size_t s = 1; s < g.size(); ++s) g[static_cast<std::uint32_t>(s)] = d(rng);
  return g;
}

inline GameTable additive_game(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  GameTable g(n, GameKind::kReward);
  for (std::uint32_t s = 0; s < g.size(); ++s) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      if ((s >> i) & 1u) v += c[i];
    }
    g[s] = v;
  }
  return g;
}

inline ValueOracle oracle_of(const GameTable& g) {
  return [&g](PlayerSet s) { return g.at(s); };
}

// Dividends by the literal recursion I(S) = V(S) - sum over proper subsets L of I(L),
// processed in order of increasing coalition size.
inline GameTable literal_dividends(const GameTable& v) {
  const int n = v.n();
  GameTable out(n, GameKind::kInteraction);
  std::vector<std::uint32_t> order(v.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });
  for (std::uint32_t s : order) {
    if (s == 0) continue;
    double acc = v[s];
    for (std::uint32_t l = (s - 1) & s;; l = (l - 1) & s) {
      acc -= out[l];
      if (l == 0) break;
    }
    out[s] = acc;
  }
  return out;
}

// Shapley values as the average marginal contribution over all n!
// orderings. Independent of the coalition-weight formula.
inline std::vector<double> permutation_shapley(const GameTable& v) {
  const int n = v.n();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    std::uint32_t s = 0;
    for (int i : perm) {
      phi[i] += v[s | (1u << i)] - v[s];
      s |= 1u << i;
    }
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& p : phi) p /= count;
  return phi;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct RandomMlpOptions {
  int inputs = 8;
  std::vector<int> units{6, 6, 6};
  double select_prob = 0.35;
  ChildrenScope scope = ChildrenScope::kPreviousBlockOnly;
  AndMode mode = AndMode::kSoft;
  double gamma = 2.0;
  // Lower edge of A; a positive value keeps most units active.
  double weight_lo = -0.3;
  double weight_hi = 1.0;
  int class_count = 2;
};

// Random selectors (roughly select_prob of the pool picked, tau values kept
// away from 0), random A and head. Every unit picks at least one child.
inline HarsanyiMlp random_mlp(const RandomMlpOptions& o, Rng& rng) {
  ModelConfig cfg;
  cfg.input_dim = o.inputs;
  cfg.units = o.units;
  cfg.class_count = o.class_count;
  cfg.gamma = o.gamma;
  cfg.children_scope = o.scope;
  cfg.and_mode = o.mode;
  HarsanyiMlp model(cfg);
  for (int l = 0; l < model.block_count(); ++l) {
    auto& b = model.block(l);
    for (int u = 0; u < b.units; ++u) {
      bool any = false;
      for (int j = 0; j < b.pool_size; ++j) {
        const bool pick = uniform(rng, 0.0, 1.0) < o.select_prob;
        any = any || pick;
        b.tau[std::size_t(u) * b.pool_size + j] = pick ? uniform(rng, 0.1, 1.0) : uniform(rng, -1.0, -0.1);
        b.weights[std::size_t(u) * b.pool_size + j] = uniform(rng, o.weight_lo, o.weight_hi);
      }
      if (!any) {
        const int j = std::uniform_int_distribution<int>(0, b.pool_size - 1)(rng);
        b.tau[std::size_t(u) * b.pool_size + j] = 0.5;
      }
    }
  }
  for (double& w : model.head()) w = uniform(rng, -1.0, 1.0);
  return model;
}

inline Sample random_sample(int d, Rng& rng, double spread = 1.0) {
  Sample s;
  s.x.resize(d);
  for (double& v : s.x) v = std::normal_distribution<double>(0.0, spread)(rng);
  return s;
}

struct RandomCnnOptions {
  int height = 4;
  int width = 4;
  int in_channels = 1;
  int stem_channels = 3;
  int pool = 1;
  int blocks = 2;
  int channels = 3;
  int kernel = 3;
  double select_prob = 0.5;
  AndMode mode = AndMode::kSoft;
  double gamma = 1.0;
};

inline HarsanyiCnn random_cnn(const RandomCnnOptions& o, Rng& rng) {
  CnnConfig cfg;
  cfg.stem = {o.in_channels, o.height, o.width, 3, o.stem_channels, o.pool};
  cfg.blocks = o.blocks;
  cfg.channels = o.channels;
  cfg.kernel = o.kernel;
  cfg.gamma = o.gamma;
  cfg.and_mode = o.mode;
  HarsanyiCnn model(cfg);
  for (double& w : model.stem().weights) w = uniform(rng, -0.5, 1.0);
  for (double& b : model.stem().bias) b = uniform(rng, 0.0, 0.2);
  for (auto& b : model.blocks()) {
    for (double& t : b.tau) {
      t = uniform(rng, 0.0, 1.0) < o.select_prob ? uniform(rng, 0.1, 1.0) : uniform(rng, -1.0, -0.1);
    }
    for (double& w : b.weights) w = uniform(rng, -0.3, 1.0);
  }
  for (double& w : model.head()) w = uniform(rng, -1.0, 1.0);
  return model;
}

inline std::vector<double> random_image(int size, Rng& rng) {
  std::vector<double> img(size);
  for (double& v : img) v = uniform(rng, 0.0, 1.0);
  return img;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("harsanyi-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace harsanyi::testing
