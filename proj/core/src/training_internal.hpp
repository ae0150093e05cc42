#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "harsanyi/training.hpp"

namespace harsanyi::detail {

// Writes dL/dlogit for one sample (already divided by the batch size) and
// returns its cross-entropy.
inline double softmax_xent(std::span<const double> logits, int label, double scale,
                           std::span<double> dlogits) {
  double peak = logits[0];
  for (double v : logits) peak = std::max(peak, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - peak);
  const double log_z = peak + std::log(denom);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double p = std::exp(logits[c] - log_z);
    dlogits[c] = scale * (p - (static_cast<int>(c) == label ? 1.0 : 0.0));
  }
  return log_z - logits[label];
}

inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = static_cast<int>(k);
  }
  return best;
}

// Adam over a fixed list of parameter vectors.
class Adam {
 public:
  Adam(std::vector<std::vector<double>*> params, const TrainConfig& config)
      : params_(std::move(params)), config_(config) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void step(const std::vector<const std::vector<double>*>& grads) {
    ++t_;
    const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      const auto& g = *grads[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_epsilon);
      }
    }
  }

 private:
  std::vector<std::vector<double>*> params_;
  std::vector<std::vector<double>> m_, v_;
  TrainConfig config_;
  long long t_ = 0;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace harsanyi::detail
