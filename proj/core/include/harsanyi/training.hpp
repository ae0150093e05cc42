#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "harsanyi/cnn.hpp"
#include "harsanyi/dataset.hpp"
#include "harsanyi/mlp.hpp"

namespace harsanyi {

enum class InitKind { kMlpFixedFanin, kCnnGaussian };

std::string_view init_kind_name(InitKind kind);

struct InitScheme {
  InitKind kind = InitKind::kMlpFixedFanin;
  // Selected children per unit for kMlpFixedFanin.
  int fanin = 10;
  // Standard deviation of tau entries for kCnnGaussian.
  double tau_sd = 0.01;
};

enum class OptimizerKind { kAdam };

struct TrainConfig {
  double beta = 10.0;
  double gamma = 100.0;
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  InitScheme init;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// Backward surrogate for the selector step 1(tau > 0):
// beta * e^-tau / (1 + e^-tau)^2.
double ste_surrogate_grad(double tau, double beta);

// Gradients with the same layout as the model's parameters.
struct MlpGradients {
  std::vector<std::vector<double>> tau;      // per block, units x pool
  std::vector<std::vector<double>> weights;  // per block, units x pool
  std::vector<double> head;                  // classes x units
  // dL/dSigma for every selector entry, before the STE surrogate.
  std::vector<std::vector<double>> selector;

  explicit MlpGradients(const HarsanyiMlp& model);
};

struct CnnGradients {
  std::vector<double> stem_weights;
  std::vector<double> stem_bias;
  std::vector<std::vector<double>> tau;
  std::vector<std::vector<double>> weights;
  std::vector<double> head;

  explicit CnnGradients(const HarsanyiCnn& model);
};

// A batch of rows (already baseline-shifted inputs) with class labels.
struct Batch {
  std::span<const double> inputs;  // rows x row_size
  std::span<const int> labels;
  int row_size = 0;

  int size() const { return static_cast<int>(labels.size()); }
  std::span<const double> row(int r) const {
    return inputs.subspan(static_cast<std::size_t>(r) * row_size, row_size);
  }
};

// Mean softmax cross-entropy of a minibatch, evaluated with the soft AND,
// and its reverse-mode gradients.
struct MlpTape {
  double loss = 0.0;
  int correct = 0;
  MlpGradients grads;
};

struct CnnTape {
  double loss = 0.0;
  int correct = 0;
  CnnGradients grads;
};

MlpTape loss_and_gradients(const HarsanyiMlp& model, const Batch& batch);
CnnTape loss_and_gradients(const HarsanyiCnn& model, const Batch& batch);

// Loss only (no tape), same forward as loss_and_gradients.
double batch_loss(const HarsanyiMlp& model, const Batch& batch);
double batch_loss(const HarsanyiCnn& model, const Batch& batch);

// mlp_fixed_fanin: per unit a uniform k-subset of the pool gets tau = +1 and
// the rest -1. cnn_gaussian: tau ~ N(0, sd^2). Weights A ~ U(-a, a) with
// a = 1/sqrt(f), f the unit's expected selected fan-in; head ~ U(-c, c) with
// c = 1/sqrt(total units); stem weights ~ U(-1/sqrt(fan-in), ..), bias 0.
void init_params(HarsanyiMlp& model, const InitScheme& scheme, std::uint64_t seed);
void init_params(HarsanyiCnn& model, const InitScheme& scheme, std::uint64_t seed);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

template <typename Model>
struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

// Initializes parameters from config.seed, then runs Adam on shuffled
// minibatches. `validation` may be empty (val_acc reported as 0).
TrainResult<HarsanyiMlp> train(HarsanyiMlp model, const Dataset& data, const Dataset& validation,
                               const TrainConfig& config);
TrainResult<HarsanyiCnn> train(HarsanyiCnn model, const Dataset& data, const Dataset& validation,
                               const TrainConfig& config);

double accuracy(const HarsanyiMlp& model, const Dataset& data, AndMode mode);
double accuracy(const HarsanyiCnn& model, const Dataset& data, AndMode mode);

// `# key=value` header block echoing the config, then
// `epoch,loss,train_acc,val_acc` rows.
void write_metrics_csv(std::ostream& out, const TrainConfig& config,
                       std::span<const EpochMetrics> log);

}  // namespace harsanyi
