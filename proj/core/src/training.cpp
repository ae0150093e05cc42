#include "harsanyi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "harsanyi/rng.hpp"
#include "training_internal.hpp"

namespace harsanyi {

using detail::argmax;
using detail::softmax_xent;

void TrainConfig::validate() const {
  if (!(beta > 0.0) || !(gamma > 0.0)) throw ContractError("beta and gamma must be positive");
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  if (epochs < 0) throw ContractError("epochs must be nonnegative");
  if (batch_size < 1) throw ContractError("batch size must be positive");
}

double ste_surrogate_grad(double tau, double beta) {
  // Written in terms of e^-|tau| so large |tau| cannot overflow; the
  // expression is even in tau.
  const double e = std::exp(-std::abs(tau));
  return beta * e / ((1.0 + e) * (1.0 + e));
}

MlpGradients::MlpGradients(const HarsanyiMlp& model) {
  for (const auto& b : model.blocks()) {
    tau.emplace_back(b.tau.size(), 0.0);
    weights.emplace_back(b.weights.size(), 0.0);
    selector.emplace_back(b.tau.size(), 0.0);
  }
  head.assign(model.head().size(), 0.0);
}

namespace {

// Soft-AND forward of one sample with everything the backward pass needs.
struct MlpForward {
  std::vector<double> flat;  // [z0 | units]
  std::vector<double> g;     // per unit
  std::vector<double> gate;  // per unit
  std::vector<double> h;     // per unit
  std::vector<int> k;        // selected children per unit
};

void forward_record(const HarsanyiMlp& model, std::span<const double> z0, MlpForward& f) {
  const int d = model.input_dim();
  const int m = model.total_units();
  const double gamma = model.config().gamma;
  f.flat.assign(d + m, 0.0);
  std::copy(z0.begin(), z0.end(), f.flat.begin());
  f.g.assign(m, 0.0);
  f.gate.assign(m, 0.0);
  f.h.assign(m, 0.0);
  f.k.assign(m, 0);
  std::vector<double> signals;
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& b = model.block(l);
    for (int u = 0; u < b.units; ++u) {
      const int t = model.unit_offset(l) + u;
      const double* tau = b.tau.data() + static_cast<std::size_t>(u) * b.pool_size;
      const double* a = b.weights.data() + static_cast<std::size_t>(u) * b.pool_size;
      const double* pool = f.flat.data() + b.pool_offset;
      signals.clear();
      double g = 0.0;
      for (int j = 0; j < b.pool_size; ++j) {
        if (tau[j] > 0.0) {
          g += a[j] * pool[j];
          signals.push_back(std::abs(pool[j]));
        }
      }
      const double gate = and_gate(signals, AndMode::kSoft, gamma);
      const double h = g * gate;
      f.g[t] = g;
      f.gate[t] = gate;
      f.h[t] = h;
      f.k[t] = static_cast<int>(signals.size());
      f.flat[d + t] = h > 0.0 ? h : 0.0;
    }
  }
}

void logits_of(const HarsanyiMlp& model, const MlpForward& f, std::vector<double>& logits) {
  const int d = model.input_dim();
  const int m = model.total_units();
  logits.assign(model.class_count(), 0.0);
  for (int c = 0; c < model.class_count(); ++c) {
    const double* w = model.head().data() + static_cast<std::size_t>(c) * m;
    double v = 0.0;
    for (int t = 0; t < m; ++t) v += w[t] * f.flat[d + t];
    logits[c] = v;
  }
}

void check_batch(const HarsanyiMlp& model, const Batch& batch) {
  if (batch.size() == 0) throw ContractError("empty batch");
  if (batch.row_size != model.input_dim()) throw ContractError("batch row size mismatch");
  for (int y : batch.labels) {
    if (y < 0 || y >= model.class_count()) {
      throw ContractError("label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

MlpTape loss_and_gradients(const HarsanyiMlp& model, const Batch& batch) {
  check_batch(model, batch);
  MlpTape tape{0.0, 0, MlpGradients(model)};
  auto& grads = tape.grads;
  const int d = model.input_dim();
  const int m = model.total_units();
  const int classes = model.class_count();
  const double gamma = model.config().gamma;
  const double beta = model.config().beta;
  const double scale = 1.0 / batch.size();

  MlpForward f;
  std::vector<double> logits, dlogits(classes), dz;
  for (int r = 0; r < batch.size(); ++r) {
    forward_record(model, batch.row(r), f);
    logits_of(model, f, logits);
    const double loss = softmax_xent(logits, batch.labels[r], scale, dlogits);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss at batch sample " + std::to_string(r));
    }
    tape.loss += loss * scale;
    if (argmax(logits) == batch.labels[r]) ++tape.correct;

    dz.assign(d + m, 0.0);
    for (int c = 0; c < classes; ++c) {
      const double* w = model.head().data() + static_cast<std::size_t>(c) * m;
      double* gw = grads.head.data() + static_cast<std::size_t>(c) * m;
      for (int t = 0; t < m; ++t) {
        gw[t] += dlogits[c] * f.flat[d + t];
        dz[d + t] += dlogits[c] * w[t];
      }
    }

    for (int l = model.block_count() - 1; l >= 0; --l) {
      const auto& b = model.block(l);
      const bool pool_is_units = l > 0;
      for (int u = 0; u < b.units; ++u) {
        const int t = model.unit_offset(l) + u;
        if (!(f.h[t] > 0.0)) continue;  // ReLU is flat at and below 0
        const double dh = dz[d + t];
        if (dh == 0.0) continue;
        const double gate = f.gate[t];
        const double h = f.h[t];
        const double h_over_k = h / static_cast<double>(f.k[t]);
        const std::size_t row = static_cast<std::size_t>(u) * b.pool_size;
        const double* tau = b.tau.data() + row;
        const double* a = b.weights.data() + row;
        const double* pool = f.flat.data() + b.pool_offset;
        double* g_tau = grads.tau[l].data() + row;
        double* g_a = grads.weights[l].data() + row;
        double* g_sel = grads.selector[l].data() + row;
        for (int j = 0; j < b.pool_size; ++j) {
          const double p = pool[j];
          double d_sigma;
          if (tau[j] > 0.0) {
            const double mag = std::abs(p);
            const double th = std::tanh(gamma * mag);
            const double dtanh = gamma * (1.0 - th * th);
            g_a[j] += dh * gate * p;
            // Factor for this child is sigma * tanh(gamma * sigma * |p|) + 1 - sigma.
            d_sigma = dh * (a[j] * p * gate + (h_over_k / th) * (th + mag * dtanh - 1.0));
            if (pool_is_units) {
              const double sign = p > 0.0 ? 1.0 : (p < 0.0 ? -1.0 : 0.0);
              dz[b.pool_offset + j] += dh * (a[j] * gate + (h_over_k / th) * dtanh * sign);
            }
          } else {
            d_sigma = dh * (a[j] * p * gate - h_over_k);
          }
          g_sel[j] += d_sigma;
          g_tau[j] += d_sigma * ste_surrogate_grad(tau[j], beta);
        }
      }
    }
  }
  return tape;
}

double batch_loss(const HarsanyiMlp& model, const Batch& batch) {
  check_batch(model, batch);
  MlpForward f;
  std::vector<double> logits, dlogits(model.class_count());
  double total = 0.0;
  const double scale = 1.0 / batch.size();
  for (int r = 0; r < batch.size(); ++r) {
    forward_record(model, batch.row(r), f);
    logits_of(model, f, logits);
    total += softmax_xent(logits, batch.labels[r], scale, dlogits) * scale;
  }
  return total;
}

double accuracy(const HarsanyiMlp& model, const Dataset& data, AndMode mode) {
  if (data.rows == 0) return 0.0;
  int correct = 0;
  for (int r = 0; r < data.rows; ++r) {
    const auto act = forward_units(model, data.row(r), mode);
    if (argmax(model_output(model, act)) == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / data.rows;
}

namespace {

template <typename Model, typename Tape, typename ParamsFn, typename GradsFn, typename AccFn>
TrainResult<Model> run_training(Model model, const Dataset& data, const Dataset& validation,
                                const TrainConfig& config, int row_size, ParamsFn params_of,
                                GradsFn grads_of, AccFn acc) {
  if (data.rows == 0) throw ContractError("training set is empty");
  if (data.cols != row_size) {
    throw ContractError("dataset has " + std::to_string(data.cols) +
                        " columns, model expects " + std::to_string(row_size));
  }
  detail::Adam adam(params_of(model), config);
  TrainResult<Model> result{std::move(model), {}};
  Model& m = result.model;

  std::vector<int> order(data.rows);
  std::vector<double> inputs;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(config.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < data.rows; start += config.batch_size) {
      const int stop = std::min(data.rows, start + config.batch_size);
      inputs.clear();
      labels.clear();
      for (int k = start; k < stop; ++k) {
        const auto row = data.row(order[k]);
        inputs.insert(inputs.end(), row.begin(), row.end());
        labels.push_back(data.labels[order[k]]);
      }
      Batch batch{inputs, labels, row_size};
      Tape tape = [&] {
        try {
          return loss_and_gradients(m, batch);
        } catch (const DivergenceError& e) {
          throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }();
      if (!std::isfinite(tape.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += tape.loss * batch.size();
      adam.step(grads_of(tape.grads));
    }
    for (auto* p : params_of(m)) {
      if (!detail::all_finite(*p)) {
        throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch));
      }
    }
    EpochMetrics row;
    row.epoch = epoch;
    row.loss = epoch_loss / data.rows;
    row.train_acc = acc(m, data);
    row.val_acc = validation.rows > 0 ? acc(m, validation) : 0.0;
    result.log.push_back(row);
  }
  return result;
}

std::vector<std::vector<double>*> mlp_params(HarsanyiMlp& m) {
  std::vector<std::vector<double>*> out;
  for (int l = 0; l < m.block_count(); ++l) {
    out.push_back(&m.block(l).tau);
    out.push_back(&m.block(l).weights);
  }
  out.push_back(&m.head());
  return out;
}

std::vector<const std::vector<double>*> mlp_grads(const MlpGradients& g) {
  std::vector<const std::vector<double>*> out;
  for (std::size_t l = 0; l < g.tau.size(); ++l) {
    out.push_back(&g.tau[l]);
    out.push_back(&g.weights[l]);
  }
  out.push_back(&g.head);
  return out;
}

}  // namespace

TrainResult<HarsanyiMlp> train(HarsanyiMlp model, const Dataset& data, const Dataset& validation,
                               const TrainConfig& config) {
  config.validate();
  model.mutable_config().beta = config.beta;
  model.mutable_config().gamma = config.gamma;
  init_params(model, config.init, config.seed);
  const int row_size = model.input_dim();
  return run_training<HarsanyiMlp, MlpTape>(
      std::move(model), data, validation, config, row_size, mlp_params, mlp_grads,
      [](const HarsanyiMlp& m, const Dataset& d) { return accuracy(m, d, m.config().and_mode); });
}

namespace {

std::vector<std::vector<double>*> cnn_params(HarsanyiCnn& m) {
  std::vector<std::vector<double>*> out{&m.stem().weights, &m.stem().bias};
  for (auto& b : m.blocks()) {
    out.push_back(&b.tau);
    out.push_back(&b.weights);
  }
  out.push_back(&m.head());
  return out;
}

std::vector<const std::vector<double>*> cnn_grads(const CnnGradients& g) {
  std::vector<const std::vector<double>*> out{&g.stem_weights, &g.stem_bias};
  for (std::size_t l = 0; l < g.tau.size(); ++l) {
    out.push_back(&g.tau[l]);
    out.push_back(&g.weights[l]);
  }
  out.push_back(&g.head);
  return out;
}

}  // namespace

TrainResult<HarsanyiCnn> train(HarsanyiCnn model, const Dataset& data, const Dataset& validation,
                               const TrainConfig& config) {
  config.validate();
  model.mutable_config().beta = config.beta;
  model.mutable_config().gamma = config.gamma;
  init_params(model, config.init, config.seed);
  const int row_size = model.config().image_size();
  return run_training<HarsanyiCnn, CnnTape>(
      std::move(model), data, validation, config, row_size, cnn_params, cnn_grads,
      [](const HarsanyiCnn& m, const Dataset& d) { return accuracy(m, d, m.config().and_mode); });
}

void write_metrics_csv(std::ostream& out, const TrainConfig& config,
                       std::span<const EpochMetrics> log) {
  char buf[64];
  auto real = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "# optimizer=adam beta1=" << real(config.adam_beta1) << " beta2="
      << real(config.adam_beta2) << " epsilon=" << real(config.adam_epsilon) << '\n';
  out << "# learning_rate=" << real(config.learning_rate) << '\n';
  out << "# epochs=" << config.epochs << '\n';
  out << "# batch_size=" << config.batch_size << '\n';
  out << "# seed=" << config.seed << '\n';
  out << "# beta=" << real(config.beta) << '\n';
  out << "# gamma=" << real(config.gamma) << '\n';
  out << "# init=" << init_kind_name(config.init.kind) << " fanin=" << config.init.fanin
      << " tau_sd=" << real(config.init.tau_sd) << '\n';
  out << "epoch,loss,train_acc,val_acc\n";
  for (const auto& row : log) {
    out << row.epoch << ',' << real(row.loss) << ',' << real(row.train_acc) << ','
        << real(row.val_acc) << '\n';
  }
}

}  // namespace harsanyi
