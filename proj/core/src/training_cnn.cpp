#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "harsanyi/training.hpp"
#include "training_internal.hpp"

namespace harsanyi {

using detail::argmax;
using detail::softmax_xent;

CnnGradients::CnnGradients(const HarsanyiCnn& model)
    : stem_weights(model.stem().weights.size(), 0.0), stem_bias(model.stem().bias.size(), 0.0),
      head(model.head().size(), 0.0) {
  for (const auto& b : model.blocks()) {
    tau.emplace_back(b.tau.size(), 0.0);
    weights.emplace_back(b.weights.size(), 0.0);
  }
}

namespace {

struct CnnForward {
  FeatureTensor z0;
  std::vector<int> argmax;  // flat conv index feeding each z0 entry
  CnnActivations act;
};

void forward_record(const HarsanyiCnn& model, std::span<const double> image, CnnForward& f) {
  const auto& s = model.config().stem;
  if (static_cast<int>(image.size()) != model.config().image_size()) {
    throw ContractError("image has " + std::to_string(image.size()) + " values, stem expects " +
                        std::to_string(model.config().image_size()));
  }
  const int H = s.image_height, W = s.image_width, K = s.kernel, r = K / 2, P = s.pool;
  const auto& wts = model.stem().weights;
  FeatureTensor conv(s.channels, H, W);
  for (int c = 0; c < s.channels; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = model.stem().bias[c];
        for (int ci = 0; ci < s.in_channels; ++ci) {
          for (int dy = 0; dy < K; ++dy) {
            const int yy = y + dy - r;
            if (yy < 0 || yy >= H) continue;
            for (int dx = 0; dx < K; ++dx) {
              const int xx = x + dx - r;
              if (xx < 0 || xx >= W) continue;
              acc += wts[((std::size_t(c) * s.in_channels + ci) * K + dy) * K + dx] *
                     image[(std::size_t(ci) * H + yy) * W + xx];
            }
          }
        }
        conv.at(c, y, x) = acc;
      }
    }
  }
  f.z0 = FeatureTensor(s.channels, H / P, W / P, 0);
  f.argmax.assign(f.z0.values.size(), -1);
  for (int c = 0; c < s.channels; ++c) {
    for (int y = 0; y < H / P; ++y) {
      for (int x = 0; x < W / P; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        int best = -1;
        for (int py = 0; py < P; ++py) {
          for (int px = 0; px < P; ++px) {
            const int idx = (c * H + y * P + py) * W + x * P + px;
            if (best < 0 || conv.values[idx] > m) {
              m = conv.values[idx];
              best = idx;
            }
          }
        }
        if (!std::isfinite(m)) throw DivergenceError("non-finite stem output");
        f.z0.at(c, y, x) = m > 0.0 ? m : 0.0;
        f.argmax[std::size_t(c) * (H / P) * (W / P) + y * (W / P) + x] = best;
      }
    }
  }
  f.act = forward_blocks(model, f.z0, AndMode::kSoft);
}

void check_batch(const HarsanyiCnn& model, const Batch& batch) {
  if (batch.size() == 0) throw ContractError("empty batch");
  if (batch.row_size != model.config().image_size()) {
    throw ContractError("batch row size mismatch");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= model.class_count()) {
      throw ContractError("label " + std::to_string(y) + " out of range");
    }
  }
}

// Backward through one conv block. `dout` is dL/dz of the block output;
// `din`, when non-null, receives dL/dz of its input.
void block_backward(const ConvBlock& b, const FeatureTensor& in, const FeatureTensor& out,
                    const std::vector<double>& dout, double gamma, double beta,
                    std::vector<double>& g_tau, std::vector<double>& g_w,
                    std::vector<double>* din) {
  const int n_loc = in.locations();
  const int taps = b.taps();
  const double inv_c = 1.0 / static_cast<double>(in.channels);
  std::vector<int> child_taps, child_locs;
  std::vector<double> signals, dh(b.out_channels), gval(b.out_channels);
  for (int loc = 0; loc < n_loc; ++loc) {
    child_taps.clear();
    child_locs.clear();
    signals.clear();
    for (int t = 0; t < taps; ++t) {
      const int q = b.tap_location(loc, t);
      if (q < 0 || !b.selected(loc, t)) continue;
      double sum = 0.0;
      for (int c = 0; c < in.channels; ++c) sum += in.at(c, q);
      child_taps.push_back(t);
      child_locs.push_back(q);
      signals.push_back(sum * inv_c);
    }
    const double gate = and_gate(signals, AndMode::kSoft, gamma);
    if (gate == 0.0) continue;
    // H = sum over active output channels of dL/dh * h.
    double big_h = 0.0;
    bool any = false;
    for (int co = 0; co < b.out_channels; ++co) {
      dh[co] = 0.0;
      if (!(out.at(co, loc) > 0.0)) continue;
      dh[co] = dout[std::size_t(co) * n_loc + loc];
      big_h += dh[co] * out.at(co, loc);
      any = any || dh[co] != 0.0;
    }
    if (!any) continue;
    const double k = static_cast<double>(signals.size());
    std::size_t child = 0;
    for (int t = 0; t < taps; ++t) {
      const int q = b.tap_location(loc, t);
      if (q < 0) continue;
      const bool sel = b.selected(loc, t);
      // Linear part: sum over co of dh * gate * sum_ci A x.
      double d_sigma = 0.0;
      for (int co = 0; co < b.out_channels; ++co) {
        if (dh[co] == 0.0) continue;
        double lin = 0.0;
        for (int ci = 0; ci < in.channels; ++ci) {
          const double x = in.at(ci, q);
          lin += b.weight(co, ci, t) * x;
          if (sel) {
            g_w[(std::size_t(co) * b.in_channels + ci) * taps + t] += dh[co] * gate * x;
            if (din) (*din)[std::size_t(ci) * n_loc + q] += dh[co] * gate * b.weight(co, ci, t);
          }
        }
        d_sigma += dh[co] * gate * lin;
      }
      if (sel) {
        const double s = signals[child];
        const double th = std::tanh(gamma * s);
        const double dtanh = gamma * (1.0 - th * th);
        d_sigma += (big_h / (k * th)) * (th + s * dtanh - 1.0);
        if (din) {
          const double ds = (big_h / (k * th)) * dtanh * inv_c;
          for (int ci = 0; ci < in.channels; ++ci) (*din)[std::size_t(ci) * n_loc + q] += ds;
        }
        ++child;
      } else {
        d_sigma -= big_h / k;
      }
      const std::size_t ti = std::size_t(loc) * taps + t;
      g_tau[ti] += d_sigma * ste_surrogate_grad(b.tau[ti], beta);
    }
  }
}

}  // namespace

CnnTape loss_and_gradients(const HarsanyiCnn& model, const Batch& batch) {
  check_batch(model, batch);
  CnnTape tape{0.0, 0, CnnGradients(model)};
  auto& grads = tape.grads;
  const auto& cfg = model.config();
  const auto& s = cfg.stem;
  const int classes = model.class_count();
  const int bu = model.block_units();
  const double scale = 1.0 / batch.size();
  CnnForward f;
  std::vector<double> logits, dlogits(classes);
  std::vector<std::vector<double>> dz(model.block_count());
  std::vector<double> dz0;
  for (int r = 0; r < batch.size(); ++r) {
    const auto image = batch.row(r);
    forward_record(model, image, f);
    logits = cnn_output(model, f.act);
    const double loss = softmax_xent(logits, batch.labels[r], scale, dlogits);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss at batch sample " + std::to_string(r));
    }
    tape.loss += loss * scale;
    if (argmax(logits) == batch.labels[r]) ++tape.correct;

    for (int l = 0; l < model.block_count(); ++l) {
      dz[l].assign(bu, 0.0);
      const auto& z = f.act.blocks[l].values;
      for (int c = 0; c < classes; ++c) {
        const std::size_t off = std::size_t(c) * model.total_units() + std::size_t(l) * bu;
        for (int k = 0; k < bu; ++k) {
          grads.head[off + k] += dlogits[c] * z[k];
          dz[l][k] += dlogits[c] * model.head()[off + k];
        }
      }
    }
    dz0.assign(f.z0.values.size(), 0.0);
    for (int l = model.block_count() - 1; l >= 0; --l) {
      const FeatureTensor& in = l == 0 ? f.act.z0 : f.act.blocks[l - 1];
      std::vector<double>* din = l == 0 ? &dz0 : &dz[l - 1];
      block_backward(model.blocks()[l], in, f.act.blocks[l], dz[l], cfg.gamma, cfg.beta,
                     grads.tau[l], grads.weights[l], din);
    }

    const int H = s.image_height, W = s.image_width, K = s.kernel, rad = K / 2;
    const int hw = H * W;
    for (std::size_t i = 0; i < dz0.size(); ++i) {
      if (dz0[i] == 0.0 || !(f.z0.values[i] > 0.0)) continue;
      const int idx = f.argmax[i];
      const int c = idx / hw;
      const int y = (idx % hw) / W;
      const int x = idx % W;
      grads.stem_bias[c] += dz0[i];
      for (int ci = 0; ci < s.in_channels; ++ci) {
        for (int dy = 0; dy < K; ++dy) {
          const int yy = y + dy - rad;
          if (yy < 0 || yy >= H) continue;
          for (int dx = 0; dx < K; ++dx) {
            const int xx = x + dx - rad;
            if (xx < 0 || xx >= W) continue;
            grads.stem_weights[((std::size_t(c) * s.in_channels + ci) * K + dy) * K + dx] +=
                dz0[i] * image[(std::size_t(ci) * H + yy) * W + xx];
          }
        }
      }
    }
  }
  return tape;
}

double batch_loss(const HarsanyiCnn& model, const Batch& batch) {
  check_batch(model, batch);
  CnnForward f;
  std::vector<double> dlogits(model.class_count());
  double total = 0.0;
  const double scale = 1.0 / batch.size();
  for (int r = 0; r < batch.size(); ++r) {
    forward_record(model, batch.row(r), f);
    total += softmax_xent(cnn_output(model, f.act), batch.labels[r], scale, dlogits) * scale;
  }
  return total;
}

double accuracy(const HarsanyiCnn& model, const Dataset& data, AndMode mode) {
  if (data.rows == 0) return 0.0;
  FieldSet all(model.locations());
  all.set();
  int correct = 0;
  for (int r = 0; r < data.rows; ++r) {
    const auto act = cnn_forward(model, data.row(r), all, mode);
    if (argmax(cnn_output(model, act)) == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / data.rows;
}

}  // namespace harsanyi
