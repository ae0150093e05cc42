#include "harsanyi/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace harsanyi {

void CnnConfig::validate() const {
  if (stem.in_channels < 1 || stem.channels < 1) throw ContractError("stem channels must be >= 1");
  if (stem.image_height < 1 || stem.image_width < 1) throw ContractError("empty image shape");
  if (stem.kernel < 1 || stem.kernel % 2 == 0) throw ContractError("stem kernel must be odd");
  if (stem.pool < 1 || stem.image_height % stem.pool != 0 || stem.image_width % stem.pool != 0) {
    throw ContractError("image shape must be divisible by the pool factor");
  }
  if (blocks < 1) throw ContractError("conv model needs at least one block");
  if (channels < 1) throw ContractError("block channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ContractError("block kernel must be odd");
  if (class_count < 1) throw ContractError("class_count must be positive");
  if (!(beta > 0.0) || !(gamma > 0.0)) throw ContractError("beta and gamma must be positive");
}

int ConvBlock::tap_location(int loc, int tap) const {
  const int r = kernel / 2;
  const int h = loc / width + tap / kernel - r;
  const int w = loc % width + tap % kernel - r;
  if (h < 0 || h >= height || w < 0 || w >= width) return -1;
  return h * width + w;
}

HarsanyiCnn::HarsanyiCnn(CnnConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& s = config_.stem;
  stem_.weights.assign(std::size_t(s.channels) * s.in_channels * s.kernel * s.kernel, 0.0);
  stem_.bias.assign(s.channels, 0.0);
  blocks_.resize(config_.blocks);
  for (int l = 0; l < config_.blocks; ++l) {
    auto& b = blocks_[l];
    b.in_channels = l == 0 ? s.channels : config_.channels;
    b.out_channels = config_.channels;
    b.kernel = config_.kernel;
    b.height = config_.grid_height();
    b.width = config_.grid_width();
    b.tau.assign(std::size_t(b.height) * b.width * b.taps(), 0.0);
    b.weights.assign(std::size_t(b.out_channels) * b.in_channels * b.taps(), 0.0);
  }
  head_.assign(std::size_t(config_.class_count) * total_units(), 0.0);
}

FeatureTensor stem_forward(const HarsanyiCnn& model, std::span<const double> image) {
  const auto& cfg = model.config();
  const auto& s = cfg.stem;
  if (static_cast<int>(image.size()) != cfg.image_size()) {
    throw ContractError("image has " + std::to_string(image.size()) + " values, stem expects " +
                        std::to_string(cfg.image_size()));
  }
  const int H = s.image_height, W = s.image_width, K = s.kernel, r = s.kernel / 2;
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
  const int P = s.pool;
  FeatureTensor out(s.channels, H / P, W / P, 0);
  for (int c = 0; c < s.channels; ++c) {
    for (int y = 0; y < H / P; ++y) {
      for (int x = 0; x < W / P; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        for (int py = 0; py < P; ++py) {
          for (int px = 0; px < P; ++px) m = std::max(m, conv.at(c, y * P + py, x * P + px));
        }
        if (!std::isfinite(m)) throw NumericError("non-finite stem output");
        out.at(c, y, x) = m > 0.0 ? m : 0.0;
      }
    }
  }
  return out;
}

void mask_grid(FeatureTensor& z0, const FieldSet& present) {
  if (static_cast<int>(present.size()) != z0.locations()) {
    throw ContractError("grid mask covers " + std::to_string(present.size()) +
                        " locations, tensor has " + std::to_string(z0.locations()));
  }
  for (int loc = 0; loc < z0.locations(); ++loc) {
    if (present[loc]) continue;
    for (int c = 0; c < z0.channels; ++c) z0.at(c, loc) = 0.0;
  }
}

FeatureTensor conv_block_forward(const ConvBlock& block, const FeatureTensor& input, AndMode mode,
                                 double gamma, std::vector<std::uint8_t>* gate_state) {
  if (input.channels != block.in_channels || input.height != block.height ||
      input.width != block.width) {
    throw ContractError("conv block input shape mismatch");
  }
  FeatureTensor out(block.out_channels, block.height, block.width, input.layer + 1);
  const int n_loc = input.locations();
  if (gate_state) gate_state->assign(n_loc, 0);
  std::vector<int> child_taps;
  std::vector<int> child_locs;
  std::vector<double> signals;
  for (int loc = 0; loc < n_loc; ++loc) {
    child_taps.clear();
    child_locs.clear();
    signals.clear();
    for (int t = 0; t < block.taps(); ++t) {
      if (!block.selected(loc, t)) continue;
      const int q = block.tap_location(loc, t);
      if (q < 0) continue;
      double sum = 0.0;
      for (int c = 0; c < input.channels; ++c) sum += input.at(c, q);
      child_taps.push_back(t);
      child_locs.push_back(q);
      signals.push_back(sum / static_cast<double>(input.channels));
    }
    const double gate = and_gate(signals, mode, gamma);
    if (gate == 0.0) continue;
    if (gate_state) (*gate_state)[loc] = 1;
    for (int co = 0; co < block.out_channels; ++co) {
      double g = 0.0;
      for (std::size_t k = 0; k < child_taps.size(); ++k) {
        for (int ci = 0; ci < block.in_channels; ++ci) {
          g += block.weight(co, ci, child_taps[k]) * input.at(ci, child_locs[k]);
        }
      }
      const double h = g * gate;
      if (!std::isfinite(h)) {
        throw NumericError("non-finite activation in conv block " + std::to_string(input.layer) +
                           " at channel " + std::to_string(co) + ", location " +
                           std::to_string(loc));
      }
      out.at(co, loc) = h > 0.0 ? h : 0.0;
    }
  }
  return out;
}

CnnActivations forward_blocks(const HarsanyiCnn& model, FeatureTensor z0, AndMode mode) {
  CnnActivations act;
  act.mode = mode;
  act.z0 = std::move(z0);
  act.blocks.reserve(model.block_count());
  act.gate.resize(model.block_count());
  const FeatureTensor* input = &act.z0;
  for (int l = 0; l < model.block_count(); ++l) {
    act.blocks.push_back(conv_block_forward(model.blocks()[l], *input, mode,
                                            model.config().gamma, &act.gate[l]));
    input = &act.blocks.back();
  }
  return act;
}

CnnActivations cnn_forward(const HarsanyiCnn& model, std::span<const double> image,
                           const FieldSet& present, AndMode mode) {
  auto z0 = stem_forward(model, image);
  mask_grid(z0, present);
  return forward_blocks(model, std::move(z0), mode);
}

double cnn_class_logit(const HarsanyiCnn& model, const CnnActivations& act, int cls) {
  const double* w = model.head().data() + std::size_t(cls) * model.total_units();
  double v = 0.0;
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& z = act.blocks[l].values;
    const double* wl = w + std::size_t(l) * model.block_units();
    for (std::size_t k = 0; k < z.size(); ++k) v += wl[k] * z[k];
  }
  return v;
}

std::vector<double> cnn_output(const HarsanyiCnn& model, const CnnActivations& act) {
  std::vector<double> out(model.class_count());
  for (int c = 0; c < model.class_count(); ++c) out[c] = cnn_class_logit(model, act, c);
  return out;
}

GridFieldMap grid_receptive_fields(const HarsanyiCnn& model) {
  const int n = model.locations();
  GridFieldMap map;
  map.locations = n;
  // Fields of the layer below, per channel.
  std::vector<std::vector<FieldSet>> below(model.config().stem.channels,
                                           std::vector<FieldSet>(n, FieldSet(n)));
  for (auto& channel : below) {
    for (int q = 0; q < n; ++q) channel[q].set(q);
  }
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& b = model.blocks()[l];
    std::vector<std::vector<FieldSet>> here(b.out_channels, std::vector<FieldSet>(n, FieldSet(n)));
    for (int co = 0; co < b.out_channels; ++co) {
      for (int loc = 0; loc < n; ++loc) {
        for (int t = 0; t < b.taps(); ++t) {
          const int q = b.tap_location(loc, t);
          if (q < 0 || !b.selected(loc, t)) continue;
          for (int ci = 0; ci < b.in_channels; ++ci) here[co][loc] |= below[ci][q];
        }
      }
    }
    for (int co = 1; co < b.out_channels; ++co) {
      for (int loc = 0; loc < n; ++loc) {
        if (here[co][loc] != here[0][loc]) {
          throw Error("receptive fields disagree across channels at block " + std::to_string(l) +
                      ", location " + std::to_string(loc));
        }
      }
    }
    map.per_channel.push_back(here);
    below = std::move(here);
  }
  return map;
}

AttributionVector exact_shapley_grid(const HarsanyiCnn& model, const CnnActivations& act,
                                     const GridFieldMap& fields, int class_index) {
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index " + std::to_string(class_index) + " out of range");
  }
  const int n = model.locations();
  AttributionVector out;
  out.phi.assign(n, 0.0);
  out.provenance = Provenance::kHarsanyiExact;
  out.inference_count = 1;
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& z = act.blocks[l];
    for (int loc = 0; loc < n; ++loc) {
      const auto& r = fields.location(l, loc);
      const auto size = r.count();
      if (size == 0) continue;
      double group = 0.0;
      for (int c = 0; c < z.channels; ++c) {
        group += model.head_weight(class_index, l, c, loc) * z.at(c, loc);
      }
      if (group == 0.0) continue;
      const double share = group / static_cast<double>(size);
      for_each_member(r, [&](int i) { out.phi[i] += share; });
    }
  }
  return out;
}

AttributionVector exact_shapley_grid(const HarsanyiCnn& model, std::span<const double> image,
                                     int class_index, AndMode mode) {
  const auto act = cnn_forward(model, image, FieldSet(model.locations()).set(), mode);
  return exact_shapley_grid(model, act, grid_receptive_fields(model), class_index);
}

AttributionVector restricted_shapley_grid(const HarsanyiCnn& model,
                                          std::span<const double> image,
                                          const FieldSet& selected, int class_index,
                                          AndMode mode) {
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index out of range");
  }
  if (static_cast<int>(selected.size()) != model.locations()) {
    throw ContractError("selected set must cover the grid");
  }
  if (selected.none()) throw ContractError("restricted_shapley_grid: selected set is empty");
  const auto act = cnn_forward(model, image, FieldSet(model.locations()).set(), mode);
  const auto fields = grid_receptive_fields(model);
  const auto order = members(selected);
  std::vector<int> slot(model.locations(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) slot[order[k]] = static_cast<int>(k);

  AttributionVector out;
  out.phi.assign(order.size(), 0.0);
  out.provenance = Provenance::kHarsanyiExact;
  out.inference_count = 1;
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& z = act.blocks[l];
    for (int loc = 0; loc < model.locations(); ++loc) {
      const FieldSet inside = fields.location(l, loc) & selected;
      const auto size = inside.count();
      if (size == 0) continue;
      double group = 0.0;
      for (int c = 0; c < z.channels; ++c) {
        group += model.head_weight(class_index, l, c, loc) * z.at(c, loc);
      }
      if (group == 0.0) continue;
      const double share = group / static_cast<double>(size);
      for_each_member(inside, [&](int i) { out.phi[slot[i]] += share; });
    }
  }
  return out;
}

ValueOracle grid_game(const HarsanyiCnn& model, std::span<const double> image, int class_index,
                      AndMode mode) {
  const int n = model.locations();
  if (n > kMaxPlayers) {
    throw CapacityError("grid game over " + std::to_string(n) + " locations exceeds " +
                        std::to_string(kMaxPlayers) + "; use the restricted game");
  }
  FieldSet all(n);
  all.set();
  return restricted_grid_game(model, image, all, class_index, mode);
}

ValueOracle restricted_grid_game(const HarsanyiCnn& model, std::span<const double> image,
                                 const FieldSet& selected, int class_index, AndMode mode) {
  const auto order = members(selected);
  if (order.empty()) throw ContractError("restricted grid game: selected set is empty");
  if (static_cast<int>(order.size()) > kMaxPlayers) {
    throw CapacityError("restricted grid game over more than " + std::to_string(kMaxPlayers) +
                        " locations");
  }
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index out of range");
  }
  const FeatureTensor z0 = stem_forward(model, image);
  const FieldSet base = ~selected;
  FeatureTensor base_input = z0;
  mask_grid(base_input, base);
  const double base_value =
      cnn_class_logit(model, forward_blocks(model, base_input, mode), class_index);
  return [&model, z0, order, base, class_index, mode, base_value](PlayerSet s) {
    FieldSet present = base;
    for (std::uint32_t b = s.bits(); b != 0; b &= b - 1) present.set(order[std::countr_zero(b)]);
    FeatureTensor input = z0;
    mask_grid(input, present);
    return cnn_class_logit(model, forward_blocks(model, std::move(input), mode), class_index) -
           base_value;
  };
}

}  // namespace harsanyi
