#include "harsanyi/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace harsanyi {

std::string_view and_mode_name(AndMode mode) { return mode == AndMode::kHard ? "hard" : "soft"; }

AndMode parse_and_mode(std::string_view name) {
  if (name == "hard") return AndMode::kHard;
  if (name == "soft") return AndMode::kSoft;
  throw ContractError("unknown AND mode '" + std::string(name) + "' (expected hard|soft)");
}

std::string_view children_scope_name(ChildrenScope scope) {
  return scope == ChildrenScope::kPreviousBlockOnly ? "previous_block_only"
                                                    : "all_previous_blocks";
}

ChildrenScope parse_children_scope(std::string_view name) {
  if (name == "previous_block_only") return ChildrenScope::kPreviousBlockOnly;
  if (name == "all_previous_blocks") return ChildrenScope::kAllPreviousBlocks;
  throw ContractError("unknown children scope '" + std::string(name) + "'");
}

int ModelConfig::players() const {
  if (player_of_input.empty()) return input_dim;
  return *std::max_element(player_of_input.begin(), player_of_input.end()) + 1;
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw ContractError("model needs at least one input column");
  if (units.empty()) throw ContractError("model needs at least one block");
  for (std::size_t l = 0; l < units.size(); ++l) {
    if (units[l] < 1) {
      throw ContractError("block " + std::to_string(l) + " needs at least one unit");
    }
  }
  if (class_count < 1) throw ContractError("class_count must be positive");
  if (!(beta > 0.0)) throw ContractError("beta must be positive");
  if (!(gamma > 0.0)) throw ContractError("gamma must be positive");
  if (!player_of_input.empty()) {
    if (static_cast<int>(player_of_input.size()) != input_dim) {
      throw ContractError("player_of_input must have input_dim entries");
    }
    std::vector<bool> used(players(), false);
    for (int p : player_of_input) {
      if (p < 0) throw ContractError("negative player index in player_of_input");
      used[p] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end()) {
      throw ContractError("player_of_input leaves a player without columns");
    }
  }
}

int HarsanyiBlock::child_count(int u) const {
  int k = 0;
  for (int j = 0; j < pool_size; ++j) k += selected(u, j) ? 1 : 0;
  return k;
}

HarsanyiMlp::HarsanyiMlp(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const int L = config_.blocks();
  unit_offsets_.resize(L);
  for (int l = 0; l < L; ++l) {
    unit_offsets_[l] = total_units_;
    total_units_ += config_.units[l];
  }
  blocks_.resize(L);
  for (int l = 0; l < L; ++l) {
    auto& b = blocks_[l];
    b.units = config_.units[l];
    if (l == 0) {
      b.pool_offset = 0;
      b.pool_size = config_.input_dim;
    } else if (config_.children_scope == ChildrenScope::kPreviousBlockOnly) {
      b.pool_offset = config_.input_dim + unit_offsets_[l - 1];
      b.pool_size = config_.units[l - 1];
    } else {
      b.pool_offset = config_.input_dim;
      b.pool_size = unit_offsets_[l];
    }
    b.tau.assign(static_cast<std::size_t>(b.units) * b.pool_size, 0.0);
    b.weights.assign(b.tau.size(), 0.0);
  }
  head_.assign(static_cast<std::size_t>(config_.class_count) * total_units_, 0.0);
}

std::vector<double> masked_input(const HarsanyiMlp& model, const Sample& sample,
                                 const FieldSet& present) {
  const int d = model.input_dim();
  if (static_cast<int>(sample.x.size()) != d) {
    throw ContractError("sample has " + std::to_string(sample.x.size()) +
                        " columns, model expects " + std::to_string(d));
  }
  if (!sample.baseline.empty() && static_cast<int>(sample.baseline.size()) != d) {
    throw ContractError("baseline length does not match sample");
  }
  if (static_cast<int>(present.size()) != model.players()) {
    throw ContractError("mask covers " + std::to_string(present.size()) + " players, model has " +
                        std::to_string(model.players()));
  }
  const auto& cfg = model.config();
  std::vector<double> z0(d, 0.0);
  for (int c = 0; c < d; ++c) {
    if (present[cfg.player_of(c)]) z0[c] = sample.x[c] - sample.baseline_at(c);
  }
  return z0;
}

std::vector<double> masked_input(const HarsanyiMlp& model, const Sample& sample,
                                 PlayerSet present) {
  if (present.n() != model.players()) {
    throw ContractError("mask covers " + std::to_string(present.n()) + " players, model has " +
                        std::to_string(model.players()));
  }
  return masked_input(model, sample, to_field_set(present));
}

UnitActivations forward_units(const HarsanyiMlp& model, std::span<const double> z0,
                              AndMode mode) {
  const int d = model.input_dim();
  if (static_cast<int>(z0.size()) != d) throw ContractError("z0 length does not match model");
  const double gamma = model.config().gamma;

  std::vector<double> flat(d + model.total_units(), 0.0);
  std::copy(z0.begin(), z0.end(), flat.begin());
  // Soft factors tanh(gamma |p_j|) and their logs depend only on the pool
  // entry, so they are computed once per block instead of once per unit.
  std::vector<double> factor, log_factor;
  std::vector<int> children;

  UnitActivations act;
  act.mode = mode;
  act.z.resize(model.block_count());
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& b = model.block(l);
    const double* pool = flat.data() + b.pool_offset;
    double* out = flat.data() + d + model.unit_offset(l);
    children.resize(b.pool_size);
    if (mode == AndMode::kSoft) {
      factor.resize(b.pool_size);
      log_factor.resize(b.pool_size);
      for (int j = 0; j < b.pool_size; ++j) {
        factor[j] = std::tanh(gamma * std::abs(pool[j]));
        log_factor[j] = std::log(factor[j]);
      }
    }
    for (int u = 0; u < b.units; ++u) {
      const double* tau = b.tau.data() + static_cast<std::size_t>(u) * b.pool_size;
      const double* a = b.weights.data() + static_cast<std::size_t>(u) * b.pool_size;
      // Branch-free gather of the selected children keeps the sum below
      // a short dependency chain.
      int k = 0;
      for (int j = 0; j < b.pool_size; ++j) {
        children[k] = j;
        k += tau[j] > 0.0;
      }
      double g = 0.0;
      bool zero_child = false;
      for (int c = 0; c < k; ++c) {
        const int j = children[c];
        g += a[j] * pool[j];
        zero_child = zero_child || pool[j] == 0.0;
      }
      double gate = 0.0;
      if (k > 0 && !zero_child) {
        if (mode == AndMode::kHard) {
          gate = 1.0;
        } else if (k > kSoftAndLogThreshold) {
          double log_sum = 0.0;
          for (int c = 0; c < k; ++c) log_sum += log_factor[children[c]];
          gate = std::exp(log_sum * (1.0 / static_cast<double>(k)));
        } else {
          double product = 1.0;
          for (int c = 0; c < k; ++c) product *= factor[children[c]];
          gate = std::pow(product, 1.0 / static_cast<double>(k));
        }
      }
      const double h = g * gate;
      if (!std::isfinite(h)) {
        throw NumericError("non-finite activation at unit (" + std::to_string(l) + "," +
                           std::to_string(u) + ")");
      }
      out[u] = h > 0.0 ? h : 0.0;
    }
    act.z[l].assign(out, out + b.units);
  }
  return act;
}

UnitActivations forward_units(const HarsanyiMlp& model, const Sample& sample, PlayerSet mask,
                              AndMode mode) {
  const auto z0 = masked_input(model, sample, mask);
  return forward_units(model, z0, mode);
}

double class_logit(const HarsanyiMlp& model, const UnitActivations& act, int cls) {
  const int m = model.total_units();
  const double* w = model.head().data() + static_cast<std::size_t>(cls) * m;
  double v = 0.0;
  for (int l = 0; l < model.block_count(); ++l) {
    const double* wl = w + model.unit_offset(l);
    const auto& z = act.z[l];
    for (std::size_t u = 0; u < z.size(); ++u) v += wl[u] * z[u];
  }
  return v;
}

std::vector<double> model_output(const HarsanyiMlp& model, const UnitActivations& act) {
  std::vector<double> out(model.class_count());
  for (int c = 0; c < model.class_count(); ++c) out[c] = class_logit(model, act, c);
  return out;
}

std::vector<double> model_output(const HarsanyiMlp& model, const Sample& sample, PlayerSet mask,
                                 AndMode mode) {
  return model_output(model, forward_units(model, sample, mask, mode));
}

ReceptiveFieldMap receptive_fields(const HarsanyiMlp& model) {
  const int n = model.players();
  const int d = model.input_dim();
  const auto& cfg = model.config();
  // Fields of every entry of the concatenated activation vector; input
  // columns map to their player.
  std::vector<FieldSet> flat(d + model.total_units(), FieldSet(n));
  for (int c = 0; c < d; ++c) flat[c].set(cfg.player_of(c));

  ReceptiveFieldMap map;
  map.players = n;
  map.fields.resize(model.block_count());
  for (int l = 0; l < model.block_count(); ++l) {
    const auto& b = model.block(l);
    for (int u = 0; u < b.units; ++u) {
      FieldSet& r = flat[d + model.unit_offset(l) + u];
      for (int j = 0; j < b.pool_size; ++j) {
        if (b.selected(u, j)) r |= flat[b.pool_offset + j];
      }
    }
    map.fields[l].assign(flat.begin() + d + model.unit_offset(l),
                         flat.begin() + d + model.unit_offset(l) + b.units);
  }
  return map;
}

AttributionVector exact_shapley(const HarsanyiMlp& model, const UnitActivations& act,
                                const ReceptiveFieldMap& fields, int class_index) {
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index " + std::to_string(class_index) + " out of range [0, " +
                        std::to_string(model.class_count()) + ")");
  }
  AttributionVector out;
  out.phi.assign(model.players(), 0.0);
  out.provenance = Provenance::kHarsanyiExact;
  out.inference_count = 1;
  for (int l = 0; l < model.block_count(); ++l) {
    for (int u = 0; u < model.block(l).units; ++u) {
      const UnitId id{l, u};
      const double z = act.at(id);
      const auto& r = fields.at(id);
      const auto size = r.count();
      if (z == 0.0 || size == 0) continue;
      const double share = model.head_weight(class_index, id) * z / static_cast<double>(size);
      for_each_member(r, [&](int i) { out.phi[i] += share; });
    }
  }
  return out;
}

AttributionVector exact_shapley(const HarsanyiMlp& model, const Sample& sample, int class_index,
                                AndMode mode) {
  const auto z0 = masked_input(model, sample, FieldSet(model.players()).set());
  const auto act = forward_units(model, z0, mode);
  return exact_shapley(model, act, receptive_fields(model), class_index);
}

AttributionVector restricted_shapley(const HarsanyiMlp& model, const Sample& sample,
                                     const FieldSet& selected, int class_index, AndMode mode) {
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index out of range");
  }
  if (static_cast<int>(selected.size()) != model.players()) {
    throw ContractError("selected set must cover the model's players");
  }
  if (selected.none()) throw ContractError("restricted_shapley: selected set is empty");

  const auto z0 = masked_input(model, sample, FieldSet(model.players()).set());
  const auto act = forward_units(model, z0, mode);
  const auto fields = receptive_fields(model);

  const auto order = members(selected);
  std::vector<int> slot(model.players(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) slot[order[k]] = static_cast<int>(k);

  AttributionVector out;
  out.phi.assign(order.size(), 0.0);
  out.provenance = Provenance::kHarsanyiExact;
  out.inference_count = 1;
  for (int l = 0; l < model.block_count(); ++l) {
    for (int u = 0; u < model.block(l).units; ++u) {
      const UnitId id{l, u};
      const double z = act.at(id);
      if (z == 0.0) continue;
      const FieldSet inside = fields.at(id) & selected;
      const auto size = inside.count();
      if (size == 0) continue;
      const double share = model.head_weight(class_index, id) * z / static_cast<double>(size);
      for_each_member(inside, [&](int i) { out.phi[slot[i]] += share; });
    }
  }
  return out;
}

ValueOracle model_game(const HarsanyiMlp& model, const Sample& sample, int class_index,
                       AndMode mode) {
  const int n = model.players();
  if (n > kMaxPlayers) {
    throw CapacityError("model game needs n <= " + std::to_string(kMaxPlayers) + ", model has " +
                        std::to_string(n));
  }
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index out of range");
  }
  const double empty_value = class_logit(
      model, forward_units(model, sample, PlayerSet::empty(n), mode), class_index);
  return [&model, sample, class_index, mode, empty_value](PlayerSet s) {
    return class_logit(model, forward_units(model, sample, s, mode), class_index) - empty_value;
  };
}

ValueOracle restricted_model_game(const HarsanyiMlp& model, const Sample& sample,
                                  const FieldSet& selected, int class_index, AndMode mode) {
  const auto order = members(selected);
  if (order.empty()) throw ContractError("restricted game: selected set is empty");
  if (static_cast<int>(order.size()) > kMaxPlayers) {
    throw CapacityError("restricted game over more than " + std::to_string(kMaxPlayers) +
                        " players");
  }
  if (class_index < 0 || class_index >= model.class_count()) {
    throw ContractError("class index out of range");
  }
  FieldSet base = ~selected;
  const double base_value =
      class_logit(model, forward_units(model, masked_input(model, sample, base), mode),
                  class_index);
  return [&model, sample, order, base, class_index, mode, base_value](PlayerSet s) {
    FieldSet present = base;
    for (std::uint32_t b = s.bits(); b != 0; b &= b - 1) present.set(order[std::countr_zero(b)]);
    const auto act = forward_units(model, masked_input(model, sample, present), mode);
    return class_logit(model, act, class_index) - base_value;
  };
}

GameTable unit_harsanyi_check(const HarsanyiMlp& model, const Sample& sample, UnitId unit,
                              AndMode mode) {
  constexpr int kLimit = 12;
  const int n = model.players();
  if (n > kLimit) {
    throw CapacityError("unit_harsanyi_check enumerates 2^n masks; n=" + std::to_string(n) +
                        " exceeds " + std::to_string(kLimit));
  }
  if (unit.block < 0 || unit.block >= model.block_count() || unit.unit < 0 ||
      unit.unit >= model.block(unit.block).units) {
    throw ContractError("unit index out of range");
  }
  GameTable game(n, GameKind::kReward);
  for (std::uint32_t s = 0; s < game.size(); ++s) {
    game[s] = forward_units(model, sample, PlayerSet(s, n), mode).at(unit);
  }
  return harsanyi_transform(game);
}

}  // namespace harsanyi
