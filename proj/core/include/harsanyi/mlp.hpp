#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "harsanyi/and_gate.hpp"
#include "harsanyi/attribution.hpp"
#include "harsanyi/field_set.hpp"
#include "harsanyi/game.hpp"

namespace harsanyi {

enum class ChildrenScope { kPreviousBlockOnly, kAllPreviousBlocks };

std::string_view children_scope_name(ChildrenScope scope);
ChildrenScope parse_children_scope(std::string_view name);

struct ModelConfig {
  // Number of columns fed to the first block.
  int input_dim = 0;
  // Column -> player index. Empty means one player per column. Columns that
  // share a player are masked together (one-hot groups).
  std::vector<int> player_of_input;
  // Units per block, m^(l).
  std::vector<int> units;
  int class_count = 2;
  double beta = 10.0;
  double gamma = 100.0;
  ChildrenScope children_scope = ChildrenScope::kPreviousBlockOnly;
  // AND mode used for inference when a caller does not pick one.
  AndMode and_mode = AndMode::kSoft;

  int players() const;
  int blocks() const { return static_cast<int>(units.size()); }
  int player_of(int column) const {
    return player_of_input.empty() ? column : player_of_input[column];
  }
  void validate() const;
};

// One block of Harsanyi units. Row u of `tau` and `weights` belongs to unit
// u and spans the block's candidate pool.
struct HarsanyiBlock {
  int units = 0;
  // Offset of the pool in the concatenated activation vector
  // [z0 | block 0 | block 1 | ...].
  int pool_offset = 0;
  int pool_size = 0;
  std::vector<double> tau;
  std::vector<double> weights;

  bool selected(int u, int j) const { return tau[u * pool_size + j] > 0.0; }
  int child_count(int u) const;
};

struct UnitId {
  int block = 0;
  int unit = 0;
  friend bool operator==(const UnitId&, const UnitId&) = default;
};

// Input sample x with its baseline b. z0 = x - b.
struct Sample {
  std::vector<double> x;
  std::vector<double> baseline;  // empty means all zeros

  double baseline_at(int i) const { return baseline.empty() ? 0.0 : baseline[i]; }
};

struct UnitActivations {
  std::vector<std::vector<double>> z;  // z[block][unit] >= 0
  AndMode mode = AndMode::kSoft;

  double at(UnitId id) const { return z[id.block][id.unit]; }
};

struct ReceptiveFieldMap {
  int players = 0;
  std::vector<std::vector<FieldSet>> fields;  // fields[block][unit]

  const FieldSet& at(UnitId id) const { return fields[id.block][id.unit]; }
  std::size_t size_of(UnitId id) const { return at(id).count(); }
};

// Harsanyi-MLP: cascaded AND-gated blocks with a bias-free linear head over
// every unit of every block.
class HarsanyiMlp {
 public:
  explicit HarsanyiMlp(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  int players() const { return config_.players(); }
  int input_dim() const { return config_.input_dim; }
  int class_count() const { return config_.class_count; }
  int block_count() const { return config_.blocks(); }
  int total_units() const { return total_units_; }
  // Index of block l's first unit among all units.
  int unit_offset(int l) const { return unit_offsets_[l]; }

  const std::vector<HarsanyiBlock>& blocks() const { return blocks_; }
  HarsanyiBlock& block(int l) { return blocks_[l]; }
  const HarsanyiBlock& block(int l) const { return blocks_[l]; }

  // class_count rows of total_units() weights.
  const std::vector<double>& head() const { return head_; }
  std::vector<double>& head() { return head_; }
  double head_weight(int cls, UnitId id) const {
    return head_[cls * total_units_ + unit_offsets_[id.block] + id.unit];
  }

 private:
  ModelConfig config_;
  std::vector<HarsanyiBlock> blocks_;
  std::vector<double> head_;
  std::vector<int> unit_offsets_;
  int total_units_ = 0;
};

// z0 with every column whose player is absent from `present` set to 0.
std::vector<double> masked_input(const HarsanyiMlp& model, const Sample& sample,
                                 const FieldSet& present);
std::vector<double> masked_input(const HarsanyiMlp& model, const Sample& sample,
                                 PlayerSet present);

UnitActivations forward_units(const HarsanyiMlp& model, std::span<const double> z0,
                              AndMode mode);
UnitActivations forward_units(const HarsanyiMlp& model, const Sample& sample, PlayerSet mask,
                              AndMode mode);

std::vector<double> model_output(const HarsanyiMlp& model, const UnitActivations& act);
std::vector<double> model_output(const HarsanyiMlp& model, const Sample& sample, PlayerSet mask,
                                 AndMode mode);
double class_logit(const HarsanyiMlp& model, const UnitActivations& act, int cls);

ReceptiveFieldMap receptive_fields(const HarsanyiMlp& model);

// Single-pass Shapley values of the class logit from unit activations.
AttributionVector exact_shapley(const HarsanyiMlp& model, const Sample& sample, int class_index,
                                AndMode mode);
AttributionVector exact_shapley(const HarsanyiMlp& model, const UnitActivations& act,
                                const ReceptiveFieldMap& fields, int class_index);

// Shapley values over the players in `selected`; every other player keeps
// its sample value throughout. Entry k belongs to the k-th member of
// `selected` in ascending order.
AttributionVector restricted_shapley(const HarsanyiMlp& model, const Sample& sample,
                                     const FieldSet& selected, int class_index, AndMode mode);

// V(S) = v(x_S) - v(x_empty) for the chosen class logit. Requires players() <= 24.
ValueOracle model_game(const HarsanyiMlp& model, const Sample& sample, int class_index,
                       AndMode mode);

// Game over the |selected| players with everything else held present.
// Coalition bit k refers to the k-th member of `selected`.
ValueOracle restricted_model_game(const HarsanyiMlp& model, const Sample& sample,
                                  const FieldSet& selected, int class_index, AndMode mode);

// Interactions J_u(S) of the single-unit game S -> z_u(x_S).
GameTable unit_harsanyi_check(const HarsanyiMlp& model, const Sample& sample, UnitId unit,
                              AndMode mode);

}  // namespace harsanyi
