#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "harsanyi/attribution.hpp"
#include "harsanyi/cnn.hpp"
#include "harsanyi/field_set.hpp"
#include "harsanyi/game.hpp"
#include "harsanyi/mlp.hpp"

namespace harsanyi {

using AnyModel = std::variant<HarsanyiMlp, HarsanyiCnn>;

// Uniform per-sample view of either topology. Inputs are model rows (already
// baseline-shifted for the MLP, raw images for the CNN).
int player_count(const AnyModel& model);
int input_size(const AnyModel& model);
int class_count(const AnyModel& model);
AndMode default_mode(const AnyModel& model);

std::vector<double> logits(const AnyModel& model, std::span<const double> x, AndMode mode);

// `requested` wins; otherwise the label if known; otherwise the argmax class.
int resolve_class(const AnyModel& model, std::span<const double> x, std::optional<int> label,
                  std::optional<int> requested, AndMode mode);

AttributionVector exact_attribution(const AnyModel& model, std::span<const double> x, int cls,
                                    AndMode mode);

// V(S) = v(x_S) - v(x_empty). The oracle keeps a reference to `model`.
ValueOracle sample_game(const AnyModel& model, std::span<const double> x, int cls, AndMode mode);

struct FieldInteraction {
  FieldSet field;
  double interaction = 0.0;
};

// Nonzero interactions read off a single forward pass: I(S) is the sum of
// head weight times activation over units whose receptive field is S.
// Sorted by |I| descending, ties by ascending member list.
std::vector<FieldInteraction> network_spectrum(const AnyModel& model, std::span<const double> x,
                                               int cls, AndMode mode);

}  // namespace harsanyi
