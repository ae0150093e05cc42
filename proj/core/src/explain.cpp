#include "harsanyi/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "harsanyi/errors.hpp"

namespace harsanyi {
namespace {

Sample mlp_sample(const HarsanyiMlp& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw ContractError("sample has " + std::to_string(x.size()) + " columns, model expects " +
                        std::to_string(model.input_dim()));
  }
  return Sample{std::vector<double>(x.begin(), x.end()), {}};
}

}  // namespace

int player_count(const AnyModel& model) {
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) return m->players();
  return std::get<HarsanyiCnn>(model).locations();
}

int input_size(const AnyModel& model) {
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) return m->input_dim();
  return std::get<HarsanyiCnn>(model).config().image_size();
}

int class_count(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.class_count(); }, model);
}

AndMode default_mode(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.config().and_mode; }, model);
}

std::vector<double> logits(const AnyModel& model, std::span<const double> x, AndMode mode) {
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) {
    const Sample s = mlp_sample(*m, x);
    return model_output(*m, s, PlayerSet::full(m->players()), mode);
  }
  const auto& cnn = std::get<HarsanyiCnn>(model);
  FieldSet all(cnn.locations());
  all.set();
  return cnn_output(cnn, cnn_forward(cnn, x, all, mode));
}

int resolve_class(const AnyModel& model, std::span<const double> x, std::optional<int> label,
                  std::optional<int> requested, AndMode mode) {
  const int classes = class_count(model);
  const auto pick = requested ? requested : label;
  if (pick) {
    if (*pick < 0 || *pick >= classes) {
      throw ContractError("class " + std::to_string(*pick) + " out of range");
    }
    return *pick;
  }
  const auto out = logits(model, x, mode);
  return static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
}

AttributionVector exact_attribution(const AnyModel& model, std::span<const double> x, int cls,
                                    AndMode mode) {
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) {
    return exact_shapley(*m, mlp_sample(*m, x), cls, mode);
  }
  return exact_shapley_grid(std::get<HarsanyiCnn>(model), x, cls, mode);
}

ValueOracle sample_game(const AnyModel& model, std::span<const double> x, int cls, AndMode mode) {
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) {
    return model_game(*m, mlp_sample(*m, x), cls, mode);
  }
  return grid_game(std::get<HarsanyiCnn>(model), x, cls, mode);
}

std::vector<FieldInteraction> network_spectrum(const AnyModel& model, std::span<const double> x,
                                               int cls, AndMode mode) {
  std::map<FieldSet, double> sums;
  if (const auto* m = std::get_if<HarsanyiMlp>(&model)) {
    const auto act = forward_units(*m, mlp_sample(*m, x), PlayerSet::full(m->players()), mode);
    const auto fields = receptive_fields(*m);
    for (int l = 0; l < m->block_count(); ++l) {
      for (int u = 0; u < m->block(l).units; ++u) {
        const UnitId id{l, u};
        if (act.at(id) == 0.0 || fields.size_of(id) == 0) continue;
        sums[fields.at(id)] += m->head_weight(cls, id) * act.at(id);
      }
    }
  } else {
    const auto& cnn = std::get<HarsanyiCnn>(model);
    FieldSet all(cnn.locations());
    all.set();
    const auto act = cnn_forward(cnn, x, all, mode);
    const auto fields = grid_receptive_fields(cnn);
    for (int l = 0; l < cnn.block_count(); ++l) {
      const auto& z = act.blocks[l];
      for (int loc = 0; loc < cnn.locations(); ++loc) {
        const auto& r = fields.location(l, loc);
        if (r.none()) continue;
        for (int c = 0; c < z.channels; ++c) {
          if (z.at(c, loc) == 0.0) continue;
          sums[r] += cnn.head_weight(cls, l, c, loc) * z.at(c, loc);
        }
      }
    }
  }
  std::vector<FieldInteraction> out;
  for (const auto& [field, value] : sums) {
    if (value != 0.0) out.push_back({field, value});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double x = std::abs(a.interaction), y = std::abs(b.interaction);
    if (x != y) return x > y;
    return members(a.field) < members(b.field);
  });
  return out;
}

}  // namespace harsanyi
