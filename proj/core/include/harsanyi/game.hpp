#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "harsanyi/attribution.hpp"
#include "harsanyi/player_set.hpp"

namespace harsanyi {

// V(S) for a fixed sample: the reward earned by coalition S. Implementations
// must be deterministic and return V(empty) = 0.
using ValueOracle = std::function<double(PlayerSet)>;

enum class GameKind { kReward, kInteraction };

std::string_view game_kind_name(GameKind kind);

// Dense table over all 2^n coalitions, indexed by PlayerSet::bits().
// Holds either rewards V(S) or Harsanyi interactions I(S).
class GameTable {
 public:
  GameTable(int n, GameKind kind);
  GameTable(int n, GameKind kind, std::vector<double> values);

  int n() const { return n_; }
  GameKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::uint32_t bits) const { return values_[bits]; }
  double& operator[](std::uint32_t bits) { return values_[bits]; }
  double at(PlayerSet s) const { return values_[s.bits()]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  int n_;
  GameKind kind_;
  std::vector<double> values_;
};

// Evaluates the oracle on every coalition. Throws NumericError naming the
// coalition if a value is not finite.
GameTable tabulate(const ValueOracle& oracle, int n);

// Shapley values by the permutation-weight formula over all 2^n coalitions.
AttributionVector brute_force_shapley(const ValueOracle& oracle, int n);
AttributionVector brute_force_shapley(const GameTable& rewards);

// Moebius transform: I(S) = sum_{L subset S} (-1)^{|S|-|L|} V(L).
GameTable harsanyi_transform(const GameTable& rewards);

// Zeta transform: V(S) = sum_{L subset S} I(L).
GameTable inverse_harsanyi(const GameTable& interactions);

// phi(i) = sum_{S containing i} I(S) / |S|.
AttributionVector shapley_from_interactions(const GameTable& interactions);

struct SpectrumEntry {
  PlayerSet coalition;
  double interaction = 0.0;
  double strength() const { return interaction < 0 ? -interaction : interaction; }
};

// All 2^n interactions of the reward game, sorted by |I(S)| descending. Ties
// are broken by ascending coalition bits so the order is deterministic.
std::vector<SpectrumEntry> interaction_spectrum(const GameTable& rewards);

// Text format: header `game v1 n=<n> kind=<reward|interaction>` followed by
// 2^n lines `<bits> <value>` with 17 significant digits.
void write_game(std::ostream& out, const GameTable& table);
GameTable read_game(std::istream& in);

}  // namespace harsanyi
