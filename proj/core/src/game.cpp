#include "harsanyi/game.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace harsanyi {
namespace {

void require_kind(const GameTable& t, GameKind want, const char* op) {
  if (t.kind() != want) {
    throw ContractError(std::string(op) + ": expected a " + std::string(game_kind_name(want)) +
                        " table, got " + std::string(game_kind_name(t.kind())));
  }
}

// |S|! (n-|S|-1)! / n!, indexed by |S| = 0..n-1.
std::vector<double> shapley_weights(int n) {
  std::vector<double> w(n);
  double binom = 1.0;  // C(n-1, s)
  for (int s = 0; s < n; ++s) {
    w[s] = 1.0 / (static_cast<double>(n) * binom);
    binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
  }
  return w;
}

}  // namespace

std::string_view game_kind_name(GameKind kind) {
  return kind == GameKind::kReward ? "reward" : "interaction";
}

GameTable::GameTable(int n, GameKind kind) : GameTable(n, kind, {}) {}

GameTable::GameTable(int n, GameKind kind, std::vector<double> values)
    : n_(n), kind_(kind), values_(std::move(values)) {
  if (n < 0 || n > kMaxPlayers) {
    throw CapacityError("game with n=" + std::to_string(n) + " exceeds the " +
                        std::to_string(kMaxPlayers) + "-player limit");
  }
  const std::size_t want = std::size_t{1} << n;
  if (values_.empty()) values_.assign(want, 0.0);
  if (values_.size() != want) {
    throw ContractError("game table for n=" + std::to_string(n) + " needs " +
                        std::to_string(want) + " values, got " + std::to_string(values_.size()));
  }
}

GameTable tabulate(const ValueOracle& oracle, int n) {
  GameTable table(n, GameKind::kReward);
  const std::uint32_t count = std::uint32_t{1} << n;
  for (std::uint32_t s = 0; s < count; ++s) {
    const double v = oracle(PlayerSet(s, n));
    if (!std::isfinite(v)) {
      throw NumericError("oracle returned " + std::to_string(v) + " for coalition bits=" +
                         std::to_string(s));
    }
    table[s] = v;
  }
  return table;
}

AttributionVector brute_force_shapley(const GameTable& rewards) {
  require_kind(rewards, GameKind::kReward, "brute_force_shapley");
  const int n = rewards.n();
  AttributionVector out;
  out.phi.assign(n, 0.0);
  out.provenance = Provenance::kBruteForce;
  out.inference_count = rewards.size();
  if (n == 0) return out;

  const auto w = shapley_weights(n);
  const std::uint32_t count = std::uint32_t{1} << n;
  for (std::uint32_t s = 0; s < count; ++s) {
    const double base = rewards[s];
    const double weight = w[std::popcount(s) == n ? 0 : std::popcount(s)];
    for (int i = 0; i < n; ++i) {
      const std::uint32_t bit = 1u << i;
      if (s & bit) continue;
      out.phi[i] += weight * (rewards[s | bit] - base);
    }
  }
  return out;
}

AttributionVector brute_force_shapley(const ValueOracle& oracle, int n) {
  if (n > kMaxPlayers) {
    throw CapacityError("brute_force_shapley: n=" + std::to_string(n) + " exceeds " +
                        std::to_string(kMaxPlayers));
  }
  return brute_force_shapley(tabulate(oracle, n));
}

GameTable harsanyi_transform(const GameTable& rewards) {
  require_kind(rewards, GameKind::kReward, "harsanyi_transform");
  if (rewards[0] != 0.0) {
    throw ContractError("harsanyi_transform: V(empty) must be 0, got " +
                        std::to_string(rewards[0]));
  }
  GameTable out(rewards.n(), GameKind::kInteraction, rewards.values());
  auto& f = out.values();
  const std::size_t count = f.size();
  for (int d = 0; d < rewards.n(); ++d) {
    const std::size_t bit = std::size_t{1} << d;
    for (std::size_t s = 0; s < count; ++s) {
      if (s & bit) f[s] -= f[s ^ bit];
    }
  }
  return out;
}

GameTable inverse_harsanyi(const GameTable& interactions) {
  require_kind(interactions, GameKind::kInteraction, "inverse_harsanyi");
  if (interactions[0] != 0.0) {
    throw ContractError("inverse_harsanyi: I(empty) must be 0, got " +
                        std::to_string(interactions[0]));
  }
  GameTable out(interactions.n(), GameKind::kReward, interactions.values());
  auto& f = out.values();
  const std::size_t count = f.size();
  for (int d = 0; d < interactions.n(); ++d) {
    const std::size_t bit = std::size_t{1} << d;
    for (std::size_t s = 0; s < count; ++s) {
      if (s & bit) f[s] += f[s ^ bit];
    }
  }
  return out;
}

AttributionVector shapley_from_interactions(const GameTable& interactions) {
  require_kind(interactions, GameKind::kInteraction, "shapley_from_interactions");
  const int n = interactions.n();
  AttributionVector out;
  out.phi.assign(n, 0.0);
  out.provenance = Provenance::kHarsanyiExact;
  out.inference_count = interactions.size();
  const std::uint32_t count = std::uint32_t{1} << n;
  for (std::uint32_t s = 1; s < count; ++s) {
    const double share = interactions[s] / static_cast<double>(std::popcount(s));
    for (std::uint32_t b = s; b != 0; b &= b - 1) out.phi[std::countr_zero(b)] += share;
  }
  return out;
}

std::vector<SpectrumEntry> interaction_spectrum(const GameTable& rewards) {
  const GameTable inter = harsanyi_transform(rewards);
  std::vector<SpectrumEntry> out;
  out.reserve(inter.size());
  for (std::uint32_t s = 0; s < inter.size(); ++s) {
    out.push_back({PlayerSet(s, inter.n()), inter[s]});
  }
  std::stable_sort(out.begin(), out.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
    return a.strength() > b.strength();
  });
  return out;
}

void write_game(std::ostream& out, const GameTable& table) {
  out << "game v1 n=" << table.n() << " kind=" << game_kind_name(table.kind()) << '\n';
  char buf[64];
  for (std::uint32_t s = 0; s < table.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g", table[s]);
    out << s << ' ' << buf << '\n';
  }
}

GameTable read_game(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("game file: missing header");
  std::istringstream header(line);
  std::string magic, version, n_field, kind_field;
  header >> magic >> version >> n_field >> kind_field;
  if (magic != "game" || version != "v1") {
    throw FormatError("game file: expected header 'game v1', got '" + line + "'");
  }
  if (n_field.rfind("n=", 0) != 0 || kind_field.rfind("kind=", 0) != 0) {
    throw FormatError("game file: malformed header '" + line + "'");
  }
  int n = 0;
  const auto nstr = n_field.substr(2);
  if (std::from_chars(nstr.data(), nstr.data() + nstr.size(), n).ec != std::errc{}) {
    throw FormatError("game file: bad player count '" + nstr + "'");
  }
  const auto kstr = kind_field.substr(5);
  GameKind kind;
  if (kstr == "reward") {
    kind = GameKind::kReward;
  } else if (kstr == "interaction") {
    kind = GameKind::kInteraction;
  } else {
    throw FormatError("game file: unknown kind '" + kstr + "'");
  }
  GameTable table(n, kind);
  std::vector<bool> seen(table.size(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string bits_tok, value_tok;
    row >> bits_tok >> value_tok;
    std::uint64_t bits = 0;
    double value = 0.0;
    const bool ok =
        std::from_chars(bits_tok.data(), bits_tok.data() + bits_tok.size(), bits).ec ==
            std::errc{} &&
        std::from_chars(value_tok.data(), value_tok.data() + value_tok.size(), value).ec ==
            std::errc{};
    if (!ok || bits >= table.size() || seen[bits]) {
      throw FormatError("game file: bad row '" + line + "'");
    }
    seen[bits] = true;
    table[static_cast<std::uint32_t>(bits)] = value;
    ++rows;
  }
  if (rows != table.size()) {
    throw FormatError("game file: expected " + std::to_string(table.size()) + " rows, got " +
                      std::to_string(rows));
  }
  return table;
}

}  // namespace harsanyi
