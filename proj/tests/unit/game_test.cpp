#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "harsanyi/errors.hpp"
#include "harsanyi/game.hpp"
#include "support.hpp"

namespace harsanyi {
namespace {

using testing::additive_game;
using testing::literal_dividends;
using testing::max_abs;
using testing::max_abs_diff;
using testing::oracle_of;
using testing::permutation_shapley;
using testing::random_game;
using testing::rng_for;

// Players a=0, o=1, e=2, m=3 with I({a,o})=2, I({a,e})=4, I({a,o,m})=3, I({o,m})=1.
GameTable toy_interactions() {
  GameTable i(4, GameKind::kInteraction);
  i[0b0011] = 2.0;
  i[0b0101] = 4.0;
  i[0b1011] = 3.0;
  i[0b1010] = 1.0;
  return i;
}

GameTable symmetric_five() {
  return GameTable(2, GameKind::kReward, {0.0, 0.0, 0.0, 5.0});
}

TEST(PlayerSet, AlgebraAndBounds) {
  const auto s = PlayerSet::of({0, 2}, 4);
  EXPECT_EQ(s.bits(), 0b0101u);
  EXPECT_EQ(s.size(), 2);
  EXPECT_TRUE(s.contains(2));
  EXPECT_FALSE(s.contains(1));
  EXPECT_EQ(s.complement().bits(), 0b1010u);
  EXPECT_TRUE(PlayerSet::single(0, 4).is_subset_of(s));
  EXPECT_EQ((s | PlayerSet::single(3, 4)).bits(), 0b1101u);
  EXPECT_EQ((s & PlayerSet::single(2, 4)).bits(), 0b0100u);
  EXPECT_EQ(s.with(1).without(0).bits(), 0b0110u);
  EXPECT_EQ(s.members(), (std::vector<int>{0, 2}));
  EXPECT_THROW(PlayerSet(0b10000, 4), ContractError);
  EXPECT_THROW(PlayerSet::empty(25), CapacityError);
  EXPECT_EQ(PlayerSet::full(24).size(), 24);
}

TEST(PlayerSet, SubsetEnumerationVisitsEverySubsetOnce) {
  std::vector<std::uint32_t> seen;
  for_each_subset(0b1011u, [&](std::uint32_t s) { seen.push_back(s); });
  EXPECT_EQ(seen, (std::vector<std::uint32_t>{0b1011, 0b1010, 0b1001, 0b1000, 0b0011, 0b0010,
                                              0b0001, 0b0000}));
}

TEST(BruteForceShapley, SymmetricGameSplitsEvenly) {
  const auto phi = brute_force_shapley(symmetric_five());
  EXPECT_EQ(phi.phi, (std::vector<double>{2.5, 2.5}));
  EXPECT_EQ(phi.inference_count, 4u);
  EXPECT_EQ(phi.provenance, Provenance::kBruteForce);
}

TEST(BruteForceShapley, AdditiveGameReturnsCoefficients) {
  const auto g = additive_game({1.0, -2.0, 7.0});
  EXPECT_LE(testing::max_abs_diff(brute_force_shapley(g).phi, {1.0, -2.0, 7.0}), 1e-15);
}

TEST(BruteForceShapley, ToyGameMatchesInteractionRoute) {
  const auto v = inverse_harsanyi(toy_interactions());
  const auto brute = brute_force_shapley(v);
  const auto via_i = shapley_from_interactions(toy_interactions());
  EXPECT_DOUBLE_EQ(brute.phi[0], 4.0);
  EXPECT_DOUBLE_EQ(brute.phi[2], 2.0);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(brute.phi[i], via_i.phi[i], 1e-12);
}

TEST(BruteForceShapley, AgreesWithPermutationAverage) {
  auto rng = rng_for(11);
  for (int n = 1; n <= 7; ++n) {
    const auto g = random_game(n, rng);
    const auto phi = brute_force_shapley(g);
    EXPECT_LE(max_abs_diff(phi.phi, permutation_shapley(g)), 1e-12) << "n=" << n;
  }
}

TEST(BruteForceShapley, Errors) {
  EXPECT_THROW(brute_force_shapley([](PlayerSet) { return 0.0; }, 25), CapacityError);
  const ValueOracle bad = [](PlayerSet s) {
    return s.bits() == 0b101 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  };
  try {
    brute_force_shapley(bad, 3);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos) << e.what();
  }
}

TEST(HarsanyiTransform, HandRecursionExample) {
  const GameTable v(2, GameKind::kReward, {0.0, 1.0, 1.0, 3.0});
  const auto i = harsanyi_transform(v);
  EXPECT_EQ(i.kind(), GameKind::kInteraction);
  EXPECT_EQ(i.values(), (std::vector<double>{0.0, 1.0, 1.0, 1.0}));
}

TEST(HarsanyiTransform, AdditiveGameHasOnlySingletons) {
  const auto i = harsanyi_transform(additive_game({1.0, -2.0, 7.0, 0.5}));
  for (std::uint32_t s = 0; s < i.size(); ++s) {
    if (std::popcount(s) == 1) {
      EXPECT_NE(i[s], 0.0);
    } else {
      EXPECT_EQ(i[s], 0.0) << s;
    }
  }
}

TEST(HarsanyiTransform, FastMobiusEqualsLiteralRecursion) {
  auto rng = rng_for(3);
  for (int n = 1; n <= 8; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto v = random_game(n, rng);
      const auto fast = harsanyi_transform(v);
      const auto slow = literal_dividends(v);
      EXPECT_LE(max_abs_diff(fast.values(), slow.values()), 1e-9 * std::max(1.0, max_abs(slow.values())))
          << "n=" << n;
      EXPECT_EQ(fast[0], 0.0);
    }
  }
}

TEST(HarsanyiTransform, RejectsWrongKindOrNonzeroEmpty) {
  EXPECT_THROW(harsanyi_transform(GameTable(2, GameKind::kInteraction)), ContractError);
  EXPECT_THROW(harsanyi_transform(GameTable(2, GameKind::kReward, {1.0, 0.0, 0.0, 0.0})),
               ContractError);
  EXPECT_THROW(inverse_harsanyi(GameTable(2, GameKind::kReward)), ContractError);
}

TEST(InverseHarsanyi, SumsSubsets) {
  const GameTable i(2, GameKind::kInteraction, {0.0, 1.0, 1.0, 1.0});
  EXPECT_EQ(inverse_harsanyi(i)[0b11], 3.0);
  const auto zero = inverse_harsanyi(GameTable(5, GameKind::kInteraction));
  EXPECT_EQ(max_abs(zero.values()), 0.0);
}

TEST(InverseHarsanyi, RoundTripsIntegerGamesExactly) {
  auto rng = rng_for(5);
  for (int n = 1; n <= 10; ++n) {
    const auto v = testing::integer_game(n, rng);
    EXPECT_EQ(inverse_harsanyi(harsanyi_transform(v)).values(), v.values());
    const auto i = harsanyi_transform(v);
    EXPECT_EQ(harsanyi_transform(inverse_harsanyi(i)).values(), i.values());
  }
}

TEST(InverseHarsanyi, RoundTripsRandomGames) {
  auto rng = rng_for(6);
  const auto v = random_game(10, rng);
  const auto back = inverse_harsanyi(harsanyi_transform(v));
  EXPECT_LE(max_abs_diff(back.values(), v.values()), 1e-9 * std::max(1.0, max_abs(v.values())));
}

TEST(ShapleyFromInteractions, ToyGame) {
  const auto phi = shapley_from_interactions(toy_interactions());
  EXPECT_DOUBLE_EQ(phi.phi[0], 4.0);
  EXPECT_DOUBLE_EQ(phi.phi[2], 2.0);
}

TEST(ShapleyFromInteractions, GrandCoalitionSplitsUniformly) {
  GameTable i(5, GameKind::kInteraction);
  i[0b11111] = 10.0;
  for (double p : shapley_from_interactions(i).phi) EXPECT_DOUBLE_EQ(p, 2.0);
}

TEST(InteractionSpectrum, AdditiveGame) {
  const auto spec = interaction_spectrum(additive_game({1.0, -3.0, 2.0, 0.5}));
  ASSERT_EQ(spec.size(), 16u);
  int nonzero = 0;
  for (const auto& e : spec) nonzero += e.interaction != 0.0;
  EXPECT_EQ(nonzero, 4);
  EXPECT_EQ(spec[0].coalition.bits(), 0b0010u);
  EXPECT_EQ(spec[0].strength(), 3.0);
}

TEST(InteractionSpectrum, ToyGameSortedDescending) {
  const auto spec = interaction_spectrum(inverse_harsanyi(toy_interactions()));
  ASSERT_EQ(spec.size(), 16u);
  EXPECT_DOUBLE_EQ(spec[0].strength(), 4.0);
  int nonzero = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    if (k > 0) EXPECT_GE(spec[k - 1].strength(), spec[k].strength());
    nonzero += std::abs(spec[k].interaction) > 1e-12;
    total += spec[k].interaction;
  }
  EXPECT_EQ(nonzero, 4);
  EXPECT_NEAR(total, 10.0, 1e-12);
}

TEST(InteractionSpectrum, TiesKeepAscendingBits) {
  const auto spec = interaction_spectrum(additive_game({1.0, 1.0, 1.0}));
  EXPECT_EQ(spec[0].coalition.bits(), 0b001u);
  EXPECT_EQ(spec[1].coalition.bits(), 0b010u);
  EXPECT_EQ(spec[2].coalition.bits(), 0b100u);
  EXPECT_EQ(spec[3].coalition.bits(), 0b000u);
}

TEST(GameText, RoundTripsBitExactly) {
  auto rng = rng_for(8);
  const auto v = random_game(5, rng);
  std::stringstream ss;
  write_game(ss, v);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "game v1 n=5 kind=reward");
  const auto back = read_game(ss);
  EXPECT_EQ(back.values(), v.values());
  EXPECT_EQ(back.kind(), GameKind::kReward);
}

TEST(GameText, RejectsMalformedInput) {
  std::istringstream missing("game v1 n=2 kind=reward\n0 0\n1 1\n2 1\n");
  EXPECT_THROW(read_game(missing), FormatError);
  std::istringstream dup("game v1 n=1 kind=reward\n0 0\n0 1\n");
  EXPECT_THROW(read_game(dup), FormatError);
  std::istringstream header("game v2 n=1 kind=reward\n0 0\n1 1\n");
  EXPECT_THROW(read_game(header), FormatError);
}

}  // namespace
}  // namespace harsanyi
