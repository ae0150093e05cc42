#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "harsanyi/errors.hpp"

namespace harsanyi {

inline constexpr int kMaxPlayers = 24;

// A coalition S of players {0, ..., n-1}, stored as a bitmask. The mask is
// also the index of S in a GameTable.
class PlayerSet {
 public:
  PlayerSet() = default;
  PlayerSet(std::uint32_t bits, int n) : bits_(bits), n_(n) {
    if (n < 0 || n > kMaxPlayers) {
      throw CapacityError("player count " + std::to_string(n) + " outside [0, " +
                          std::to_string(kMaxPlayers) + "]");
    }
    if (n < 32 && (bits >> n) != 0) {
      throw ContractError("player set bits " + std::to_string(bits) + " exceed n=" +
                          std::to_string(n));
    }
  }

  static PlayerSet empty(int n) { return PlayerSet(0, n); }
  static PlayerSet full(int n) { return PlayerSet(full_mask(n), n); }
  static PlayerSet single(int player, int n) { return PlayerSet(1u << player, n); }
  static PlayerSet of(const std::vector<int>& players, int n) {
    std::uint32_t bits = 0;
    for (int p : players) bits |= 1u << p;
    return PlayerSet(bits, n);
  }

  static constexpr std::uint32_t full_mask(int n) {
    return n >= 32 ? ~0u : ((1u << n) - 1u);
  }

  std::uint32_t bits() const { return bits_; }
  int n() const { return n_; }
  int size() const { return std::popcount(bits_); }
  bool is_empty() const { return bits_ == 0; }
  bool contains(int player) const { return (bits_ >> player) & 1u; }
  bool is_subset_of(const PlayerSet& other) const { return (bits_ & ~other.bits_) == 0; }

  PlayerSet with(int player) const { return PlayerSet(bits_ | (1u << player), n_, Unchecked{}); }
  PlayerSet without(int player) const {
    return PlayerSet(bits_ & ~(1u << player), n_, Unchecked{});
  }
  PlayerSet operator|(const PlayerSet& o) const { return {bits_ | o.bits_, n_, Unchecked{}}; }
  PlayerSet operator&(const PlayerSet& o) const { return {bits_ & o.bits_, n_, Unchecked{}}; }
  PlayerSet complement() const { return {~bits_ & full_mask(n_), n_, Unchecked{}}; }

  std::vector<int> members() const {
    std::vector<int> out;
    for (std::uint32_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  friend bool operator==(const PlayerSet&, const PlayerSet&) = default;

 private:
  struct Unchecked {};
  PlayerSet(std::uint32_t bits, int n, Unchecked) : bits_(bits), n_(n) {}

  std::uint32_t bits_ = 0;
  int n_ = 0;
};

// Visits every subset of `mask` (including mask itself and 0) in descending
// bit order.
template <typename Fn>
void for_each_subset(std::uint32_t mask, Fn&& fn) {
  std::uint32_t sub = mask;
  while (true) {
    fn(sub);
    if (sub == 0) break;
    sub = (sub - 1) & mask;
  }
}

}  // namespace harsanyi
