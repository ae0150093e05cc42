#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "harsanyi/player_set.hpp"

namespace harsanyi {

// Set of input players of arbitrary size. Receptive fields use this instead
// of PlayerSet because grid models have far more than 24 locations.
using FieldSet = boost::dynamic_bitset<std::uint64_t>;

template <typename Fn>
void for_each_member(const FieldSet& set, Fn&& fn) {
  for (auto i = set.find_first(); i != FieldSet::npos; i = set.find_next(i)) {
    fn(static_cast<int>(i));
  }
}

inline std::vector<int> members(const FieldSet& set) {
  std::vector<int> out;
  out.reserve(set.count());
  for_each_member(set, [&](int i) { out.push_back(i); });
  return out;
}

inline FieldSet to_field_set(PlayerSet s) {
  FieldSet out(s.n());
  for (int i = 0; i < s.n(); ++i) out[i] = s.contains(i);
  return out;
}

inline FieldSet field_set_of(const std::vector<int>& players, int n) {
  FieldSet out(n);
  for (int p : players) out.set(p);
  return out;
}

// "{0,3,7}"
inline std::string format_members(const FieldSet& set) {
  std::string out = "{";
  bool first = true;
  for_each_member(set, [&](int i) {
    if (!first) out += ',';
    out += std::to_string(i);
    first = false;
  });
  return out + "}";
}

}  // namespace harsanyi
