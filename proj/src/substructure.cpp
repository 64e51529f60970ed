#include "sitrec/substructure.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>

namespace sitrec {

std::vector<Substructure> enumerate_substructures(const Lexicon& lex, const Situation& s) {
  // Non-null pairs in frame order.
  std::vector<std::pair<RoleId, NounId>> pairs;
  for (RoleId role : lex.verb_roles(s.verb)) {
    auto noun = s.frame.get(role);
    if (noun && *noun != kNullNoun) pairs.emplace_back(role, *noun);
  }
  const int r = static_cast<int>(pairs.size());

  std::vector<std::uint32_t> masks;
  masks.reserve((1u << r) - 1);
  for (std::uint32_t m = 1; m < (1u << r); ++m) masks.push_back(m);
  std::sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    int pa = std::popcount(a), pb = std::popcount(b);
    if (pa != pb) return pa < pb;
    // Same size: order by member positions, lowest bit = first frame slot.
    while (a && b) {
      int la = std::countr_zero(a), lb = std::countr_zero(b);
      if (la != lb) return la < lb;
      a &= a - 1;
      b &= b - 1;
    }
    return false;
  });

  std::vector<Substructure> out;
  out.reserve(masks.size());
  for (std::uint32_t m : masks) {
    Substructure sub;
    sub.verb = s.verb;
    for (int i = 0; i < r; ++i)
      if (m & (1u << i)) sub.pairs.set(pairs[i].first, pairs[i].second);
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace sitrec
