#pragma once

#include <vector>

#include "sitrec/lexicon.hpp"

namespace sitrec {

// A verb plus a non-empty subset of one annotation's non-null role-noun
// pairs. These are the units queries are generated from and web images are
// labeled with.
struct Substructure {
  VerbId verb;
  RealizedFrame pairs;  // no null-noun values; roles distinct

  friend auto operator<=>(const Substructure&, const Substructure&) = default;
};

// All 2^r - 1 non-empty subsets of the r non-null pairs of s, in
// deterministic order: by subset size, then lexicographically by role
// positions in frame order.
std::vector<Substructure> enumerate_substructures(const Lexicon& lex, const Situation& s);

}  // namespace sitrec
