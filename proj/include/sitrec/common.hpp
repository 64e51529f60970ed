#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sitrec {

// Exit-code aligned error categories (see tools/): 2 config, 3 data, 4 numeric.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense integer ids for the discrete output space. Identifiers are opaque
// strings in files; the lexicon assigns ids in lexicographic name order so
// tie-breaking by id is reproducible across runs.
template <class Tag>
struct Id {
  std::int32_t v = -1;
  constexpr bool valid() const { return v >= 0; }
  friend constexpr auto operator<=>(Id, Id) = default;
};

using VerbId = Id<struct VerbTag>;
using NounId = Id<struct NounTag>;
using RoleId = Id<struct RoleTag>;
using FrameId = Id<struct FrameTag>;

// The null noun (unknown / not applicable). Always id 0 and a member of
// every candidate set; spelled "_" in files.
inline constexpr NounId kNullNoun{0};
inline constexpr const char* kNullNounToken = "_";

}  // namespace sitrec

template <class Tag>
struct std::hash<sitrec::Id<Tag>> {
  std::size_t operator()(sitrec::Id<Tag> id) const noexcept {
    return std::hash<std::int32_t>{}(id.v);
  }
};
