#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sitrec/common.hpp"

namespace sitrec {

// Role -> noun assignments, kept sorted by role id. A full frame assigns
// every role of the owning verb's frame; a partial frame may omit roles.
class RealizedFrame {
 public:
  RealizedFrame() = default;

  void set(RoleId role, NounId noun);
  std::optional<NounId> get(RoleId role) const;
  bool has(RoleId role) const { return get(role).has_value(); }
  std::size_t size() const { return assignments_.size(); }
  bool empty() const { return assignments_.empty(); }
  std::span<const std::pair<RoleId, NounId>> assignments() const { return assignments_; }

  friend auto operator<=>(const RealizedFrame&, const RealizedFrame&) = default;

 private:
  std::vector<std::pair<RoleId, NounId>> assignments_;
};

struct Situation {
  VerbId verb;
  RealizedFrame frame;

  friend auto operator<=>(const Situation&, const Situation&) = default;
};

// The discrete situation space: verbs, frames with ordered role lists,
// nouns with glosses, verb templates, and per-(verb, role) candidate noun
// sets. Immutable after construction; concurrent reads are safe.
class Lexicon {
 public:
  int verb_count() const { return static_cast<int>(verb_names_.size()); }
  int noun_count() const { return static_cast<int>(noun_names_.size()); }
  int role_count() const { return static_cast<int>(role_names_.size()); }
  int frame_count() const { return static_cast<int>(frame_names_.size()); }

  const std::string& verb_name(VerbId v) const { return verb_names_[v.v]; }
  const std::string& noun_name(NounId n) const { return noun_names_[n.v]; }
  const std::string& role_name(RoleId r) const { return role_names_[r.v]; }
  const std::string& frame_name(FrameId f) const { return frame_names_[f.v]; }

  std::optional<VerbId> find_verb(std::string_view name) const;
  std::optional<NounId> find_noun(std::string_view name) const;  // "_" -> kNullNoun
  std::optional<RoleId> find_role(std::string_view name) const;

  FrameId frame_of(VerbId v) const { return verb_frame_[v.v]; }
  std::span<const RoleId> frame_roles(FrameId f) const;
  std::span<const RoleId> verb_roles(VerbId v) const { return frame_roles(frame_of(v)); }
  int role_position(VerbId v, RoleId e) const;  // -1 if e not in the verb's frame

  const std::string& verb_template(VerbId v) const { return verb_templates_[v.v]; }
  std::span<const std::string> glosses(NounId n) const;
  const std::string& first_gloss(NounId n) const;

  // Candidate nouns for (verb, role-position), sorted by noun id; the null
  // noun is always present. role_pos indexes the verb's role list.
  std::span<const NounId> candidates(VerbId v, int role_pos) const;
  int candidate_index(VerbId v, int role_pos, NounId n) const;  // -1 if absent

  // Flat indexing over the CRF support. "Pairs" are (verb, role) slots in
  // verb-major order; "triples" are candidate slots within pairs.
  int pair_count() const { return static_cast<int>(pair_cand_.size()); }
  int pair_index(VerbId v, int role_pos) const { return pair_offset_[v.v] + role_pos; }
  int triple_count() const { return triple_offset_.back(); }
  int triple_offset(int pair_idx) const { return triple_offset_[pair_idx]; }
  int triple_index(VerbId v, int role_pos, int cand_idx) const {
    return triple_offset_[pair_index(v, role_pos)] + cand_idx;
  }

  static Lexicon build(std::vector<std::string> nouns,
                       std::vector<std::vector<std::string>> glosses,
                       std::vector<std::string> roles,
                       std::vector<std::pair<std::string, std::vector<std::string>>> frames,
                       std::vector<std::tuple<std::string, std::string, std::string>> verbs,
                       std::map<std::pair<std::string, std::string>, std::vector<std::string>>
                           candidate_lists);

 private:
  std::vector<std::string> verb_names_, noun_names_, role_names_, frame_names_;
  std::map<std::string, std::int32_t, std::less<>> verb_lookup_, noun_lookup_, role_lookup_;
  std::vector<FrameId> verb_frame_;
  std::vector<std::vector<RoleId>> frame_role_lists_;
  std::vector<std::string> verb_templates_;
  std::vector<std::vector<std::string>> noun_glosses_;
  std::vector<int> pair_offset_;                // per verb, size |V|+1
  std::vector<std::vector<NounId>> pair_cand_;  // per pair, sorted
  std::vector<int> triple_offset_;              // per pair, size pairs+1
};

// Lexicon file format ("sitrec-lexicon v1"), tab-separated records:
//   noun  <name> <gloss>[|<gloss>...]
//   frame <name> <role> [<role> ...]
//   verb  <name> <frame> <template>
//   cand  <verb> <role> [<noun> ...]
// "_" names the null noun and may not be declared. Parse or invariant
// failures throw DataError naming the offending identifier.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view content, std::string_view path_for_errors);
std::string serialize_lexicon(const Lexicon& lex);

// Empty result means the situation is valid: verb known, every role of the
// verb's frame assigned exactly once, nouns drawn from N plus the null noun.
std::vector<std::string> validate_situation(const Lexicon& lex, const Situation& s);

struct SituationSpaceSize {
  std::vector<std::int64_t> per_verb;
  std::int64_t total = 0;
};
// Exact support size of the CRF: per verb the product of candidate-set
// sizes over its roles, and the sum over verbs.
SituationSpaceSize situation_space_size(const Lexicon& lex);

std::string format_situation(const Lexicon& lex, const Situation& s);

}  // namespace sitrec
