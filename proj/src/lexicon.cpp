#include "sitrec/lexicon.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sitrec/io_util.hpp"

namespace sitrec {

namespace {
constexpr std::string_view kLexiconMagic = "sitrec-lexicon";

std::int32_t lookup_or_fail(const std::map<std::string, std::int32_t, std::less<>>& table,
                            std::string_view name, std::string_view kind) {
  auto it = table.find(name);
  if (it == table.end())
    throw DataError("unknown " + std::string(kind) + " '" + std::string(name) + "'");
  return it->second;
}
}  // namespace

void RealizedFrame::set(RoleId role, NounId noun) {
  auto it = std::lower_bound(assignments_.begin(), assignments_.end(), role,
                             [](const auto& a, RoleId r) { return a.first < r; });
  if (it != assignments_.end() && it->first == role) {
    it->second = noun;
  } else {
    assignments_.insert(it, {role, noun});
  }
}

std::optional<NounId> RealizedFrame::get(RoleId role) const {
  auto it = std::lower_bound(assignments_.begin(), assignments_.end(), role,
                             [](const auto& a, RoleId r) { return a.first < r; });
  if (it != assignments_.end() && it->first == role) return it->second;
  return std::nullopt;
}

std::optional<VerbId> Lexicon::find_verb(std::string_view name) const {
  auto it = verb_lookup_.find(name);
  if (it == verb_lookup_.end()) return std::nullopt;
  return VerbId{it->second};
}

std::optional<NounId> Lexicon::find_noun(std::string_view name) const {
  if (name == kNullNounToken) return kNullNoun;
  auto it = noun_lookup_.find(name);
  if (it == noun_lookup_.end()) return std::nullopt;
  return NounId{it->second};
}

std::optional<RoleId> Lexicon::find_role(std::string_view name) const {
  auto it = role_lookup_.find(name);
  if (it == role_lookup_.end()) return std::nullopt;
  return RoleId{it->second};
}

std::span<const RoleId> Lexicon::frame_roles(FrameId f) const { return frame_role_lists_[f.v]; }

int Lexicon::role_position(VerbId v, RoleId e) const {
  auto roles = verb_roles(v);
  for (int i = 0; i < static_cast<int>(roles.size()); ++i)
    if (roles[i] == e) return i;
  return -1;
}

std::span<const std::string> Lexicon::glosses(NounId n) const { return noun_glosses_[n.v]; }

const std::string& Lexicon::first_gloss(NounId n) const {
  const auto& gs = noun_glosses_[n.v];
  if (gs.empty())
    throw DataError("noun '" + noun_name(n) + "' has no gloss");
  return gs.front();
}

std::span<const NounId> Lexicon::candidates(VerbId v, int role_pos) const {
  return pair_cand_[pair_index(v, role_pos)];
}

int Lexicon::candidate_index(VerbId v, int role_pos, NounId n) const {
  const auto& cands = pair_cand_[pair_index(v, role_pos)];
  auto it = std::lower_bound(cands.begin(), cands.end(), n);
  if (it != cands.end() && *it == n) return static_cast<int>(it - cands.begin());
  return -1;
}

Lexicon Lexicon::build(
    std::vector<std::string> nouns, std::vector<std::vector<std::string>> glosses,
    std::vector<std::string> roles,
    std::vector<std::pair<std::string, std::vector<std::string>>> frames,
    std::vector<std::tuple<std::string, std::string, std::string>> verbs,
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> candidate_lists) {
  Lexicon lex;

  // Ids are lexicographic ranks; the null noun is pinned to id 0.
  auto index_names = [](std::vector<std::string> names,
                        std::map<std::string, std::int32_t, std::less<>>& lookup,
                        std::int32_t base) {
    std::sort(names.begin(), names.end());
    for (std::size_t i = 0; i + 1 < names.size(); ++i)
      if (names[i] == names[i + 1]) throw DataError("duplicate identifier '" + names[i] + "'");
    for (std::size_t i = 0; i < names.size(); ++i)
      lookup.emplace(names[i], base + static_cast<std::int32_t>(i));
    return names;
  };

  if (glosses.size() != nouns.size()) throw DataError("gloss list size mismatch");
  for (const auto& n : nouns)
    if (n == kNullNounToken) throw DataError("noun name '_' is reserved for the null noun");

  std::vector<std::size_t> noun_order(nouns.size());
  for (std::size_t i = 0; i < noun_order.size(); ++i) noun_order[i] = i;
  std::sort(noun_order.begin(), noun_order.end(),
            [&](std::size_t a, std::size_t b) { return nouns[a] < nouns[b]; });
  lex.noun_names_.push_back(kNullNounToken);
  lex.noun_glosses_.emplace_back();
  for (std::size_t i : noun_order) {
    lex.noun_names_.push_back(nouns[i]);
    lex.noun_glosses_.push_back(glosses[i]);
  }
  for (std::size_t i = 1; i < lex.noun_names_.size(); ++i) {
    if (i + 1 < lex.noun_names_.size() && lex.noun_names_[i] == lex.noun_names_[i + 1])
      throw DataError("duplicate noun '" + lex.noun_names_[i] + "'");
    lex.noun_lookup_.emplace(lex.noun_names_[i], static_cast<std::int32_t>(i));
  }

  lex.role_names_ = index_names(std::move(roles), lex.role_lookup_, 0);

  std::map<std::string, std::vector<std::string>, std::less<>> frame_defs;
  for (auto& [fname, frole_names] : frames) {
    if (!frame_defs.emplace(fname, frole_names).second)
      throw DataError("frame '" + fname + "' declared twice");
    if (frole_names.empty()) throw DataError("frame '" + fname + "' has an empty role list");
    std::set<std::string_view> seen;
    for (const auto& r : frole_names)
      if (!seen.insert(r).second)
        throw DataError("frame '" + fname + "' lists role '" + r + "' twice");
  }
  std::map<std::string, std::int32_t, std::less<>> frame_lookup;
  for (const auto& [fname, _] : frame_defs) {
    frame_lookup.emplace(fname, static_cast<std::int32_t>(lex.frame_names_.size()));
    lex.frame_names_.push_back(fname);
  }
  lex.frame_role_lists_.resize(lex.frame_names_.size());
  for (const auto& [fname, frole_names] : frame_defs) {
    auto& list = lex.frame_role_lists_[frame_lookup.at(fname)];
    for (const auto& r : frole_names)
      list.push_back(RoleId{lookup_or_fail(lex.role_lookup_, r, "role")});
  }

  std::map<std::string, std::pair<std::string, std::string>, std::less<>> verb_defs;
  for (auto& [vname, fname, tmpl] : verbs) {
    auto [it, inserted] = verb_defs.emplace(vname, std::make_pair(fname, tmpl));
    if (!inserted) throw DataError("verb '" + vname + "' maps to multiple frames");
  }
  for (const auto& [vname, def] : verb_defs) {
    lex.verb_lookup_.emplace(vname, static_cast<std::int32_t>(lex.verb_names_.size()));
    lex.verb_names_.push_back(vname);
    auto fit = frame_lookup.find(def.first);
    if (fit == frame_lookup.end())
      throw DataError("verb '" + vname + "' references unknown frame '" + def.first + "'");
    lex.verb_frame_.push_back(FrameId{fit->second});
    lex.verb_templates_.push_back(def.second);
  }

  // Template slots: "{[fixed words ]role}"; the last token names the role.
  for (std::size_t vi = 0; vi < lex.verb_names_.size(); ++vi) {
    const std::string& tmpl = lex.verb_templates_[vi];
    std::size_t pos = 0;
    while ((pos = tmpl.find('{', pos)) != std::string::npos) {
      std::size_t end = tmpl.find('}', pos);
      if (end == std::string::npos)
        throw DataError("verb '" + lex.verb_names_[vi] + "' template has an unclosed '{'");
      auto inside = io::split_ws(std::string_view(tmpl).substr(pos + 1, end - pos - 1));
      if (inside.empty())
        throw DataError("verb '" + lex.verb_names_[vi] + "' template has an empty slot");
      std::string_view role_name = inside.back();
      auto rit = lex.role_lookup_.find(role_name);
      bool in_frame = false;
      if (rit != lex.role_lookup_.end()) {
        for (RoleId r : lex.frame_role_lists_[lex.verb_frame_[vi].v])
          if (r.v == rit->second) in_frame = true;
      }
      if (!in_frame)
        throw DataError("verb '" + lex.verb_names_[vi] + "' template slot '" +
                        std::string(role_name) + "' is not a role of its frame");
      pos = end + 1;
    }
  }

  // Candidate sets: declared nouns plus the null noun, sorted by id.
  lex.pair_offset_.assign(lex.verb_names_.size() + 1, 0);
  for (std::size_t vi = 0; vi < lex.verb_names_.size(); ++vi)
    lex.pair_offset_[vi + 1] =
        lex.pair_offset_[vi] +
        static_cast<int>(lex.frame_role_lists_[lex.verb_frame_[vi].v].size());
  lex.pair_cand_.resize(lex.pair_offset_.back());

  for (const auto& [key, noun_list] : candidate_lists) {
    const auto& [vname, rname] = key;
    VerbId v{lookup_or_fail(lex.verb_lookup_, vname, "verb")};
    RoleId r{lookup_or_fail(lex.role_lookup_, rname, "role")};
    int pos = lex.role_position(v, r);
    if (pos < 0)
      throw DataError("candidate list for verb '" + vname + "': role '" + rname +
                      "' is not in its frame");
    auto& cands = lex.pair_cand_[lex.pair_index(v, pos)];
    for (const auto& nname : noun_list) {
      if (nname == kNullNounToken) continue;
      cands.push_back(NounId{lookup_or_fail(lex.noun_lookup_, nname, "noun")});
    }
  }
  for (auto& cands : lex.pair_cand_) {
    cands.push_back(kNullNoun);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  }

  lex.triple_offset_.assign(lex.pair_cand_.size() + 1, 0);
  for (std::size_t i = 0; i < lex.pair_cand_.size(); ++i)
    lex.triple_offset_[i + 1] = lex.triple_offset_[i] + static_cast<int>(lex.pair_cand_[i].size());

  return lex;
}

Lexicon parse_lexicon(std::string_view content, std::string_view path_for_errors) {
  std::vector<std::string> nouns;
  std::vector<std::vector<std::string>> glosses;
  std::set<std::string> role_set;
  std::vector<std::pair<std::string, std::vector<std::string>>> frames;
  std::vector<std::tuple<std::string, std::string, std::string>> verbs;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> cand_lists;

  for (auto line : io::read_record_lines(content, kLexiconMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    std::string_view kind = fields[0];
    if (kind == "noun") {
      if (fields.size() != 3) throw DataError("bad noun record: " + std::string(line));
      nouns.emplace_back(fields[1]);
      std::vector<std::string> gs;
      for (auto g : io::split(fields[2], '|'))
        if (!g.empty()) gs.emplace_back(g);
      glosses.push_back(std::move(gs));
    } else if (kind == "frame") {
      if (fields.size() < 3) throw DataError("bad frame record: " + std::string(line));
      std::vector<std::string> rs;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        rs.emplace_back(fields[i]);
        role_set.insert(std::string(fields[i]));
      }
      frames.emplace_back(std::string(fields[1]), std::move(rs));
    } else if (kind == "verb") {
      if (fields.size() != 4) throw DataError("bad verb record: " + std::string(line));
      verbs.emplace_back(std::string(fields[1]), std::string(fields[2]), std::string(fields[3]));
    } else if (kind == "cand") {
      if (fields.size() < 3) throw DataError("bad cand record: " + std::string(line));
      auto& list = cand_lists[{std::string(fields[1]), std::string(fields[2])}];
      for (std::size_t i = 3; i < fields.size(); ++i) list.emplace_back(fields[i]);
    } else {
      throw DataError("unknown record type '" + std::string(kind) + "' in " +
                      std::string(path_for_errors));
    }
  }
  return Lexicon::build(std::move(nouns), std::move(glosses),
                        std::vector<std::string>(role_set.begin(), role_set.end()),
                        std::move(frames), std::move(verbs), std::move(cand_lists));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(io::read_file(path), path.string());
}

std::string serialize_lexicon(const Lexicon& lex) {
  std::ostringstream out;
  out << kLexiconMagic << " v1\n";
  for (int n = 1; n < lex.noun_count(); ++n) {
    out << "noun\t" << lex.noun_name(NounId{n}) << '\t';
    auto gs = lex.glosses(NounId{n});
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (i) out << '|';
      out << gs[i];
    }
    out << '\n';
  }
  for (int f = 0; f < lex.frame_count(); ++f) {
    out << "frame\t" << lex.frame_name(FrameId{f});
    for (RoleId r : lex.frame_roles(FrameId{f})) out << '\t' << lex.role_name(r);
    out << '\n';
  }
  for (int v = 0; v < lex.verb_count(); ++v)
    out << "verb\t" << lex.verb_name(VerbId{v}) << '\t' << lex.frame_name(lex.frame_of(VerbId{v}))
        << '\t' << lex.verb_template(VerbId{v}) << '\n';
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    auto roles = lex.verb_roles(verb);
    for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
      out << "cand\t" << lex.verb_name(verb) << '\t' << lex.role_name(roles[pos]);
      for (NounId n : lex.candidates(verb, pos)) out << '\t' << lex.noun_name(n);
      out << '\n';
    }
  }
  return std::move(out).str();
}

std::vector<std::string> validate_situation(const Lexicon& lex, const Situation& s) {
  std::vector<std::string> violations;
  if (!s.verb.valid() || s.verb.v >= lex.verb_count()) {
    violations.push_back("unknown verb id");
    return violations;
  }
  auto roles = lex.verb_roles(s.verb);
  std::string missing;
  for (RoleId r : roles) {
    if (!s.frame.has(r)) {
      if (!missing.empty()) missing += ", ";
      missing += lex.role_name(r);
    }
  }
  if (!missing.empty()) violations.push_back("missing roles: " + missing);
  for (auto [role, noun] : s.frame.assignments()) {
    if (lex.role_position(s.verb, role) < 0)
      violations.push_back("role '" + lex.role_name(role) + "' is not in the frame of verb '" +
                           lex.verb_name(s.verb) + "'");
    if (!noun.valid() || noun.v >= lex.noun_count())
      violations.push_back("unknown noun id in role '" + lex.role_name(role) + "'");
  }
  return violations;
}

SituationSpaceSize situation_space_size(const Lexicon& lex) {
  SituationSpaceSize out;
  out.per_verb.resize(lex.verb_count(), 0);
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    std::int64_t count = 1;
    int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos)
      count *= static_cast<std::int64_t>(lex.candidates(verb, pos).size());
    out.per_verb[v] = count;
    out.total += count;
  }
  return out;
}

std::string format_situation(const Lexicon& lex, const Situation& s) {
  std::string out = lex.verb_name(s.verb);
  for (auto [role, noun] : s.frame.assignments()) {
    out += ' ';
    out += lex.role_name(role);
    out += ':';
    out += lex.noun_name(noun);
  }
  return out;
}

}  // namespace sitrec
