#include "dsre/lexicon.h"

#include <algorithm>
#include <set>

#include "dsre/corpus.h"

namespace dsre {

const std::vector<std::string>& known_semantic_groups() {
  static const std::vector<std::string> groups = {"ACTI", "ANAT", "CHEM", "CONC", "DEVI",
                                                  "DISO", "GENE", "GEOG", "LIVB", "OBJC",
                                                  "OCCU", "ORGA", "PHEN", "PHYS", "PROC"};
  return groups;
}

bool is_known_semantic_group(std::string_view group) {
  const auto& g = known_semantic_groups();
  return std::find(g.begin(), g.end(), group) != g.end();
}

Lexicon::Lexicon(std::vector<Concept> concepts) : concepts_(std::move(concepts)) {
  nodes_.emplace_back();
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const Concept& c = concepts_[i];
    if (!by_cui_.emplace(c.cui, i).second) throw ValidationError("duplicate cui " + c.cui);
    if (!is_known_semantic_group(c.semantic_group))
      throw ValidationError("unknown semantic group \"" + c.semantic_group + "\" for " + c.cui);
  }
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    for (const Tokens& term : terms_of(concepts_[i].cui)) add_term(term, i);
  }
}

const Concept* Lexicon::find(std::string_view cui) const {
  auto it = by_cui_.find(std::string(cui));
  return it == by_cui_.end() ? nullptr : &concepts_[it->second];
}

const Concept& Lexicon::at(std::string_view cui) const {
  const Concept* c = find(cui);
  if (!c) throw ValidationError("cui " + std::string(cui) + " not in lexicon");
  return *c;
}

std::vector<Tokens> Lexicon::terms_of(std::string_view cui) const {
  const Concept& c = at(cui);
  std::vector<Tokens> out;
  auto push = [&](const std::string& s) {
    Tokens t = tokenize(s);
    if (!t.empty() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  };
  push(c.preferred_name);
  for (const auto& s : c.synonyms) push(s);
  return out;
}

std::vector<const Concept*> Lexicon::concepts_in_group(std::string_view group) const {
  std::vector<const Concept*> out;
  for (const auto& c : concepts_)
    if (c.semantic_group == group) out.push_back(&c);
  return out;
}

std::optional<std::uint32_t> Lexicon::child(std::uint32_t node, std::uint32_t token) const {
  const auto& ch = nodes_[node].children;
  auto it = std::lower_bound(ch.begin(), ch.end(), std::make_pair(token, std::uint32_t{0}));
  if (it == ch.end() || it->first != token) return std::nullopt;
  return it->second;
}

void Lexicon::add_term(const Tokens& term, std::size_t concept_index) {
  std::uint32_t node = 0;
  for (const auto& tok : term) {
    auto [it, inserted] = token_ids_.emplace(tok, static_cast<std::uint32_t>(token_ids_.size()));
    std::uint32_t id = it->second;
    if (auto next = child(node, id)) {
      node = *next;
      continue;
    }
    auto fresh = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    auto& ch = nodes_[node].children;
    ch.insert(std::lower_bound(ch.begin(), ch.end(), std::make_pair(id, std::uint32_t{0})), {id, fresh});
    node = fresh;
  }
  auto& slot = nodes_[node].concept_index;
  if (slot < 0 || concepts_[concept_index].cui < concepts_[static_cast<std::size_t>(slot)].cui)
    slot = static_cast<std::int32_t>(concept_index);
  max_term_len_ = std::max(max_term_len_, term.size());
}

std::vector<Mention> Lexicon::find_mentions(const Tokens& sentence) const {
  std::vector<Mention> out;
  if (nodes_.empty()) return out;
  std::vector<std::int64_t> ids(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    auto it = token_ids_.find(sentence[i]);
    if (it == token_ids_.end()) {
      it = token_ids_.find(to_lower_ascii(sentence[i]));
    }
    ids[i] = it == token_ids_.end() ? -1 : it->second;
  }
  std::size_t i = 0;
  while (i < sentence.size()) {
    std::uint32_t node = 0;
    std::size_t best_end = 0;
    std::int32_t best = -1;
    for (std::size_t j = i; j < sentence.size() && ids[j] >= 0; ++j) {
      auto next = child(node, static_cast<std::uint32_t>(ids[j]));
      if (!next) break;
      node = *next;
      if (nodes_[node].concept_index >= 0) {
        best = nodes_[node].concept_index;
        best_end = j + 1;
      }
    }
    if (best >= 0) {
      out.push_back({concepts_[static_cast<std::size_t>(best)].cui, {i, best_end}});
      i = best_end;
    } else {
      ++i;
    }
  }
  return out;
}

Lexicon parse_lexicon(std::string_view tsv, const std::string& origin) {
  std::vector<Concept> concepts;
  std::set<std::string> seen;
  std::size_t pos = 0, line_no = 0;
  bool header = false;
  while (pos < tsv.size()) {
    std::size_t nl = tsv.find('\n', pos);
    if (nl == std::string_view::npos) nl = tsv.size();
    std::string_view line = tsv.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_tabs(line);
    if (!header) {
      if (cols.size() < 5 || cols[0] != "cui") throw ParseError(origin, line_no, "missing lexicon header row");
      header = true;
      continue;
    }
    if (cols.size() < 4 || cols.size() > 5) throw ParseError(origin, line_no, "expected 5 tab-separated columns");
    Concept c;
    c.cui = trim(cols[0]);
    c.preferred_name = trim(cols[1]);
    c.semantic_type = trim(cols[2]);
    c.semantic_group = trim(cols[3]);
    if (cols.size() == 5) {
      std::string_view syn = cols[4];
      std::size_t p = 0;
      while (p <= syn.size()) {
        std::size_t bar = syn.find('|', p);
        if (bar == std::string_view::npos) bar = syn.size();
        std::string s = trim(syn.substr(p, bar - p));
        if (!s.empty()) c.synonyms.push_back(std::move(s));
        p = bar + 1;
      }
    }
    if (c.cui.empty()) throw ParseError(origin, line_no, "empty cui");
    if (!seen.insert(c.cui).second) throw ParseError(origin, line_no, "duplicate cui " + c.cui);
    if (!is_known_semantic_group(c.semantic_group))
      throw ParseError(origin, line_no, "unknown semantic group \"" + c.semantic_group + "\"");
    concepts.push_back(std::move(c));
  }
  return Lexicon(std::move(concepts));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path), path.string());
}

std::string serialize_lexicon(const Lexicon& lexicon) {
  std::string out = "cui\tpreferred_name\tsemantic_type\tsemantic_group\tsynonyms\n";
  for (const auto& c : lexicon.concepts()) {
    out += c.cui + '\t' + c.preferred_name + '\t' + c.semantic_type + '\t' + c.semantic_group + '\t';
    for (std::size_t i = 0; i < c.synonyms.size(); ++i) {
      if (i) out += '|';
      out += c.synonyms[i];
    }
    out += '\n';
  }
  return out;
}

}  // namespace dsre
