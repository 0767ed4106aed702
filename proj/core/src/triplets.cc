#include "dsre/triplets.h"

#include <algorithm>
#include <map>

#include "dsre/corpus.h"
#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    fn(line_no, line);
  }
}

}  // namespace

RelationSchema::RelationSchema() : labels_{{std::string(kNegativeLabel), false, "", "", std::nullopt}} {}

RelationSchema::RelationSchema(std::vector<RelationLabel> labels) : RelationSchema() {
  std::size_t na_seen = 0;
  for (auto& l : labels) {
    if (l.id == kNegativeLabel) {
      if (++na_seen > 1) throw ValidationError("NA listed more than once");
      continue;
    }
    if (l.id.empty()) throw ValidationError("relation with empty id");
    if (index_of(l.id)) throw ValidationError("duplicate relation " + l.id);
    if (!is_known_semantic_group(l.head_group) || !is_known_semantic_group(l.tail_group))
      throw ValidationError("relation " + l.id + " has an unknown slot group");
    if (!l.directed && l.inverse_of) throw ValidationError("undirected relation " + l.id + " declares an inverse");
    labels_.push_back(std::move(l));
  }
  for (const auto& l : labels_) {
    if (!l.inverse_of) continue;
    auto inv = index_of(*l.inverse_of);
    if (!inv) throw ValidationError("inverse " + *l.inverse_of + " of " + l.id + " is not a label");
    const auto& other = labels_[*inv];
    if (!other.inverse_of || *other.inverse_of != l.id)
      throw ValidationError("inverse_of must be symmetric: " + l.id + " <-> " + other.id);
    if (other.head_group != l.tail_group || other.tail_group != l.head_group)
      throw ValidationError("inverse pair " + l.id + "/" + other.id + " must swap slot groups");
  }
}

RelationSchema RelationSchema::from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("relations") || !j["relations"].is_array())
    throw ValidationError("schema: expected {\"relations\": [...]}");
  std::vector<RelationLabel> labels;
  for (const auto& r : j["relations"]) {
    RelationLabel l;
    try {
      l.id = r.at("id").get<std::string>();
      if (l.id != kNegativeLabel) {
        l.directed = r.value("directed", false);
        l.head_group = r.at("head_group").get<std::string>();
        l.tail_group = r.at("tail_group").get<std::string>();
        if (r.contains("inverse_of") && !r["inverse_of"].is_null()) l.inverse_of = r["inverse_of"].get<std::string>();
      }
    } catch (const json::exception& e) {
      throw ValidationError(std::string("schema.relations: ") + e.what());
    }
    labels.push_back(std::move(l));
  }
  return RelationSchema(std::move(labels));
}

std::string RelationSchema::to_json() const {
  json rel = json::array();
  for (std::size_t i = 1; i < labels_.size(); ++i) {
    const auto& l = labels_[i];
    json r = {{"id", l.id}, {"directed", l.directed}, {"head_group", l.head_group}, {"tail_group", l.tail_group}};
    if (l.inverse_of) r["inverse_of"] = *l.inverse_of;
    rel.push_back(r);
  }
  return json{{"relations", rel}}.dump(2);
}

std::optional<std::size_t> RelationSchema::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].id == id) return i;
  return std::nullopt;
}

std::size_t RelationSchema::require(std::string_view id) const {
  auto i = index_of(id);
  if (!i) throw ValidationError("unknown relation label \"" + std::string(id) + "\"");
  return *i;
}

std::set<std::string> RelationSchema::slot_groups() const {
  std::set<std::string> out;
  for (std::size_t i = 1; i < labels_.size(); ++i) {
    out.insert(labels_[i].head_group);
    out.insert(labels_[i].tail_group);
  }
  return out;
}

bool RelationSchema::slots_allow(std::string_view label, std::string_view head_group,
                                 std::string_view tail_group) const {
  const auto& l = labels_[require(label)];
  if (l.id == kNegativeLabel) return true;
  if (l.head_group == head_group && l.tail_group == tail_group) return true;
  return !l.directed && l.head_group == tail_group && l.tail_group == head_group;
}

std::string TripletStore::key(std::string_view h, std::string_view r, std::string_view t) {
  std::string k;
  k.reserve(h.size() + r.size() + t.size() + 2);
  k.append(h).append(1, '\t').append(r).append(1, '\t').append(t);
  return k;
}

bool TripletStore::insert(Triplet t) {
  if (!keys_.insert(key(t.head_cui, t.relation, t.tail_cui)).second) return false;
  triplets_.push_back(std::move(t));
  return true;
}

bool TripletStore::contains(std::string_view head, std::string_view relation, std::string_view tail) const {
  return keys_.count(key(head, relation, tail)) > 0;
}

std::string TripletStore::serialize_tsv() const {
  std::string out = "head_cui\trelation\ttail_cui\tsource\n";
  for (const auto& t : triplets_) out += t.head_cui + '\t' + t.relation + '\t' + t.tail_cui + '\t' + t.source + '\n';
  return out;
}

TripletStore parse_triplets(std::string_view tsv, const RelationSchema& schema, std::vector<std::string>* warnings,
                            const std::string& origin) {
  TripletStore store;
  bool header = false;
  for_each_line(tsv, [&](std::size_t line_no, std::string_view line) {
    auto cols = split_tabs(line);
    if (!header) {
      if (cols.empty() || trim(cols[0]) != "head_cui") throw ParseError(origin, line_no, "missing triplet header row");
      header = true;
      return;
    }
    if (cols.size() < 3) throw ParseError(origin, line_no, "expected head_cui, relation, tail_cui, source");
    Triplet t{trim(cols[0]), trim(cols[1]), trim(cols[2]), cols.size() > 3 ? trim(cols[3]) : std::string()};
    if (t.relation == kNegativeLabel) throw ParseError(origin, line_no, "label NA is reserved for negatives");
    if (!schema.contains(t.relation)) throw ParseError(origin, line_no, "unknown relation label \"" + t.relation + "\"");
    if (t.head_cui == t.tail_cui) {
      if (warnings) warnings->push_back(origin + ":" + std::to_string(line_no) + ": self-loop on " + t.head_cui + " skipped");
      return;
    }
    store.insert(std::move(t));
  });
  return store;
}

TripletStore load_triplets(const std::filesystem::path& path, const RelationSchema& schema,
                           std::vector<std::string>* warnings) {
  return parse_triplets(read_file(path), schema, warnings, path.string());
}

HierarchyEdges parse_hierarchy(std::string_view tsv, const std::string& origin) {
  HierarchyEdges edges;
  bool header = false;
  for_each_line(tsv, [&](std::size_t line_no, std::string_view line) {
    auto cols = split_tabs(line);
    if (!header) {
      if (cols.empty() || trim(cols[0]) != "child_cui") throw ParseError(origin, line_no, "missing hierarchy header row");
      header = true;
      return;
    }
    if (cols.size() < 2) throw ParseError(origin, line_no, "expected child_cui, parent_cui");
    edges.emplace_back(trim(cols[0]), trim(cols[1]));
  });
  return edges;
}

HierarchyEdges load_hierarchy(const std::filesystem::path& path) {
  return parse_hierarchy(read_file(path), path.string());
}

namespace {

using Adjacency = std::map<std::string, std::vector<std::string>>;

Adjacency parents_of(const HierarchyEdges& hierarchy) {
  Adjacency adj;
  for (const auto& [child, parent] : hierarchy) adj[child].push_back(parent);
  for (auto& [_, ps] : adj) {
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  }
  return adj;
}

}  // namespace

void check_acyclic(const HierarchyEdges& hierarchy) {
  Adjacency adj = parents_of(hierarchy);
  enum class Color { kWhite, kGrey, kBlack };
  std::map<std::string, Color> color;
  for (const auto& [node, _] : adj) {
    if (color[node] != Color::kWhite) continue;
    // Iterative DFS keeping the grey path for cycle reporting.
    std::vector<std::pair<std::string, std::size_t>> stack{{node, 0}};
    color[node] = Color::kGrey;
    while (!stack.empty()) {
      auto& [cur, next] = stack.back();
      auto it = adj.find(cur);
      if (it == adj.end() || next >= it->second.size()) {
        color[cur] = Color::kBlack;
        stack.pop_back();
        continue;
      }
      std::string p = it->second[next++];
      Color c = color[p];
      if (c == Color::kGrey) {
        std::string cycle;
        bool on = false;
        for (const auto& [n, _] : stack) {
          if (n == p) on = true;
          if (on) cycle += n + " -> ";
        }
        throw ValidationError("hierarchy cycle: " + cycle + p);
      }
      if (c == Color::kWhite) {
        color[p] = Color::kGrey;
        stack.emplace_back(p, 0);
      }
    }
  }
}

TripletStore extend_by_hierarchy(const TripletStore& triplets, std::string_view relation,
                                 const HierarchyEdges& hierarchy) {
  check_acyclic(hierarchy);
  Adjacency adj = parents_of(hierarchy);
  // Ancestor sets are computed once per node on demand.
  std::map<std::string, std::set<std::string>> memo;
  auto ancestors = [&](const std::string& start) -> const std::set<std::string>& {
    if (auto it = memo.find(start); it != memo.end()) return it->second;
    std::set<std::string> seen;
    std::vector<std::string> frontier{start};
    while (!frontier.empty()) {
      std::string cur = std::move(frontier.back());
      frontier.pop_back();
      auto it = adj.find(cur);
      if (it == adj.end()) continue;
      for (const auto& p : it->second) {
        if (seen.insert(p).second) frontier.push_back(p);
      }
    }
    return memo.emplace(start, std::move(seen)).first->second;
  };

  TripletStore out;
  for (const auto& t : triplets.triplets()) out.insert(t);
  for (const auto& t : triplets.triplets()) {
    if (t.relation != relation) continue;
    for (const auto& a : ancestors(t.tail_cui)) {
      if (a == t.head_cui) continue;
      out.insert({t.head_cui, t.relation, a, "hierarchy"});
    }
  }
  return out;
}

TripletStore filter_by_schema(const TripletStore& triplets, const RelationSchema& schema, const Lexicon& lexicon,
                              const std::set<std::string>& banned_semantic_types) {
  TripletStore out;
  for (const auto& t : triplets.triplets()) {
    const Concept* h = lexicon.find(t.head_cui);
    if (!h) throw ValidationError("cui " + t.head_cui + " missing from lexicon");
    const Concept* tl = lexicon.find(t.tail_cui);
    if (!tl) throw ValidationError("cui " + t.tail_cui + " missing from lexicon");
    if (banned_semantic_types.count(h->semantic_type) || banned_semantic_types.count(tl->semantic_type)) continue;
    if (!schema.slots_allow(t.relation, h->semantic_group, tl->semantic_group)) continue;
    out.insert(t);
  }
  return out;
}

bool HeadingRule::matches(std::string_view heading) const {
  std::string h = to_lower_ascii(trim(heading));
  std::string p = to_lower_ascii(trim(pattern));
  if (prefix) return h.compare(0, p.size(), p) == 0;
  return h == p;
}

std::vector<Triplet> extract_from_semistructured(const SemiStructuredPage& page,
                                                 const std::vector<HeadingRule>& heading_to_relation,
                                                 const Lexicon& lexicon, std::size_t max_entry_tokens,
                                                 std::vector<std::string>* diagnostics) {
  if (heading_to_relation.empty()) throw ValidationError("heading_to_relation is empty");
  std::vector<Triplet> out;
  auto title_mentions = lexicon.find_mentions(tokenize(page.title));
  if (title_mentions.empty()) {
    if (diagnostics) diagnostics->push_back("no head entity in page title \"" + page.title + "\"");
    return out;
  }
  const std::string& head = title_mentions.front().cui;
  for (const auto& section : page.sections) {
    auto rule = std::find_if(heading_to_relation.begin(), heading_to_relation.end(),
                             [&](const HeadingRule& r) { return r.matches(section.heading); });
    if (rule == heading_to_relation.end()) continue;
    for (const auto& entry : section.list_entries) {
      Tokens toks = tokenize(entry);
      if (toks.size() > max_entry_tokens) continue;
      for (const auto& m : lexicon.find_mentions(toks)) {
        if (m.cui == head) continue;
        Triplet t{head, rule->relation, m.cui, "semistructured:" + page.title};
        bool dup = std::any_of(out.begin(), out.end(), [&](const Triplet& o) { return o.same_key(t); });
        if (!dup) out.push_back(std::move(t));
      }
    }
  }
  return out;
}

std::vector<SemiStructuredPage> parse_pages(std::string_view jsonl, const std::string& origin) {
  std::vector<SemiStructuredPage> pages;
  for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(origin, line_no, "invalid JSON");
    try {
      SemiStructuredPage p;
      p.title = j.at("title").get<std::string>();
      for (const auto& s : j.at("sections")) {
        p.sections.push_back({s.at("heading").get<std::string>(), s.at("entries").get<std::vector<std::string>>()});
      }
      pages.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(origin, line_no, e.what());
    }
  });
  return pages;
}

std::vector<HeadingRule> heading_rules_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw ValidationError("heading rules: expected a JSON array");
  std::vector<HeadingRule> rules;
  for (const auto& r : j) {
    try {
      HeadingRule h;
      h.pattern = r.at("pattern").get<std::string>();
      std::string match = r.value("match", "exact");
      if (match != "exact" && match != "prefix") throw ValidationError("heading rule match must be exact or prefix");
      h.prefix = match == "prefix";
      h.relation = r.at("relation").get<std::string>();
      rules.push_back(std::move(h));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("heading rule: ") + e.what());
    }
  }
  return rules;
}

}  // namespace dsre
