#ifndef DSRE_TRIPLETS_H_
#define DSRE_TRIPLETS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dsre/common.h"
#include "dsre/lexicon.h"

namespace dsre {

inline constexpr std::string_view kNegativeLabel = "NA";

struct RelationLabel {
  std::string id;
  bool directed = false;
  std::string head_group;
  std::string tail_group;
  std::optional<std::string> inverse_of;
};

// Relation labels with NA fixed at index 0. Indices double as classifier
// output positions.
class RelationSchema {
 public:
  RelationSchema();
  // Throws ValidationError on duplicate ids, unknown groups, asymmetric
  // inverses or an undirected label with an inverse. NA may be listed once;
  // it is always placed first.
  explicit RelationSchema(std::vector<RelationLabel> labels);

  // JSON: {"relations": [{"id", "directed", "head_group", "tail_group",
  // "inverse_of"?}, ...]}
  static RelationSchema from_json(std::string_view text);
  std::string to_json() const;

  const std::vector<RelationLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t require(std::string_view id) const;
  const RelationLabel& label(std::string_view id) const { return labels_[require(id)]; }
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  // Every semantic group used by a non-NA slot.
  std::set<std::string> slot_groups() const;
  // True when (head_group, tail_group) is allowed for the label. Undirected
  // labels accept either orientation.
  bool slots_allow(std::string_view label, std::string_view head_group, std::string_view tail_group) const;

 private:
  std::vector<RelationLabel> labels_;
};

struct Triplet {
  std::string head_cui;
  std::string relation;
  std::string tail_cui;
  std::string source;

  bool same_key(const Triplet& o) const {
    return head_cui == o.head_cui && relation == o.relation && tail_cui == o.tail_cui;
  }
};

// Deduplicated on (head, relation, tail); keeps first-insertion order and the
// first source seen.
class TripletStore {
 public:
  bool insert(Triplet t);
  bool contains(std::string_view head, std::string_view relation, std::string_view tail) const;
  const std::vector<Triplet>& triplets() const { return triplets_; }
  std::size_t size() const { return triplets_.size(); }
  bool empty() const { return triplets_.empty(); }

  std::string serialize_tsv() const;

 private:
  static std::string key(std::string_view h, std::string_view r, std::string_view t);
  std::vector<Triplet> triplets_;
  std::unordered_set<std::string> keys_;
};

// TSV with header: head_cui, relation, tail_cui, source. Unknown labels and
// the reserved NA label throw; self-loops are skipped with a warning.
TripletStore parse_triplets(std::string_view tsv, const RelationSchema& schema,
                            std::vector<std::string>* warnings = nullptr,
                            const std::string& origin = "<memory>");
TripletStore load_triplets(const std::filesystem::path& path, const RelationSchema& schema,
                           std::vector<std::string>* warnings = nullptr);

using HierarchyEdges = std::vector<std::pair<std::string, std::string>>;  // (child, parent)

// TSV with header: child_cui, parent_cui.
HierarchyEdges parse_hierarchy(std::string_view tsv, const std::string& origin = "<memory>");
HierarchyEdges load_hierarchy(const std::filesystem::path& path);

// Throws ValidationError naming one cycle when the edges are not acyclic.
void check_acyclic(const HierarchyEdges& hierarchy);

// Adds (D, relation, A') for every (D, relation, A) and every A' reachable
// from A through parent edges. Input triplets are kept.
TripletStore extend_by_hierarchy(const TripletStore& triplets, std::string_view relation,
                                 const HierarchyEdges& hierarchy);

// Removes triplets whose slot groups the schema rejects or whose head/tail
// carries a banned semantic type.
TripletStore filter_by_schema(const TripletStore& triplets, const RelationSchema& schema,
                              const Lexicon& lexicon, const std::set<std::string>& banned_semantic_types);

struct SemiStructuredSection {
  std::string heading;
  std::vector<std::string> list_entries;
};

struct SemiStructuredPage {
  std::string title;
  std::vector<SemiStructuredSection> sections;
};

// Case-insensitive heading match, either exact or prefix.
struct HeadingRule {
  std::string pattern;
  bool prefix = false;
  std::string relation;

  bool matches(std::string_view heading) const;
};

inline constexpr std::size_t kDefaultMaxEntryTokens = 15;

// Head is the first lexicon mention in the page title; each entry of a
// mapped section (at most max_entry_tokens tokens) contributes every mention
// in it as a tail. A page without a head mention yields nothing and a
// diagnostic.
std::vector<Triplet> extract_from_semistructured(const SemiStructuredPage& page,
                                                 const std::vector<HeadingRule>& heading_to_relation,
                                                 const Lexicon& lexicon,
                                                 std::size_t max_entry_tokens = kDefaultMaxEntryTokens,
                                                 std::vector<std::string>* diagnostics = nullptr);

// JSONL, one page per line: {"title", "sections": [{"heading", "entries"}]}.
std::vector<SemiStructuredPage> parse_pages(std::string_view jsonl, const std::string& origin = "<memory>");

std::vector<HeadingRule> heading_rules_from_json(std::string_view text);

}  // namespace dsre

#endif  // DSRE_TRIPLETS_H_
