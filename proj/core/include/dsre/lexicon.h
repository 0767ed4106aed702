#ifndef DSRE_LEXICON_H_
#define DSRE_LEXICON_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dsre/common.h"

namespace dsre {

// UMLS semantic groups.
const std::vector<std::string>& known_semantic_groups();
bool is_known_semantic_group(std::string_view group);

struct Concept {
  std::string cui;
  std::string preferred_name;
  std::vector<std::string> synonyms;
  std::string semantic_type;
  std::string semantic_group;
};

struct Mention {
  std::string cui;
  Span token_span;

  friend bool operator==(const Mention&, const Mention&) = default;
};

// Concept dictionary plus a compiled token trie over every tokenized term.
// Immutable once built, so concurrent find_mentions calls are safe.
class Lexicon {
 public:
  Lexicon() = default;
  // Throws ValidationError on a duplicate cui or an unknown semantic group.
  explicit Lexicon(std::vector<Concept> concepts);

  const std::vector<Concept>& concepts() const { return concepts_; }
  std::size_t size() const { return concepts_.size(); }
  bool empty() const { return concepts_.empty(); }

  const Concept* find(std::string_view cui) const;
  const Concept& at(std::string_view cui) const;

  // Every distinct tokenized term of a concept, preferred name first.
  std::vector<Tokens> terms_of(std::string_view cui) const;

  // Concepts of a semantic group in load order.
  std::vector<const Concept*> concepts_in_group(std::string_view group) const;

  // Leftmost-longest non-overlapping matches, sorted by start. When several
  // concepts share the longest term the smallest cui wins.
  std::vector<Mention> find_mentions(const Tokens& sentence) const;

  std::size_t max_term_tokens() const { return max_term_len_; }

 private:
  struct Node {
    // Sorted by token id for binary search.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> children;
    std::int32_t concept_index = -1;
  };

  void add_term(const Tokens& term, std::size_t concept_index);
  std::optional<std::uint32_t> child(std::uint32_t node, std::uint32_t token) const;

  std::vector<Concept> concepts_;
  std::unordered_map<std::string, std::size_t> by_cui_;
  std::unordered_map<std::string, std::uint32_t> token_ids_;
  std::vector<Node> nodes_;
  std::size_t max_term_len_ = 0;
};

inline std::vector<Mention> find_mentions(const Tokens& sentence, const Lexicon& lexicon) {
  return lexicon.find_mentions(sentence);
}

// TSV with header: cui, preferred_name, semantic_type, semantic_group,
// synonyms (pipe-separated).
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view tsv, const std::string& origin = "<memory>");
std::string serialize_lexicon(const Lexicon& lexicon);

}  // namespace dsre

#endif  // DSRE_LEXICON_H_
