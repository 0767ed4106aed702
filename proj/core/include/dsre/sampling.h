#ifndef DSRE_SAMPLING_H_
#define DSRE_SAMPLING_H_

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dsre/common.h"
#include "dsre/corpus.h"
#include "dsre/embeddings.h"
#include "dsre/lexicon.h"
#include "dsre/triplets.h"

namespace dsre {

enum class Distance { kShort, kLong };

// One entity occurrence inside an instance. For long-distance instances the
// first entity lives in the title and `span` indexes title_tokens.
struct EntityRef {
  std::string cui;
  Span span;
  bool in_title = false;

  friend bool operator==(const EntityRef&, const EntityRef&) = default;
};

struct Decomposition {
  Tokens head;
  Tokens e1;
  Tokens middle;
  Tokens e2;
  Tokens tail;

  Tokens concat() const;
  friend bool operator==(const Decomposition&, const Decomposition&) = default;
};

struct Instance {
  std::string doc_id;
  std::size_t section = 0;
  std::size_t sentence = 0;
  Tokens title_tokens;
  Tokens heading_tokens;
  Tokens sentence_tokens;
  EntityRef e1;  // surface-first entity (the title entity when long)
  EntityRef e2;
  Distance distance = Distance::kShort;
  Decomposition decomposition;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Bag {
  std::string head_cui;
  std::string tail_cui;
  std::string label;
  std::vector<Instance> instances;

  friend bool operator==(const Bag&, const Bag&) = default;
};

enum class NegativeKind { kType1, kType2, kMix };
enum class Split { kTrain, kTest };

std::string_view to_string(NegativeKind kind);
NegativeKind parse_negative_kind(std::string_view s);
std::string_view to_string(Split split);

struct Dataset {
  std::vector<Bag> bags;
  std::vector<Split> split;  // parallel to bags
  NegativeKind negative_kind = NegativeKind::kType1;
  std::uint64_t seed = 0;
  double split_fraction = 0.8;

  std::vector<std::size_t> indices(Split s) const;
};

// Splits a sentence into (head, e1, middle, e2, tail) around two
// non-overlapping spans; the earlier span takes the E1 position.
Decomposition decompose(const Tokens& sentence, Span a, Span b);

// Decomposition of an instance: in-sentence for short distance; for long
// distance head is empty and e1 holds the title entity tokens.
Decomposition decomposition_of(const Instance& instance);

// Nearest pair between two mention lists (smallest token gap, then leftmost).
// Returns false when either list is empty.
bool nearest_pair(const std::vector<Span>& a, const std::vector<Span>& b, Span* best_a, Span* best_b);

struct SentenceMentions {
  std::vector<std::vector<Mention>> sentences;  // flattened corpus order
  std::vector<std::vector<Mention>> titles;     // per document
};

// Runs the matcher over every title and sentence of the corpus.
SentenceMentions index_mentions(const CorpusStore& corpus, const Lexicon& lexicon, int threads = 1);

// Distant supervision: one short-distance instance per (triplet, sentence)
// mentioning both cuis, one long-distance instance per (triplet, sentence)
// where the title mentions one cui and the sentence only the other. Directed
// labels seen tail-before-head go to the inverse label's bag when declared;
// undirected bags use the lexicographically ordered pair.
std::vector<Bag> generate_positive_bags(const CorpusStore& corpus, const Lexicon& lexicon,
                                        const TripletStore& triplets, const RelationSchema& schema,
                                        int threads = 1);
std::vector<Bag> generate_positive_bags(const CorpusStore& corpus, const SentenceMentions& mentions,
                                        const TripletStore& triplets, const RelationSchema& schema);

inline std::string group_mask_token(std::string_view group) { return "[GRP:" + std::string(group) + "]"; }
inline constexpr std::string_view kSepToken = "[SEP]";

struct MaskedInstance {
  Tokens title;
  Tokens sentence;
  Tokens headings;

  // concat(title, sentence, [SEP], headings)
  Tokens sequence() const;
};

// Replaces each entity span by one "[GRP:<group>]" token.
MaskedInstance mask_instance(const Instance& instance, const Lexicon& lexicon);

// Sentences with at least two distinct irrelevant-group concepts yield NA
// instances (nearest pair), grouped by unordered cui pair and uniformly
// subsampled to pool_size bags.
std::vector<Bag> build_negative_pool(const CorpusStore& corpus, const Lexicon& lexicon, const RelationSchema& schema,
                                     const std::set<std::string>& irrelevant_groups, std::size_t pool_size,
                                     std::uint64_t seed, std::vector<std::string>* warnings = nullptr,
                                     int threads = 1);
std::vector<Bag> build_negative_pool(const CorpusStore& corpus, const SentenceMentions& mentions,
                                     const Lexicon& lexicon, const RelationSchema& schema,
                                     const std::set<std::string>& irrelevant_groups, std::size_t pool_size,
                                     std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

// Where each synthesized negative instance came from.
struct Type1Provenance {
  std::size_t negative_bag;
  std::size_t negative_instance;
  std::size_t positive_bag;
  std::size_t positive_instance;
  std::size_t donor_bag;
  std::size_t donor_instance;
};

// One negative per positive instance: the positive's head/tail text around
// a donor's middle text, with both entities swapped for random concepts of
// the same semantic groups. Grouped into one NA bag per replaced pair.
std::vector<Bag> generate_type1_negatives(const std::vector<Bag>& positives, const std::vector<Bag>& pool,
                                          const Lexicon& lexicon, const RelationSchema& schema,
                                          std::uint64_t seed, std::vector<Type1Provenance>* provenance = nullptr);

// Mean of the in-vocabulary token vectors; zero vector when none.
Vector sentence_embedding(const Tokens& tokens, const WordEmbeddingTable& word_table);
// Mean of the instance sentence embeddings (unmasked sentence tokens).
Vector bag_embedding(const Bag& bag, const WordEmbeddingTable& word_table);
// <u,v> / (|u| |v|); 0 when either norm is 0. Throws on dimension mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Scores every pool bag by its best cosine similarity to any positive bag.
std::vector<double> type2_scores(const std::vector<Bag>& pool, const std::vector<Bag>& positives,
                                 const WordEmbeddingTable& word_table, int threads = 1);

// Top-k pool bags by score, ties in pool order.
std::vector<Bag> select_type2_negatives(const std::vector<Bag>& pool, const std::vector<Bag>& positives,
                                        std::size_t k, const WordEmbeddingTable& word_table,
                                        std::vector<std::string>* warnings = nullptr, int threads = 1);

// Draws negatives for a roughly 1:1 ratio and splits at the unordered
// entity-pair level so that no pair spans both splits.
Dataset assemble_datasets(const std::vector<Bag>& positives, const std::vector<Bag>& type1_negatives,
                          const std::vector<Bag>& type2_negatives, NegativeKind kind, double split_fraction,
                          std::uint64_t seed);

// Unordered (sorted) cui pair key.
std::string pair_key(std::string_view a, std::string_view b);

// JSONL interchange; see dataset_io.cc for the field layout.
inline constexpr int kDatasetFormatVersion = 1;
std::string serialize_bags(const std::vector<Bag>& bags);
std::vector<Bag> parse_bags(std::string_view jsonl, const std::string& origin = "<memory>");
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view jsonl, const std::string& origin = "<memory>");

}  // namespace dsre

#endif  // DSRE_SAMPLING_H_
