#ifndef DSRE_EMBEDDINGS_H_
#define DSRE_EMBEDDINGS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dsre/common.h"
#include "dsre/corpus.h"
#include "dsre/triplets.h"

namespace dsre {

using Vector = std::vector<double>;

inline constexpr std::size_t kDefaultWordDim = 128;
inline constexpr std::size_t kDefaultCuiDim = 1000;

// Dense key -> vector store; every row has the same dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const std::vector<std::string>& keys() const { return keys_; }

  // Replaces the row when the key exists. Throws on dimension mismatch.
  void set(const std::string& key, std::span<const double> values);
  bool contains(std::string_view key) const { return index_.count(std::string(key)) > 0; }
  std::optional<std::span<const double>> find(std::string_view key) const;
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  // "<count> <dim>" header, then "<key> <f1> ... <fdim>" per row.
  std::string serialize() const;
  static EmbeddingTable parse(std::string_view text, const std::string& origin = "<memory>");

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

using WordEmbeddingTable = EmbeddingTable;

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path);

struct SkipGramOptions {
  std::size_t dim = kDefaultWordDim;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
};

// Skip-gram with negative sampling over corpus sentences (titles and
// headings included), unigram^0.75 noise, linearly decayed learning rate.
// Single-threaded and deterministic for a seed. epochs == 0 returns the
// seeded initialization.
WordEmbeddingTable train_skipgram(const std::vector<Tokens>& sentences, const SkipGramOptions& options);
WordEmbeddingTable train_skipgram(const CorpusStore& corpus, const SkipGramOptions& options);

// CUI vectors with the hypernym fallback ladder: exact row, else the closest
// covered ancestor (breadth-first, smallest cui on ties), else the mean of all
// stored rows. Lookups are memoized and safe to call concurrently.
class CuiEmbeddingTable {
 public:
  CuiEmbeddingTable() = default;
  CuiEmbeddingTable(EmbeddingTable table, HierarchyEdges hierarchy);
  CuiEmbeddingTable(const CuiEmbeddingTable& other);
  CuiEmbeddingTable& operator=(const CuiEmbeddingTable& other);

  std::size_t dim() const { return table_.dim(); }
  const EmbeddingTable& table() const { return table_; }
  const Vector& global_mean() const { return global_mean_; }

  // Adds or replaces a row; clears the fallback cache and refreshes the mean.
  void set(const std::string& cui, std::span<const double> values);

  Vector lookup(std::string_view cui) const;

  // Which rung of the ladder answers `cui`: the cui itself, an ancestor, or
  // nullopt for the global mean.
  std::optional<std::string> resolve(std::string_view cui) const;

 private:
  void recompute_mean();
  std::optional<std::string> resolve_uncached(const std::string& cui) const;

  EmbeddingTable table_;
  std::unordered_map<std::string, std::vector<std::string>> parents_;
  Vector global_mean_;
  mutable std::unique_ptr<std::shared_mutex> mu_ = std::make_unique<std::shared_mutex>();
  mutable std::unordered_map<std::string, std::optional<std::string>> cache_;
};

inline Vector cui_embedding(std::string_view cui, const CuiEmbeddingTable& table) { return table.lookup(cui); }

CuiEmbeddingTable load_cui_embeddings(const std::filesystem::path& path, HierarchyEdges hierarchy = {});

}  // namespace dsre

#endif  // DSRE_EMBEDDINGS_H_
