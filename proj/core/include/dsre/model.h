#ifndef DSRE_MODEL_H_
#define DSRE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dsre/embeddings.h"
#include "dsre/lexicon.h"
#include "dsre/sampling.h"
#include "dsre/triplets.h"

namespace dsre {

enum class EncoderVariant { kBowLinear, kAvgEmbedProj, kTokenAttention };
std::string_view to_string(EncoderVariant v);
EncoderVariant parse_encoder_variant(std::string_view s);

// Which blocks of f = concat(r, c1, c2) reach the classifier. The ablations
// zero the other block of f.
enum class Fusion { kFull, kTextOnly, kCuiOnly };
std::string_view to_string(Fusion f);
Fusion parse_fusion(std::string_view s);

struct ModelConfig {
  EncoderVariant encoder = EncoderVariant::kAvgEmbedProj;
  Fusion fusion = Fusion::kFull;
  std::size_t d_e = 128;
  std::size_t d_r = 200;
  std::size_t d_k = 1000;
  std::size_t d_c = 100;
  std::size_t n_s = 10;
  std::size_t num_labels = 0;  // includes NA
  double l2 = 1e-7;
  double init_scale = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr std::string_view kUnkToken = "[UNK]";

// Token -> row id for the encoder. Ids 0.. hold [UNK], [SEP] and one
// "[GRP:<group>]" per semantic group; corpus tokens follow in sorted order.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::uint32_t id(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& t);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  bool is_bias = false;

  std::size_t size() const { return rows * cols; }
};

// All parameters in one flat buffer with named row-major views.
// `generation` changes whenever values are updated through the model API.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelConfig& config, Vocabulary vocab);

  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(std::string_view name) const;
  bool has(std::string_view name) const;

  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::uint64_t generation() const { return generation_; }
  void bump_generation() { ++generation_; }

  // Flat mask: 1 for weights (L2-penalized), 0 for biases.
  std::vector<double> weight_mask() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.vocab_ == b.vocab_ && a.values_ == b.values_;
  }

 private:
  void add_tensor(const std::string& name, std::size_t rows, std::size_t cols, bool bias);

  Vocabulary vocab_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> values_;
  std::uint64_t generation_ = 0;
};

// Uniform(-init_scale, init_scale) from config.seed. Embedding rows of tokens
// present in `word_table` (when its dimension is d_e) start from those vectors.
ModelParams init_params(const ModelConfig& config, Vocabulary vocab, const WordEmbeddingTable* word_table = nullptr);

// Vocabulary over the masked encoder sequences of the given bags.
Vocabulary build_vocabulary(const std::vector<const Bag*>& bags, const Lexicon& lexicon);

// A bag ready for the network: token ids per instance plus the two entity
// vectors.
struct BagInput {
  std::vector<std::vector<std::uint32_t>> instances;
  Vector k1;
  Vector k2;
  std::size_t label = 0;
};

BagInput prepare_bag(const Bag& bag, const Lexicon& lexicon, const Vocabulary& vocab,
                     const CuiEmbeddingTable& cui_table, const RelationSchema& schema);

// Intermediates of one sentence encoding.
struct EncoderTrace {
  std::vector<std::uint32_t> ids;
  Vector pooled;     // x: mean or attention-pooled embedding (unused by bow)
  Vector attention;  // token weights (token_attention only)
  Vector r;
};

EncoderTrace encode_sentence_traced(std::span<const std::uint32_t> ids, const ModelParams& params,
                                    const ModelConfig& config);
inline Vector encode_sentence(std::span<const std::uint32_t> ids, const ModelParams& params,
                              const ModelConfig& config) {
  return encode_sentence_traced(ids, params, config).r;
}

struct Aggregate {
  Vector r;
  Vector alpha;
};

// alpha = softmax(R^T v), r = R alpha. Columns of R are given as rows of
// `columns`.
Aggregate aggregate_bag(const std::vector<Vector>& columns, std::span<const double> v_ep);

struct Fused {
  Vector c1;
  Vector c2;
  Vector f;
  Vector logits;
  Vector probs;
};

// c_j = W_j k_j + b_j, f = concat(r, c1, c2), y = softmax(W f + b).
Fused fuse_and_classify(std::span<const double> r, std::span<const double> k1, std::span<const double> k2,
                        const ModelParams& params, const ModelConfig& config);

struct ForwardTrace {
  const ModelParams* params = nullptr;
  std::uint64_t generation = 0;
  ModelConfig config;
  std::vector<std::size_t> sampled;
  std::vector<EncoderTrace> encoded;
  Aggregate aggregate;
  Vector k1;
  Vector k2;
  Fused fused;
  std::size_t label = 0;
  double loss = 0;
};

// Cross-entropy on a random subset of min(n_s, |bag|) instances plus
// (l2 / 2) * |weights|^2.
ForwardTrace forward_loss(const BagInput& bag, std::size_t label, const ModelParams& params,
                          const ModelConfig& config, std::mt19937_64& rng);
// Same, on an explicit instance subset.
ForwardTrace forward_loss_on(const BagInput& bag, std::size_t label, const ModelParams& params,
                             const ModelConfig& config, std::vector<std::size_t> instances);

// Adds d(loss)/d(params) into `grad` (same flat layout). `include_l2`
// controls the penalty term so batches can add it once.
void accumulate_gradients(const ForwardTrace& trace, const ModelParams& params, std::span<double> grad,
                          double scale = 1.0, bool include_l2 = true);

// Exact gradients of the traced loss. Throws when params changed since the
// forward pass.
std::vector<double> backward(const ForwardTrace& trace, const ModelParams& params);

struct Prediction {
  std::size_t label = 0;
  Vector probs;
  Vector alpha;
};

// Uses every instance; argmax with ties to the lowest index.
Prediction predict_bag(const BagInput& bag, const ModelParams& params, const ModelConfig& config);

// Versioned JSON checkpoint with config, vocabulary, label names and
// tensors. Loading rejects tensor shapes that disagree with the config.
inline constexpr int kCheckpointFormatVersion = 1;
std::string serialize_checkpoint(const ModelConfig& config, const ModelParams& params,
                                 const std::vector<std::string>& label_names);
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::vector<std::string> label_names;
};
Checkpoint parse_checkpoint(std::string_view text);

}  // namespace dsre

#endif  // DSRE_MODEL_H_
