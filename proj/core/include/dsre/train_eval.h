#ifndef DSRE_TRAIN_EVAL_H_
#define DSRE_TRAIN_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsre/embeddings.h"
#include "dsre/lexicon.h"
#include "dsre/model.h"
#include "dsre/sampling.h"
#include "dsre/triplets.h"

namespace dsre {

enum class Optimizer { kSgd, kAdam };
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct TrainConfig {
  double learning_rate = 4e-4;
  double l2 = 1e-7;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch;
  std::size_t batch;
  double loss;
};

// A trained model is its checkpoint.
using TrainedModel = Checkpoint;

struct TrainResult {
  TrainedModel model;
  std::vector<LossRecord> loss_log;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Everything the trainer needs besides the dataset.
struct TrainingResources {
  const Lexicon* lexicon = nullptr;
  const CuiEmbeddingTable* cui_table = nullptr;
  const WordEmbeddingTable* word_table = nullptr;  // optional, seeds token embeddings
  const RelationSchema* schema = nullptr;
};

// Mini-batch training over the train split, reshuffled every epoch from the
// seed. The model config's l2 is overridden by the train config's. Throws on
// a non-finite loss with the epoch and batch.
TrainResult train(const Dataset& dataset, const TrainingResources& res, ModelConfig model_config,
                  const TrainConfig& train_config);

// Lower-level entry point on prepared inputs; used by train() and by
// synthetic experiments that construct bags directly.
TrainResult train_prepared(const std::vector<BagInput>& inputs, const std::vector<std::size_t>& train_indices,
                           ModelParams params, const ModelConfig& model_config, const TrainConfig& train_config,
                           std::vector<std::string> label_names);

std::string loss_log_csv(const std::vector<LossRecord>& log);

struct LabelScores {
  std::string label;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

struct Metrics {
  double overall_accuracy = 0;
  double positive_accuracy = 0;
  std::size_t total = 0;
  std::size_t positive_total = 0;
  std::vector<LabelScores> per_label;                  // non-NA labels, one-vs-rest
  std::vector<std::vector<std::size_t>> confusion;     // [truth][predicted]
  std::vector<std::string> label_names;
};

// Metrics from parallel truth/prediction label indices; index 0 is NA.
Metrics compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                        const std::vector<std::string>& label_names);

std::string metrics_json(const Metrics& m);
std::string metrics_table(const Metrics& m);

std::vector<BagInput> prepare_inputs(const Dataset& dataset, const TrainedModel& model, const Lexicon& lexicon,
                                     const CuiEmbeddingTable& cui_table, const RelationSchema& schema);

std::vector<std::size_t> predict_labels(const TrainedModel& model, const std::vector<BagInput>& inputs,
                                        const std::vector<std::size_t>& indices, int threads = 1);

Metrics evaluate(const TrainedModel& model, const Dataset& dataset, Split split, const Lexicon& lexicon,
                 const CuiEmbeddingTable& cui_table, const RelationSchema& schema, int threads = 1);
Metrics evaluate_prepared(const TrainedModel& model, const std::vector<BagInput>& inputs,
                          const std::vector<std::size_t>& indices, int threads = 1);

struct CrossTestResult {
  double overall_accuracy = 0;
  double negative_accuracy = 0;
  double positive_accuracy = 0;
  std::size_t negatives = 0;
  Metrics metrics;
};

// Evaluates a model trained on dataset A on dataset B's test split without
// retraining. Both datasets must hold the same positive bags.
CrossTestResult cross_test(const TrainedModel& model, const Dataset& trained_on, const Dataset& other,
                           const Lexicon& lexicon, const CuiEmbeddingTable& cui_table, const RelationSchema& schema,
                           int threads = 1);
CrossTestResult cross_test_prepared(const TrainedModel& model, const std::vector<BagInput>& inputs,
                                    const std::vector<std::size_t>& test_indices);

std::string cross_test_json(const CrossTestResult& r);

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Tensors larger than this are checked on a seeded random subsample of
  // `sample` coordinates.
  std::size_t full_check_limit = 2000;
  std::size_t sample = 200;
  // Denominator floor for the relative error, so coordinates whose true
  // gradient is ~0 are judged on absolute error.
  double floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
};

// Central differences of `loss` against `analytic`, grouped by tensor.
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
                           std::span<const double> analytic, const std::vector<TensorInfo>& tensors,
                           const GradCheckOptions& options = {});

// Model-level check on one bag with a fixed instance subset.
GradCheckResult grad_check(const ModelParams& params, const ModelConfig& config, const BagInput& bag,
                           const GradCheckOptions& options = {});

}  // namespace dsre

#endif  // DSRE_TRAIN_EVAL_H_
