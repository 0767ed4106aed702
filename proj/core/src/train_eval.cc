#include "dsre/train_eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

std::string fmt_double(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string_view to_string(Optimizer o) { return o == Optimizer::kSgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "adam") return Optimizer::kAdam;
  throw ValidationError("optimizer must be sgd or adam, got \"" + std::string(s) + "\"");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (!(l2 >= 0)) throw ValidationError("l2 must be >= 0");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
}

TrainResult train_prepared(const std::vector<BagInput>& inputs, const std::vector<std::size_t>& train_indices,
                           ModelParams params, const ModelConfig& config, const TrainConfig& tc,
                           std::vector<std::string> label_names) {
  tc.validate();
  config.validate();
  TrainResult result;
  const std::size_t n = params.size();
  std::vector<double> grad(n), m1, m2;
  if (tc.optimizer == Optimizer::kAdam) {
    m1.assign(n, 0.0);
    m2.assign(n, 0.0);
  }
  std::mt19937_64 shuffle_rng(derive_seed(tc.seed, "shuffle"));
  std::mt19937_64 sample_rng(derive_seed(tc.seed, "instances"));
  std::vector<std::size_t> order = train_indices;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::size_t end = std::min(order.size(), start + tc.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_ce = 0;
      for (std::size_t k = start; k < end; ++k) {
        const BagInput& bag = inputs[order[k]];
        ForwardTrace tr = forward_loss(bag, bag.label, params, config, sample_rng);
        if (!std::isfinite(tr.loss))
          throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                      std::to_string(batches) + " (bag " + std::to_string(order[k]) + ")");
        accumulate_gradients(tr, params, grad, scale, /*include_l2=*/false);
        batch_ce += tr.loss * scale;
      }
      if (config.l2 > 0) {
        for (const auto& t : params.tensors()) {
          if (t.is_bias) continue;
          for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) grad[i] += config.l2 * params.values()[i];
        }
      }
      auto& w = params.values();
      ++step;
      if (tc.optimizer == Optimizer::kSgd) {
        for (std::size_t i = 0; i < n; ++i) w[i] -= tc.learning_rate * grad[i];
      } else {
        const double c1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < n; ++i) {
          double g = grad[i];
          m1[i] = tc.adam_beta1 * m1[i] + (1 - tc.adam_beta1) * g;
          m2[i] = tc.adam_beta2 * m2[i] + (1 - tc.adam_beta2) * g * g;
          w[i] -= tc.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + tc.adam_epsilon);
        }
      }
      params.bump_generation();
      if (!std::isfinite(batch_ce))
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      result.loss_log.push_back({epoch, batches, batch_ce});
      epoch_sum += batch_ce;
      ++batches;
    }
    result.epoch_loss.push_back(batches ? epoch_sum / static_cast<double>(batches) : 0.0);
  }
  result.model.config = config;
  result.model.params = std::move(params);
  result.model.label_names = std::move(label_names);
  return result;
}

TrainResult train(const Dataset& dataset, const TrainingResources& res, ModelConfig config, const TrainConfig& tc) {
  if (!res.lexicon || !res.cui_table || !res.schema) throw ValidationError("train: lexicon, cui table and schema are required");
  auto train_idx = dataset.indices(Split::kTrain);
  if (train_idx.empty() || dataset.indices(Split::kTest).empty())
    throw ValidationError("train: dataset needs both train and test bags");
  config.l2 = tc.l2;
  config.num_labels = res.schema->size();
  std::vector<const Bag*> train_bags;
  for (std::size_t i : train_idx) train_bags.push_back(&dataset.bags[i]);
  ModelParams params = init_params(config, build_vocabulary(train_bags, *res.lexicon), res.word_table);
  std::vector<BagInput> inputs;
  inputs.reserve(dataset.bags.size());
  for (const auto& b : dataset.bags)
    inputs.push_back(prepare_bag(b, *res.lexicon, params.vocab(), *res.cui_table, *res.schema));
  std::vector<std::string> labels;
  for (const auto& l : res.schema->labels()) labels.push_back(l.id);
  return train_prepared(inputs, train_idx, std::move(params), config, tc, std::move(labels));
}

std::string loss_log_csv(const std::vector<LossRecord>& log) {
  std::string out = "epoch,batch,loss\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", r.epoch, r.batch, r.loss);
    out += buf;
  }
  return out;
}

Metrics compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                        const std::vector<std::string>& label_names) {
  if (truth.size() != predicted.size()) throw ValidationError("compute_metrics: size mismatch");
  const std::size_t L = label_names.size();
  Metrics m;
  m.label_names = label_names;
  m.confusion.assign(L, std::vector<std::size_t>(L, 0));
  std::size_t correct = 0, pos_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= L || predicted[i] >= L) throw ValidationError("compute_metrics: label index out of range");
    ++m.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
    if (truth[i] != 0) {
      ++m.positive_total;
      if (truth[i] == predicted[i]) ++pos_correct;
    }
  }
  m.total = truth.size();
  m.overall_accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  m.positive_accuracy = m.positive_total ? static_cast<double>(pos_correct) / static_cast<double>(m.positive_total) : 0.0;
  for (std::size_t l = 1; l < L; ++l) {
    std::size_t tp = m.confusion[l][l], support = 0, predicted_l = 0;
    for (std::size_t k = 0; k < L; ++k) {
      support += m.confusion[l][k];
      predicted_l += m.confusion[k][l];
    }
    LabelScores s;
    s.label = label_names[l];
    s.support = support;
    s.precision = predicted_l ? static_cast<double>(tp) / static_cast<double>(predicted_l) : 0.0;
    s.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.per_label.push_back(s);
  }
  return m;
}

std::string metrics_json(const Metrics& m) {
  json per = json::array();
  for (const auto& s : m.per_label)
    per.push_back({{"label", s.label}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  json j = {{"overall_accuracy", m.overall_accuracy},
            {"positive_accuracy", m.positive_accuracy},
            {"total", m.total},
            {"positive_total", m.positive_total},
            {"labels", m.label_names},
            {"per_label", per},
            {"confusion", m.confusion}};
  return j.dump(2) + "\n";
}

std::string metrics_table(const Metrics& m) {
  std::ostringstream out;
  out << "overall accuracy   " << fmt_double(m.overall_accuracy) << "  (" << m.total << " bags)\n";
  out << "positive accuracy  " << fmt_double(m.positive_accuracy) << "  (" << m.positive_total << " bags)\n\n";
  out << "label        precision  recall     f1         support\n";
  for (const auto& s : m.per_label) {
    std::string name = s.label;
    name.resize(std::max<std::size_t>(name.size(), 12), ' ');
    out << name << ' ' << fmt_double(s.precision) << "     " << fmt_double(s.recall) << "     " << fmt_double(s.f1)
        << "     " << s.support << '\n';
  }
  out << "\nconfusion (rows = truth, cols = predicted):\n";
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    std::string name = m.label_names[r];
    name.resize(std::max<std::size_t>(name.size(), 12), ' ');
    out << name;
    for (std::size_t c : m.confusion[r]) out << ' ' << c;
    out << '\n';
  }
  return out.str();
}

std::vector<BagInput> prepare_inputs(const Dataset& dataset, const TrainedModel& model, const Lexicon& lexicon,
                                     const CuiEmbeddingTable& cui_table, const RelationSchema& schema) {
  if (schema.size() != model.config.num_labels)
    throw ValidationError("schema has " + std::to_string(schema.size()) + " labels, model expects " +
                          std::to_string(model.config.num_labels));
  std::vector<BagInput> inputs;
  inputs.reserve(dataset.bags.size());
  for (const auto& b : dataset.bags) inputs.push_back(prepare_bag(b, lexicon, model.params.vocab(), cui_table, schema));
  return inputs;
}

std::vector<std::size_t> predict_labels(const TrainedModel& model, const std::vector<BagInput>& inputs,
                                        const std::vector<std::size_t>& indices, int threads) {
  std::vector<std::size_t> out(indices.size());
  parallel_for(indices.size(), threads,
               [&](std::size_t k) { out[k] = predict_bag(inputs[indices[k]], model.params, model.config).label; });
  return out;
}

Metrics evaluate_prepared(const TrainedModel& model, const std::vector<BagInput>& inputs,
                          const std::vector<std::size_t>& indices, int threads) {
  if (indices.empty()) throw ValidationError("evaluate: split is empty");
  std::vector<std::size_t> truth;
  for (std::size_t i : indices) truth.push_back(inputs[i].label);
  std::vector<std::string> names = model.label_names;
  if (names.size() != model.config.num_labels) {
    names.clear();
    for (std::size_t l = 0; l < model.config.num_labels; ++l) names.push_back(l == 0 ? "NA" : "label" + std::to_string(l));
  }
  return compute_metrics(truth, predict_labels(model, inputs, indices, threads), names);
}

Metrics evaluate(const TrainedModel& model, const Dataset& dataset, Split split, const Lexicon& lexicon,
                 const CuiEmbeddingTable& cui_table, const RelationSchema& schema, int threads) {
  auto inputs = prepare_inputs(dataset, model, lexicon, cui_table, schema);
  return evaluate_prepared(model, inputs, dataset.indices(split), threads);
}

CrossTestResult cross_test_prepared(const TrainedModel& model, const std::vector<BagInput>& inputs,
                                    const std::vector<std::size_t>& test_indices) {
  CrossTestResult r;
  r.metrics = evaluate_prepared(model, inputs, test_indices);
  r.overall_accuracy = r.metrics.overall_accuracy;
  r.positive_accuracy = r.metrics.positive_accuracy;
  std::size_t neg_total = 0;
  for (std::size_t k : r.metrics.confusion[0]) neg_total += k;
  r.negatives = neg_total;
  r.negative_accuracy = neg_total ? static_cast<double>(r.metrics.confusion[0][0]) / static_cast<double>(neg_total) : 0.0;
  return r;
}

CrossTestResult cross_test(const TrainedModel& model, const Dataset& trained_on, const Dataset& other,
                           const Lexicon& lexicon, const CuiEmbeddingTable& cui_table, const RelationSchema& schema,
                           int threads) {
  auto positives = [](const Dataset& d) {
    std::multiset<std::string> s;
    for (const auto& b : d.bags)
      if (b.label != kNegativeLabel) s.insert(b.head_cui + '\t' + b.label + '\t' + b.tail_cui);
    return s;
  };
  if (positives(trained_on) != positives(other))
    throw ValidationError("cross_test: the datasets do not share the same positive bags");
  auto inputs = prepare_inputs(other, model, lexicon, cui_table, schema);
  auto test = other.indices(Split::kTest);
  CrossTestResult r;
  r.metrics = evaluate_prepared(model, inputs, test, threads);
  r.overall_accuracy = r.metrics.overall_accuracy;
  r.positive_accuracy = r.metrics.positive_accuracy;
  for (std::size_t k : r.metrics.confusion[0]) r.negatives += k;
  r.negative_accuracy =
      r.negatives ? static_cast<double>(r.metrics.confusion[0][0]) / static_cast<double>(r.negatives) : 0.0;
  return r;
}

std::string cross_test_json(const CrossTestResult& r) {
  json j = {{"overall_accuracy", r.overall_accuracy},
            {"negative_accuracy", r.negative_accuracy},
            {"positive_accuracy", r.positive_accuracy},
            {"negative_bags", r.negatives},
            {"test_bags", r.metrics.total}};
  return j.dump(2) + "\n";
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
                           std::span<const double> analytic, const std::vector<TensorInfo>& tensors,
                           const GradCheckOptions& opt) {
  if (analytic.size() != point.size()) throw ValidationError("grad_check: gradient size mismatch");
  std::vector<double> x(point.begin(), point.end());
  std::mt19937_64 rng(opt.seed);
  GradCheckResult res;
  auto check = [&](const std::string& name, std::size_t i) {
    const double orig = x[i];
    x[i] = orig + opt.epsilon;
    double up = loss(x);
    x[i] = orig - opt.epsilon;
    double down = loss(x);
    x[i] = orig;
    double numeric = (up - down) / (2 * opt.epsilon);
    double a = analytic[i];
    double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
    if (res.coordinates++ == 0 || rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_tensor = name;
      res.worst_index = i;
    }
  };
  std::vector<TensorInfo> groups = tensors;
  if (groups.empty()) groups.push_back({"all", point.size(), 1, 0, false});
  for (const auto& t : groups) {
    if (t.size() <= opt.full_check_limit) {
      for (std::size_t i = 0; i < t.size(); ++i) check(t.name, t.offset + i);
    } else {
      std::vector<std::size_t> all(t.size()), picked;
      std::iota(all.begin(), all.end(), 0);
      std::sample(all.begin(), all.end(), std::back_inserter(picked), std::max<std::size_t>(opt.sample, 1), rng);
      for (std::size_t i : picked) check(t.name, t.offset + i);
    }
  }
  return res;
}

GradCheckResult grad_check(const ModelParams& params, const ModelConfig& config, const BagInput& bag,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  ForwardTrace base = forward_loss(bag, bag.label, params, config, rng);
  std::vector<double> analytic = backward(base, params);
  ModelParams scratch = params;
  auto sampled = base.sampled;
  auto loss = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), scratch.values().begin());
    return forward_loss_on(bag, bag.label, scratch, config, sampled).loss;
  };
  return grad_check(loss, params.values(), analytic, params.tensors(), options);
}

}  // namespace dsre
