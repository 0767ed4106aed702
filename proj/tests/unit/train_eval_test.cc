#include "dsre/train_eval.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dsre/synth.h"
#include "oracles.h"

namespace dsre {
namespace {

// Bags whose label is spelled out by a cue token; CUI vectors are noise.
struct CueTask {
  std::vector<BagInput> inputs;
  std::vector<std::size_t> train, test;
  ModelConfig config;
  Vocabulary vocab;
  std::vector<std::string> labels = {"NA", "R1", "R2"};
};

CueTask cue_task(std::uint64_t seed, std::size_t bags = 90) {
  CueTask t;
  t.vocab = Vocabulary({"cue0", "cue1", "cue2", "w0", "w1", "w2", "w3"});
  t.config.d_e = 8;
  t.config.d_r = 8;
  t.config.d_k = 4;
  t.config.d_c = 3;
  t.config.n_s = 3;
  t.config.num_labels = 3;
  t.config.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (std::size_t b = 0; b < bags; ++b) {
    BagInput in;
    in.label = b % 3;
    for (int i = 0; i < 2; ++i) {
      std::vector<std::uint32_t> ids;
      for (int k = 0; k < 3; ++k) ids.push_back(t.vocab.id("w" + std::to_string(rng() % 4)));
      ids.insert(ids.begin() + static_cast<long>(rng() % 3), t.vocab.id("cue" + std::to_string(in.label)));
      in.instances.push_back(ids);
    }
    for (std::size_t k = 0; k < t.config.d_k; ++k) {
      in.k1.push_back(n(rng));
      in.k2.push_back(n(rng));
    }
    (b % 5 == 4 ? t.test : t.train).push_back(t.inputs.size());
    t.inputs.push_back(std::move(in));
  }
  return t;
}

TrainConfig fast_train(std::size_t epochs) {
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = epochs;
  tc.batch_size = 8;
  return tc;
}

TEST(TrainConfigTest, Validation) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate());
  tc.learning_rate = 0;
  EXPECT_THROW(tc.validate(), ValidationError);
  tc = TrainConfig{};
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), ValidationError);
  EXPECT_EQ(parse_optimizer("sgd"), Optimizer::kSgd);
  EXPECT_THROW(parse_optimizer("rmsprop"), ValidationError);
}

TEST(Train, ZeroEpochsReturnsInit) {
  CueTask t = cue_task(1);
  ModelParams init = init_params(t.config, t.vocab);
  TrainResult r = train_prepared(t.inputs, t.train, init, t.config, fast_train(0), t.labels);
  EXPECT_EQ(r.model.params, init);
  EXPECT_TRUE(r.loss_log.empty());
}

TEST(Train, SameSeedSameCheckpoint) {
  CueTask t = cue_task(2);
  auto run = [&] {
    TrainResult r = train_prepared(t.inputs, t.train, init_params(t.config, t.vocab), t.config, fast_train(3), t.labels);
    return serialize_checkpoint(r.model.config, r.model.params, r.model.label_names) + loss_log_csv(r.loss_log);
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, LossDecreasesOnSeparableData) {
  for (Optimizer opt : {Optimizer::kAdam, Optimizer::kSgd}) {
    CueTask t = cue_task(3);
    TrainConfig tc = fast_train(5);
    tc.optimizer = opt;
    if (opt == Optimizer::kSgd) tc.learning_rate = 0.1;
    tc.batch_size = t.train.size();  // full batch: each step descends
    TrainResult r = train_prepared(t.inputs, t.train, init_params(t.config, t.vocab), t.config, tc, t.labels);
    ASSERT_EQ(r.epoch_loss.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.epoch_loss[e], r.epoch_loss[e - 1]) << to_string(opt);
  }
}

TEST(Train, LearnsTheCue) {
  CueTask t = cue_task(4, 150);
  TrainResult r = train_prepared(t.inputs, t.train, init_params(t.config, t.vocab), t.config, fast_train(30), t.labels);
  EXPECT_GE(evaluate_prepared(r.model, t.inputs, t.test).overall_accuracy, 0.95);
}

TEST(Train, NonFiniteLossAborts) {
  CueTask t = cue_task(5);
  ModelParams p = init_params(t.config, t.vocab);
  p.tensor("b")[0] = std::nan("");
  try {
    train_prepared(t.inputs, t.train, p, t.config, fast_train(2), t.labels);
    FAIL();
  } catch (const Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos);
    EXPECT_NE(msg.find("batch"), std::string::npos);
  }
}

TEST(LossLog, CsvLayout) {
  EXPECT_EQ(loss_log_csv({{0, 0, 0.5}, {0, 1, 0.25}}), "epoch,batch,loss\n0,0,0.5\n0,1,0.25\n");
}

TEST(Metrics, PerfectPredictor) {
  std::vector<std::size_t> truth = {0, 1, 2, 1, 0};
  Metrics m = compute_metrics(truth, truth, {"NA", "A", "B"});
  EXPECT_EQ(m.overall_accuracy, 1.0);
  EXPECT_EQ(m.positive_accuracy, 1.0);
  for (const auto& l : m.per_label) {
    EXPECT_EQ(l.precision, 1.0);
    EXPECT_EQ(l.recall, 1.0);
    EXPECT_EQ(l.f1, 1.0);
  }
}

TEST(Metrics, HandComputedF1) {
  // Label A: TP=1, FP=1, FN=0; two NA bags predicted NA.
  Metrics m = compute_metrics({1, 0, 0, 0}, {1, 1, 0, 0}, {"NA", "A"});
  ASSERT_EQ(m.per_label.size(), 1u);
  EXPECT_DOUBLE_EQ(m.per_label[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(m.per_label[0].recall, 1.0);
  EXPECT_DOUBLE_EQ(m.per_label[0].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.overall_accuracy, 0.75);
}

TEST(Metrics, MatchRecomputationOnRandomPredictions) {
  std::mt19937_64 rng(6);
  for (int round = 0; round < 50; ++round) {
    std::size_t labels = 2 + rng() % 4, n = 1 + rng() % 60;
    std::vector<std::size_t> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng() % labels;
      pred[i] = rng() % labels;
    }
    std::vector<std::string> names(labels, "L");
    Metrics m = compute_metrics(truth, pred, names);
    auto want = oracle::recompute_metrics(truth, pred, labels);
    EXPECT_DOUBLE_EQ(m.overall_accuracy, want.accuracy);
    EXPECT_DOUBLE_EQ(m.positive_accuracy, want.positive_accuracy);
    double trace = 0, sum = 0;
    for (std::size_t i = 0; i < labels; ++i) {
      std::size_t row = 0;
      for (std::size_t j = 0; j < labels; ++j) {
        row += m.confusion[i][j];
        sum += m.confusion[i][j];
      }
      trace += m.confusion[i][i];
      EXPECT_EQ(row, static_cast<std::size_t>(std::count(truth.begin(), truth.end(), i)));
    }
    EXPECT_DOUBLE_EQ(m.overall_accuracy, trace / sum);
    for (std::size_t l = 1; l < labels; ++l) {
      EXPECT_DOUBLE_EQ(m.per_label[l - 1].precision, want.precision[l]);
      EXPECT_DOUBLE_EQ(m.per_label[l - 1].recall, want.recall[l]);
      EXPECT_DOUBLE_EQ(m.per_label[l - 1].f1, want.f1[l]);
      EXPECT_NEAR(m.per_label[l - 1].recall * double(m.per_label[l - 1].support), double(m.confusion[l][l]), 1e-9);
    }
  }
}

TEST(Metrics, JsonAndTableMentionEveryLabel) {
  Metrics m = compute_metrics({0, 1, 2}, {0, 2, 2}, {"NA", "MC", "IN"});
  for (const std::string& s : {metrics_json(m), metrics_table(m)}) {
    EXPECT_NE(s.find("MC"), std::string::npos);
    EXPECT_NE(s.find("IN"), std::string::npos);
  }
  EXPECT_NE(metrics_json(m).find("\"positive_accuracy\""), std::string::npos);
}

TEST(CrossTest, AlwaysNaPredictor) {
  CueTask t = cue_task(7);
  ModelParams p = init_params(t.config, t.vocab);
  std::fill(p.tensor("W").begin(), p.tensor("W").end(), 0.0);
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  p.tensor("b")[0] = 10.0;
  TrainedModel model{t.config, p, t.labels};
  CrossTestResult r = cross_test_prepared(model, t.inputs, t.test);
  EXPECT_EQ(r.negative_accuracy, 1.0);
  EXPECT_EQ(r.positive_accuracy, 0.0);
  EXPECT_GT(r.negatives, 0u);
}

TEST(CrossTest, SameDatasetEqualsEvaluate) {
  SynthOptions o;
  o.sentences = 600;
  o.triplets = 40;
  SynthWorld w = make_synth_world(o);
  CorpusStore corpus = ingest_jsonl_docs(w.corpus_jsonl);
  auto pos = generate_positive_bags(corpus, w.lexicon, w.triplets, w.schema);
  auto pool = build_negative_pool(corpus, w.lexicon, w.schema, w.irrelevant_groups, 1000, 1);
  auto t1 = generate_type1_negatives(pos, pool, w.lexicon, w.schema, 2);
  Dataset a = assemble_datasets(pos, t1, pool, NegativeKind::kType1, 0.8, 3);
  Dataset b = assemble_datasets(pos, t1, pool, NegativeKind::kType2, 0.8, 3);
  CuiEmbeddingTable cui(w.cui_vectors, w.hierarchy);
  ModelConfig mc;
  mc.d_e = 8;
  mc.d_r = 8;
  mc.d_c = 4;
  mc.d_k = cui.dim();
  TrainingResources res{&w.lexicon, &cui, nullptr, &w.schema};
  TrainResult r = train(a, res, mc, fast_train(2));
  Metrics ev = evaluate(r.model, a, Split::kTest, w.lexicon, cui, w.schema);
  CrossTestResult same = cross_test(r.model, a, a, w.lexicon, cui, w.schema);
  EXPECT_EQ(same.overall_accuracy, ev.overall_accuracy);
  EXPECT_EQ(same.metrics.confusion, ev.confusion);

  // On another dataset the figure equals evaluate restricted to its test split.
  CrossTestResult other = cross_test(r.model, a, b, w.lexicon, cui, w.schema);
  Metrics restricted = evaluate(r.model, b, Split::kTest, w.lexicon, cui, w.schema);
  EXPECT_EQ(other.overall_accuracy, restricted.overall_accuracy);
  EXPECT_GE(other.negative_accuracy, 0.0);
  EXPECT_LE(other.negative_accuracy, 1.0);

  Dataset c = a;
  c.bags.erase(std::find_if(c.bags.begin(), c.bags.end(), [](const Bag& x) { return x.label != "NA"; }));
  c.split.pop_back();
  EXPECT_THROW(cross_test(r.model, a, c, w.lexicon, cui, w.schema), ValidationError);
}

TEST(GradCheck, LinearToyMatchesToRoundoff) {
  std::vector<double> coef = {0.5, -2.0, 3.25, 1e-3, 7.0};
  auto loss = [&](std::span<const double> x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += coef[i] * x[i];
    return s;
  };
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<TensorInfo> tensors = {{"w", 5, 1, 0, false}};
  EXPECT_LT(grad_check(loss, x, coef, tensors).max_relative_error, 1e-6);
}

TEST(GradCheck, ModelPassesAndSabotageIsCaught) {
  CueTask t = cue_task(8, 3);
  t.config.l2 = 1e-3;
  t.config.init_scale = 0.5;
  for (EncoderVariant enc : {EncoderVariant::kBowLinear, EncoderVariant::kAvgEmbedProj, EncoderVariant::kTokenAttention}) {
    t.config.encoder = enc;
    ModelParams p = init_params(t.config, t.vocab);
    GradCheckResult ok = grad_check(p, t.config, t.inputs[0]);
    EXPECT_LT(ok.max_relative_error, 1e-4) << to_string(enc) << " worst " << ok.worst_tensor;
    EXPECT_GT(ok.coordinates, 200u);

    auto tr = forward_loss_on(t.inputs[0], t.inputs[0].label, p, t.config, {0, 1});
    auto g = backward(tr, p);
    auto worst = std::max_element(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    *worst *= 2;
    auto loss = [&](std::span<const double> x) {
      ModelParams q = p;
      q.values().assign(x.begin(), x.end());
      return forward_loss_on(t.inputs[0], t.inputs[0].label, q, t.config, {0, 1}).loss;
    };
    EXPECT_GT(grad_check(loss, p.values(), g, p.tensors()).max_relative_error, 0.1);
  }
}

}  // namespace
}  // namespace dsre
