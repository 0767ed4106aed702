#include "dsre/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.h"

namespace dsre {
namespace {

ModelConfig small_config(EncoderVariant enc, std::uint64_t seed = 1) {
  ModelConfig c;
  c.encoder = enc;
  c.d_e = 4;
  c.d_r = 3;
  c.d_k = 5;
  c.d_c = 2;
  c.n_s = 3;
  c.num_labels = 4;
  c.l2 = 1e-3;
  c.init_scale = 0.5;
  c.seed = seed;
  return c;
}

Vocabulary small_vocab() { return Vocabulary({"alpha", "beta", "gamma", "delta"}); }

BagInput random_bag(std::mt19937_64& rng, const ModelParams& p, const ModelConfig& c, std::size_t m) {
  BagInput b;
  std::uniform_int_distribution<std::uint32_t> id(0, static_cast<std::uint32_t>(p.vocab().size() - 1));
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::uint32_t> s(1 + rng() % 5);
    for (auto& x : s) x = id(rng);
    b.instances.push_back(s);
  }
  for (std::size_t k = 0; k < c.d_k; ++k) {
    b.k1.push_back(n(rng));
    b.k2.push_back(n(rng));
  }
  b.label = rng() % c.num_labels;
  return b;
}

std::vector<double> softmax(std::vector<double> z) {
  double mx = *std::max_element(z.begin(), z.end()), s = 0;
  for (double& x : z) s += (x = std::exp(x - mx));
  for (double& x : z) x /= s;
  return z;
}

TEST(VocabularyTest, ReservedTokensFirst) {
  Vocabulary v({"zeta", "alpha"});
  EXPECT_EQ(v.id(kUnkToken), 0u);
  EXPECT_TRUE(v.contains(std::string(kSepToken)));
  EXPECT_TRUE(v.contains(group_mask_token("DISO")));
  EXPECT_LT(v.id("zeta"), v.id("alpha"));
  EXPECT_EQ(v.id("never-seen"), v.id(kUnkToken));
}

TEST(Encoder, BowLinearOneTokenIsItsRow) {
  ModelConfig c = small_config(EncoderVariant::kBowLinear);
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("bow.b").begin(), p.tensor("bow.b").end(), 0.0);
  std::uint32_t id = p.vocab().id("gamma");
  Vector r = encode_sentence(std::vector<std::uint32_t>{id}, p, c);
  auto w = p.tensor("bow.W");
  for (std::size_t k = 0; k < c.d_r; ++k) EXPECT_EQ(r[k], w[id * c.d_r + k]);
}

TEST(Encoder, AvgEmbedProjIsPermutationInvariant) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  Vector a = encode_sentence(std::vector<std::uint32_t>{5, 6, 7, 6}, p, c);
  Vector b = encode_sentence(std::vector<std::uint32_t>{6, 7, 6, 5}, p, c);
  for (std::size_t k = 0; k < c.d_r; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
}

TEST(Encoder, TokenAttentionWithZeroQueryEqualsMean) {
  ModelConfig ca = small_config(EncoderVariant::kTokenAttention);
  ModelConfig cm = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams pa = init_params(ca, small_vocab());
  ModelParams pm = init_params(cm, small_vocab());
  std::fill(pa.tensor("attn.q").begin(), pa.tensor("attn.q").end(), 0.0);
  for (const char* name : {"emb", "proj.W", "proj.b"}) {
    auto src = pa.tensor(name);
    std::copy(src.begin(), src.end(), pm.tensor(name).begin());
  }
  std::vector<std::uint32_t> ids = {4, 5, 5, 8};
  auto ta = encode_sentence_traced(ids, pa, ca);
  for (double w : ta.attention) EXPECT_DOUBLE_EQ(w, 0.25);
  Vector m = encode_sentence(ids, pm, cm);
  for (std::size_t k = 0; k < ca.d_r; ++k) EXPECT_NEAR(ta.r[k], m[k], 1e-15);
}

TEST(Encoder, EmptySequenceRejected) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  EXPECT_THROW(encode_sentence(std::vector<std::uint32_t>{}, p, c), ValidationError);
}

TEST(AggregateBag, SingleAndIdenticalColumns) {
  Vector v = {0.3, -1.0};
  Aggregate one = aggregate_bag({{2.0, 5.0}}, v);
  EXPECT_EQ(one.alpha, Vector{1.0});
  EXPECT_EQ(one.r, (Vector{2.0, 5.0}));
  Aggregate two = aggregate_bag({{1.0, 2.0}, {1.0, 2.0}}, v);
  EXPECT_EQ(two.alpha, (Vector{0.5, 0.5}));
  EXPECT_NEAR(two.r[0], 1.0, 1e-15);
  EXPECT_NEAR(two.r[1], 2.0, 1e-15);
}

TEST(AggregateBag, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int round = 0; round < 200; ++round) {
    std::size_t m = 1 + rng() % 5, d = 1 + rng() % 4;
    std::vector<Vector> cols(m, Vector(d));
    Vector v(d);
    for (auto& c : cols)
      for (auto& x : c) x = n(rng);
    for (auto& x : v) x = n(rng);
    Vector scores(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k) scores[i] += cols[i][k] * v[k];
    Vector alpha = softmax(scores);
    Aggregate got = aggregate_bag(cols, v);
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(got.alpha[i], alpha[i], 1e-12);
    for (std::size_t k = 0; k < d; ++k) {
      double r = 0;
      for (std::size_t i = 0; i < m; ++i) r += cols[i][k] * alpha[i];
      EXPECT_NEAR(got.r[k], r, 1e-12);
    }
    // Adding a constant to every score leaves alpha alone: shift R along v.
    double vv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (vv > 1e-6) {
      auto shifted = cols;
      for (auto& c : shifted)
        for (std::size_t k = 0; k < d; ++k) c[k] += 3.0 * v[k] / vv;
      Aggregate s = aggregate_bag(shifted, v);
      for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(s.alpha[i], got.alpha[i], 1e-12);
    }
  }
}

TEST(FuseAndClassify, ZeroWeightsGiveUniform) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("W").begin(), p.tensor("W").end(), 0.0);
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  Fused f = fuse_and_classify(Vector(c.d_r, 1.0), Vector(c.d_k, 1.0), Vector(c.d_k, -1.0), p, c);
  for (double y : f.probs) EXPECT_DOUBLE_EQ(y, 0.25);

  p.tensor("b")[2] = 100.0;
  f = fuse_and_classify(Vector(c.d_r, 1.0), Vector(c.d_k, 1.0), Vector(c.d_k, -1.0), p, c);
  EXPECT_NEAR(f.probs[2], 1.0, 1e-12);
  EXPECT_THROW(fuse_and_classify(Vector(c.d_r + 1), Vector(c.d_k), Vector(c.d_k), p, c), ValidationError);
}

TEST(FuseAndClassify, MatchesDirectFormula) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj, seed);
    ModelParams p = init_params(c, small_vocab());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Vector r(c.d_r), k1(c.d_k), k2(c.d_k);
    for (auto* v : {&r, &k1, &k2})
      for (auto& x : *v) x = n(rng);
    auto W1 = p.tensor("W1"), W2 = p.tensor("W2"), b1 = p.tensor("b1"), b2 = p.tensor("b2");
    Vector f = r;
    for (std::size_t i = 0; i < c.d_c; ++i) {
      double s = b1[i];
      for (std::size_t j = 0; j < c.d_k; ++j) s += W1[i * c.d_k + j] * k1[j];
      f.push_back(s);
    }
    for (std::size_t i = 0; i < c.d_c; ++i) {
      double s = b2[i];
      for (std::size_t j = 0; j < c.d_k; ++j) s += W2[i * c.d_k + j] * k2[j];
      f.push_back(s);
    }
    auto W = p.tensor("W"), b = p.tensor("b");
    Vector z(c.num_labels);
    for (std::size_t i = 0; i < c.num_labels; ++i) {
      z[i] = b[i];
      for (std::size_t j = 0; j < f.size(); ++j) z[i] += W[i * f.size() + j] * f[j];
    }
    Vector y = softmax(z);
    Fused got = fuse_and_classify(r, k1, k2, p, c);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(got.probs[i], y[i], 1e-12);
    EXPECT_NEAR(std::accumulate(got.probs.begin(), got.probs.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(FuseAndClassify, AblationsIgnoreTheOtherBlock) {
  for (Fusion fusion : {Fusion::kTextOnly, Fusion::kCuiOnly}) {
    ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
    c.fusion = fusion;
    ModelParams p = init_params(c, small_vocab());
    Vector r(c.d_r, 0.7), k(c.d_k, 0.2);
    Fused base = fuse_and_classify(r, k, k, p, c);
    Fused other = fusion == Fusion::kTextOnly ? fuse_and_classify(r, Vector(c.d_k, -3.0), Vector(c.d_k, 5.0), p, c)
                                              : fuse_and_classify(Vector(c.d_r, -4.0), k, k, p, c);
    for (std::size_t i = 0; i < c.num_labels; ++i) EXPECT_DOUBLE_EQ(base.probs[i], other.probs[i]);
  }
}

TEST(ForwardLoss, Arithmetic) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  c.l2 = 0;
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("W").begin(), p.tensor("W").end(), 0.0);
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  std::mt19937_64 rng(1);
  BagInput bag = random_bag(rng, p, c, 2);
  EXPECT_NEAR(forward_loss(bag, 1, p, c, rng).loss, std::log(4.0), 1e-12);

  p.tensor("b")[3] = 800.0;  // softmax saturates to exactly 1
  EXPECT_EQ(forward_loss(bag, 3, p, c, rng).loss, 0.0);
}

TEST(ForwardLoss, SamplesMinOfNsAndBag) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  c.n_s = 10;
  ModelParams p = init_params(c, small_vocab());
  std::mt19937_64 rng(1);
  BagInput bag = random_bag(rng, p, c, 3);
  EXPECT_EQ(forward_loss(bag, 0, p, c, rng).sampled, (std::vector<std::size_t>{0, 1, 2}));
  c.n_s = 2;
  auto s = forward_loss(random_bag(rng, p, c, 7), 0, p, c, rng).sampled;
  EXPECT_EQ(s.size(), 2u);
  EXPECT_NE(s[0], s[1]);
}

TEST(Backward, BiasGradientIsSoftmaxMinusOneHot) {
  ModelConfig c = small_config(EncoderVariant::kBowLinear);
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("W").begin(), p.tensor("W").end(), 0.0);
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  std::mt19937_64 rng(1);
  BagInput bag = random_bag(rng, p, c, 2);
  auto tr = forward_loss(bag, 2, p, c, rng);
  auto g = backward(tr, p);
  const auto& bi = p.info("b");
  for (std::size_t i = 0; i < c.num_labels; ++i) EXPECT_NEAR(g[bi.offset + i], 0.25 - (i == 2), 1e-12);
}

TEST(Backward, L2OnlyWhenPredictionIsCertain) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  p.tensor("b")[1] = 800.0;
  std::mt19937_64 rng(1);
  BagInput bag = random_bag(rng, p, c, 2);
  auto g = backward(forward_loss(bag, 1, p, c, rng), p);
  auto mask = p.weight_mask();
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], c.l2 * p.values()[i] * mask[i], 1e-15);
}

TEST(Backward, StaleTraceRejected) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  std::mt19937_64 rng(1);
  auto tr = forward_loss(random_bag(rng, p, c, 2), 0, p, c, rng);
  p.bump_generation();
  EXPECT_THROW(backward(tr, p), Error);
}

TEST(Backward, MatchesFiniteDifferencesForEveryEncoder) {
  for (EncoderVariant enc : {EncoderVariant::kBowLinear, EncoderVariant::kAvgEmbedProj, EncoderVariant::kTokenAttention}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ModelConfig c = small_config(enc, seed);
      ModelParams p = init_params(c, small_vocab());
      std::mt19937_64 rng(seed);
      BagInput bag = random_bag(rng, p, c, 3);
      auto tr = forward_loss_on(bag, bag.label, p, c, {0, 1, 2});
      auto g = backward(tr, p);
      auto loss = [&](const std::vector<double>& x) {
        ModelParams q = p;
        q.values() = x;
        return forward_loss_on(bag, bag.label, q, c, {0, 1, 2}).loss;
      };
      EXPECT_LT(oracle::max_fd_relative_error(loss, p.values(), g, 1e-5, 1e-6), 1e-4) << to_string(enc);
    }
  }
}

TEST(PredictBag, UsesAllInstancesAndIgnoresOrder) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    ModelConfig c = small_config(EncoderVariant::kTokenAttention, round + 1);
    ModelParams p = init_params(c, small_vocab());
    BagInput bag = random_bag(rng, p, c, 1 + rng() % 3);
    Prediction pred = predict_bag(bag, p, c);
    std::vector<std::size_t> all(bag.instances.size());
    std::iota(all.begin(), all.end(), 0);
    auto tr = forward_loss_on(bag, 0, p, c, all);
    for (std::size_t i = 0; i < c.num_labels; ++i) EXPECT_DOUBLE_EQ(pred.probs[i], tr.fused.probs[i]);

    BagInput shuffled = bag;
    std::shuffle(shuffled.instances.begin(), shuffled.instances.end(), rng);
    Prediction sp = predict_bag(shuffled, p, c);
    for (std::size_t i = 0; i < c.num_labels; ++i) EXPECT_NEAR(sp.probs[i], pred.probs[i], 1e-12);
    EXPECT_EQ(sp.label, pred.label);
  }
}

TEST(PredictBag, BiasDominates) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams p = init_params(c, small_vocab());
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  p.tensor("b")[3] = 50.0;
  std::mt19937_64 rng(2);
  EXPECT_EQ(predict_bag(random_bag(rng, p, c, 2), p, c).label, 3u);
  std::fill(p.tensor("W").begin(), p.tensor("W").end(), 0.0);
  std::fill(p.tensor("b").begin(), p.tensor("b").end(), 0.0);
  EXPECT_EQ(predict_bag(random_bag(rng, p, c, 2), p, c).label, 0u);  // ties go to the lowest index
}

TEST(Checkpoint, RoundTripAndShapeCheck) {
  ModelConfig c = small_config(EncoderVariant::kTokenAttention);
  ModelParams p = init_params(c, small_vocab());
  std::vector<std::string> labels = {"NA", "A", "B", "C"};
  std::string text = serialize_checkpoint(c, p, labels);
  Checkpoint back = parse_checkpoint(text);
  EXPECT_EQ(back.params, p);
  EXPECT_EQ(back.label_names, labels);
  EXPECT_EQ(serialize_checkpoint(back.config, back.params, back.label_names), text);

  ModelConfig wrong = c;
  wrong.d_r = 5;
  std::string bad = serialize_checkpoint(wrong, p, labels);
  EXPECT_THROW(parse_checkpoint(bad), Error);
}

TEST(InitParams, SeededAndBounded) {
  ModelConfig c = small_config(EncoderVariant::kAvgEmbedProj);
  ModelParams a = init_params(c, small_vocab());
  EXPECT_EQ(a, init_params(c, small_vocab()));
  for (double x : a.values()) EXPECT_LE(std::abs(x), c.init_scale);
  EmbeddingTable words(c.d_e);
  words.set("beta", std::vector<double>{1, 2, 3, 4});
  ModelParams w = init_params(c, small_vocab(), &words);
  auto emb = w.tensor("emb");
  std::uint32_t id = w.vocab().id("beta");
  EXPECT_EQ(std::vector<double>(emb.begin() + id * 4, emb.begin() + id * 4 + 4), (std::vector<double>{1, 2, 3, 4}));
}

}  // namespace
}  // namespace dsre
