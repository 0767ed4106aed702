#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "benchmark/benchmark.h"
#include "dsre/model.h"

namespace {

struct Fixture {
  dsre::ModelConfig config;
  dsre::ModelParams params;
  dsre::BagInput bag;
};

Fixture make_fixture(dsre::EncoderVariant encoder, std::size_t instances) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 2000; ++i) tokens.push_back("t" + std::to_string(i));
  dsre::Vocabulary vocab(tokens);
  dsre::ModelConfig c;
  c.encoder = encoder;
  c.d_e = 64;
  c.d_r = 64;
  c.d_k = 32;
  c.d_c = 32;
  c.num_labels = 4;
  c.n_s = 16;
  Fixture f{c, dsre::init_params(c, vocab), {}};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < instances; ++i) {
    std::vector<std::uint32_t> ids(30);
    for (auto& x : ids) x = static_cast<std::uint32_t>(rng() % vocab.size());
    f.bag.instances.push_back(ids);
  }
  for (std::size_t k = 0; k < c.d_k; ++k) {
    f.bag.k1.push_back(normal(rng));
    f.bag.k2.push_back(normal(rng));
  }
  return f;
}

void BM_Predict(benchmark::State& state) {
  Fixture f = make_fixture(static_cast<dsre::EncoderVariant>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(dsre::predict_bag(f.bag, f.params, f.config));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Predict)->ArgsProduct({{0, 1, 2}, {1, 16, 64}});

void BM_ForwardBackward(benchmark::State& state) {
  Fixture f = make_fixture(static_cast<dsre::EncoderVariant>(state.range(0)), 16);
  std::vector<std::size_t> chosen(16);
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  for (auto _ : state) {
    auto trace = dsre::forward_loss_on(f.bag, 1, f.params, f.config, chosen);
    benchmark::DoNotOptimize(dsre::backward(trace, f.params));
  }
}
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 2);

}  // namespace
BENCHMARK_MAIN();
