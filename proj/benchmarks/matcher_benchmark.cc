#include <string>
#include <vector>

#include "benchmark/benchmark.h"
#include "dsre/corpus.h"
#include "dsre/lexicon.h"
#include "dsre/sampling.h"
#include "dsre/synth.h"

namespace {

struct World {
  dsre::SynthWorld world;
  dsre::CorpusStore corpus;
  std::vector<dsre::Tokens> sentences;
  std::string text;
};

const World& world() {
  static const World w = [] {
    World x;
    dsre::SynthOptions o;
    o.sentences = 4000;
    o.triplets = 200;
    o.diso_concepts = 80;
    o.anat_concepts = 30;
    x.world = dsre::make_synth_world(o);
    x.corpus = dsre::ingest_jsonl_docs(x.world.corpus_jsonl);
    for (const auto& d : x.corpus.documents())
      for (const auto& s : d.sections)
        for (const auto& sent : s.sentences) {
          x.sentences.push_back(sent.tokens);
          x.text += dsre::join(sent.tokens, " ") + ". ";
        }
    return x;
  }();
  return w;
}

void BM_Tokenize(benchmark::State& state) {
  const std::string& text = world().text;
  for (auto _ : state) benchmark::DoNotOptimize(dsre::tokenize(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_SplitSentences(benchmark::State& state) {
  const std::string& text = world().text;
  for (auto _ : state) benchmark::DoNotOptimize(dsre::split_sentence_spans(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_SplitSentences);

void BM_FindMentions(benchmark::State& state) {
  const World& w = world();
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(state.range(0)), w.sentences.size());
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < n; ++i) tokens += w.sentences[i].size();
  for (auto _ : state)
    for (std::size_t i = 0; i < n; ++i) benchmark::DoNotOptimize(w.world.lexicon.find_mentions(w.sentences[i]));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * tokens));
}
BENCHMARK(BM_FindMentions)->RangeMultiplier(4)->Range(64, 4096);

void BM_PositiveBags(benchmark::State& state) {
  const World& w = world();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dsre::generate_positive_bags(w.corpus, w.world.lexicon, w.world.triplets, w.world.schema));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * w.sentences.size()));
}
BENCHMARK(BM_PositiveBags)->Unit(benchmark::kMillisecond);

}  // namespace
