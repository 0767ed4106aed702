// dsre: command-line driver for the distant-supervision pipeline.

#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dsre/pipeline.h"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;

  std::string corpus, triplets, pages, heading_rules, word_embeddings, input;
  std::size_t max_entry_tokens = 0, pool_size = 0, type2_k = 0, epochs = 0, batch_size = 0, sentences = 0;
  double split_fraction = 0, lr = 0;
  std::string kind, against, encoder, fusion, optimizer;
};

// Registers a flag and records how to apply it to the config when given.
class Overrides {
 public:
  template <typename T, typename Apply>
  void add(CLI::App* app, const std::string& name, T& var, const std::string& help, Apply&& apply) {
    CLI::Option* o = app->add_option(name, var, help);
    entries_.push_back({o, [&var, apply](dsre::PipelineConfig& c) { apply(c, var); }});
  }

  void apply(dsre::PipelineConfig& c) const {
    for (const auto& [opt, fn] : entries_)
      if (opt->count() > 0) fn(c);
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(dsre::PipelineConfig&)>>> entries_;
};

}  // namespace

int main(int argc, char** argv) {
  using dsre::PipelineConfig;
  CLI::App app{"Distant-supervision relation extraction pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  Overrides ov;

  app.add_option("--config", f.config, "Pipeline config (JSON)");
  ov.add(&app, "--seed", f.seed, "Master seed", [](PipelineConfig& c, std::uint64_t v) { c.seed = v; });
  ov.add(&app, "--out", f.out, "Output directory", [](PipelineConfig& c, const std::string& v) { c.paths.out = v; });
  ov.add(&app, "--threads", f.threads, "Worker threads", [](PipelineConfig& c, int v) { c.threads = v; });

  auto kind_flag = [&](CLI::App* sub) {
    ov.add(sub, "--kind", f.kind, "Negative kind of the dataset/model: type1, type2 or mix",
           [](PipelineConfig& c, const std::string& v) { c.negative_kind = dsre::parse_negative_kind(v); });
  };
  auto model_flags = [&](CLI::App* sub) {
    ov.add(sub, "--encoder", f.encoder, "bow_linear, avg_embed_proj or token_attention",
           [](PipelineConfig& c, const std::string& v) { c.model.encoder = dsre::parse_encoder_variant(v); });
    ov.add(sub, "--fusion", f.fusion, "full, text_only or cui_only",
           [](PipelineConfig& c, const std::string& v) { c.model.fusion = dsre::parse_fusion(v); });
    ov.add(sub, "--epochs", f.epochs, "Training epochs", [](PipelineConfig& c, std::size_t v) { c.train.epochs = v; });
    ov.add(sub, "--lr", f.lr, "Learning rate", [](PipelineConfig& c, double v) { c.train.learning_rate = v; });
    ov.add(sub, "--batch-size", f.batch_size, "Bags per batch",
           [](PipelineConfig& c, std::size_t v) { c.train.batch_size = v; });
    ov.add(sub, "--optimizer", f.optimizer, "sgd or adam",
           [](PipelineConfig& c, const std::string& v) { c.train.optimizer = dsre::parse_optimizer(v); });
  };

  CLI::App* ingest = app.add_subcommand("ingest", "Tokenize and sentence-split the corpus");
  ov.add(ingest, "--corpus", f.corpus, "Corpus JSONL", [](PipelineConfig& c, const std::string& v) { c.paths.corpus = v; });

  CLI::App* extract = app.add_subcommand("extract-triplets", "Collect, extend and filter relation triplets");
  ov.add(extract, "--triplets", f.triplets, "Seed triplets TSV",
         [](PipelineConfig& c, const std::string& v) { c.paths.triplets = v; });
  ov.add(extract, "--pages", f.pages, "Semi-structured pages JSONL",
         [](PipelineConfig& c, const std::string& v) { c.paths.pages = v; });
  ov.add(extract, "--heading-rules", f.heading_rules, "Heading-to-relation rules JSON",
         [](PipelineConfig& c, const std::string& v) { c.paths.heading_rules = v; });
  ov.add(extract, "--max-entry-tokens", f.max_entry_tokens, "Longest list entry considered",
         [](PipelineConfig& c, std::size_t v) { c.max_entry_tokens = v; });

  app.add_subcommand("gen-pos", "Generate positive bags by distant supervision");

  CLI::App* gen_neg = app.add_subcommand("gen-neg", "Build the negative pool and Type 1 / Type 2 negatives");
  ov.add(gen_neg, "--pool-size", f.pool_size, "Negative pool size", [](PipelineConfig& c, std::size_t v) { c.pool_size = v; });
  ov.add(gen_neg, "--type2-k", f.type2_k, "Type 2 negatives to select (0: one per positive)",
         [](PipelineConfig& c, std::size_t v) { c.type2_k = v; });
  ov.add(gen_neg, "--word-embeddings", f.word_embeddings, "Word vectors (skip-gram is trained when absent)",
         [](PipelineConfig& c, const std::string& v) { c.paths.word_embeddings = v; });

  CLI::App* build = app.add_subcommand("build-dataset", "Assemble the type1, type2 and mix datasets");
  ov.add(build, "--split-fraction", f.split_fraction, "Train fraction",
         [](PipelineConfig& c, double v) { c.split_fraction = v; });

  CLI::App* train = app.add_subcommand("train", "Train the bag classifier");
  kind_flag(train);
  model_flags(train);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a trained model on its test split");
  kind_flag(eval);

  CLI::App* cross = app.add_subcommand("cross-test", "Evaluate a model on another dataset's test split");
  kind_flag(cross);
  ov.add(cross, "--against", f.against, "Negative kind of the dataset to test on",
         [](PipelineConfig& c, const std::string& v) { c.against = dsre::parse_negative_kind(v); });

  CLI::App* predict = app.add_subcommand("predict", "Label bags with a trained model");
  kind_flag(predict);
  ov.add(predict, "--input", f.input, "Bags JSONL (default: the dataset's test split)",
         [](PipelineConfig& c, const std::string& v) { c.input = v; });

  CLI::App* demo = app.add_subcommand("synth-demo", "Generate a synthetic corpus and run the whole pipeline");
  ov.add(demo, "--sentences", f.sentences, "Synthetic corpus size",
         [](PipelineConfig& c, std::size_t v) { c.synth_sentences = v; });
  model_flags(demo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  PipelineConfig config;
  try {
    if (!f.config.empty()) {
      config = dsre::load_config(f.config);
    } else if (sub == "synth-demo") {
      config = dsre::synth_demo_config();
    }
    ov.apply(config);
  } catch (const dsre::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return dsre::run(sub, config, std::cout, std::cerr);
}
