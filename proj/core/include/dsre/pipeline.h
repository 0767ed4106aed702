#ifndef DSRE_PIPELINE_H_
#define DSRE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dsre/embeddings.h"
#include "dsre/model.h"
#include "dsre/sampling.h"
#include "dsre/synth.h"
#include "dsre/train_eval.h"
#include "dsre/triplets.h"

namespace dsre {

// Declarative pipeline configuration. JSON layout:
//
//   {
//     "paths": {"corpus", "lexicon", "triplets", "hierarchy", "pages",
//               "heading_rules", "word_embeddings", "cui_embeddings", "out"},
//     "schema": {"relations": [...]},
//     "sampler": {"pool_size", "max_entry_tokens", "irrelevant_groups",
//                 "banned_semantic_types", "hierarchy_relations", "type2_k",
//                 "split_fraction", "negative_kind"},
//     "skipgram": {"dim", "window", "negatives", "epochs", "learning_rate", "min_count"},
//     "model": {"encoder", "fusion", "d_e", "d_r", "d_c", "n_s", "init_scale"},
//     "train": {"learning_rate", "l2", "epochs", "batch_size", "optimizer"},
//     "seed": 1,
//     "threads": 1
//   }
//
// Every key is optional. Relative paths resolve against the config file's
// directory. Unknown keys are rejected.
struct PipelineConfig {
  struct Paths {
    std::optional<std::filesystem::path> corpus, lexicon, triplets, hierarchy, pages, heading_rules,
        word_embeddings, cui_embeddings;
    std::filesystem::path out = "out";
  } paths;

  RelationSchema schema;
  std::size_t pool_size = 1000;
  std::size_t max_entry_tokens = kDefaultMaxEntryTokens;
  std::set<std::string> irrelevant_groups = {"CHEM", "GENE"};
  std::set<std::string> banned_semantic_types = {"Finding"};
  std::vector<std::string> hierarchy_relations;
  std::size_t type2_k = 0;  // 0: as many as there are positive bags
  double split_fraction = 0.8;
  NegativeKind negative_kind = NegativeKind::kType1;

  SkipGramOptions skipgram;
  ModelConfig model;
  TrainConfig train;

  std::uint64_t seed = 1;
  int threads = 1;

  // Subcommand arguments.
  std::optional<NegativeKind> against;          // cross-test target
  std::optional<std::filesystem::path> input;   // predict input bags
  std::size_t synth_sentences = 3000;           // synth-demo corpus size

  // Checks field ranges and that every referenced input path exists.
  void validate() const;
};

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& config);

const std::vector<std::string>& subcommands();

// Runs one stage; throws on failure.
void run_stage(std::string_view subcommand, const PipelineConfig& config, std::ostream& out);

// run_stage with exceptions mapped to exit codes: 0 ok, 1 validation,
// 2 runtime. Errors are reported on `err`.
int run(std::string_view subcommand, const PipelineConfig& config, std::ostream& out, std::ostream& err);

// Artifact names inside the output directory.
namespace artifacts {
inline constexpr std::string_view kCorpus = "corpus.jsonl";
inline constexpr std::string_view kTriplets = "triplets.tsv";
inline constexpr std::string_view kPositives = "positives.jsonl";
inline constexpr std::string_view kPool = "pool.jsonl";
inline constexpr std::string_view kType1 = "type1.jsonl";
inline constexpr std::string_view kType2 = "type2.jsonl";
inline constexpr std::string_view kWordEmbeddings = "word_embeddings.txt";
std::string dataset(NegativeKind kind);
std::string model(NegativeKind kind);
std::string loss_log(NegativeKind kind);
std::string metrics(NegativeKind kind);
std::string cross_test(NegativeKind trained, NegativeKind tested);
std::string predictions(NegativeKind kind);
}  // namespace artifacts

// Defaults for synth-demo: small dimensions so the run takes seconds.
PipelineConfig synth_demo_config();

// Writes the synthetic inputs (corpus, lexicon, triplets, hierarchy, pages,
// heading rules, CUI vectors and a config) into `dir` and returns the config.
PipelineConfig write_synth_inputs(const SynthWorld& world, const std::filesystem::path& dir,
                                  const PipelineConfig& base);

}  // namespace dsre

#endif  // DSRE_PIPELINE_H_
