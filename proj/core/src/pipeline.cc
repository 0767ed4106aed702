#include "dsre/pipeline.h"

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>

#include "dsre/corpus.h"
#include "dsre/lexicon.h"
#include "json.hpp"

namespace dsre {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ValidationError("config field " + field + ": " + what);
}

// Strict reader over one JSON object: typed getters, unknown keys rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) field_error(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  template <typename Fn>
  void field(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    std::string name = qualified(key);
    try {
      fn(*it, name);
    } catch (const json::exception& e) {
      field_error(name, e.what());
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      if (msg.rfind("config field ", 0) == 0) throw;
      field_error(name, msg);
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) field_error(qualified(k), "unknown field");
  }

 private:
  std::string qualified(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::size_t as_count(const json& v, const std::string& name) {
  if (!v.is_number_integer() || v.get<long long>() < 0) field_error(name, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_number(const json& v, const std::string& name) {
  if (!v.is_number()) field_error(name, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& name) {
  if (!v.is_string()) field_error(name, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> as_strings(const json& v, const std::string& name) {
  if (!v.is_array()) field_error(name, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(as_string(e, name));
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void check_exists(const std::optional<fs::path>& p, const char* field) {
  if (p && !fs::exists(*p)) field_error(std::string("paths.") + field, "file not found: " + p->string());
}

[[noreturn]] void missing_artifact(const fs::path& path, std::string_view stage) {
  throw ValidationError("missing " + path.filename().string() + " in " + path.parent_path().string() + ": run " +
                        std::string(stage) + " first");
}

class Stage {
 public:
  Stage(const PipelineConfig& c, std::ostream& out) : c_(c), out_(out), dir_(c.paths.out) {}

  void ingest() {
    CorpusStore corpus = ingest_corpus(require(c_.paths.corpus, "corpus", "ingest"), "jsonl-docs", c_.threads);
    write(artifacts::kCorpus, corpus.serialize());
    out_ << "ingest: " << corpus.size() << " documents, " << corpus.sentence_count() << " sentences";
    if (corpus.truncated_sentences()) out_ << ", " << corpus.truncated_sentences() << " truncated to "
                                           << kMaxSentenceTokens << " tokens";
    out_ << '\n';
  }

  void extract_triplets() {
    require_schema("extract-triplets");
    Lexicon lex = lexicon("extract-triplets");
    std::vector<std::string> warnings;
    TripletStore store;
    if (c_.paths.triplets) store = load_triplets(*c_.paths.triplets, c_.schema, &warnings);
    std::size_t extracted = 0;
    if (c_.paths.pages) {
      auto rules = heading_rules_from_json(read_file(require(c_.paths.heading_rules, "heading_rules", "extract-triplets")));
      for (const auto& page : parse_pages(read_file(*c_.paths.pages), c_.paths.pages->string())) {
        for (auto& t : extract_from_semistructured(page, rules, lex, c_.max_entry_tokens, &warnings)) {
          ++extracted;
          store.insert(std::move(t));
        }
      }
    }
    if (!c_.paths.triplets && !c_.paths.pages)
      throw ValidationError("extract-triplets needs paths.triplets or paths.pages in the config");
    HierarchyEdges h = hierarchy();
    std::size_t before = store.size();
    for (const auto& rel : c_.hierarchy_relations) {
      c_.schema.require(rel);
      store = extend_by_hierarchy(store, rel, h);
    }
    std::size_t extended = store.size() - before;
    store = filter_by_schema(store, c_.schema, lex, c_.banned_semantic_types);
    write(artifacts::kTriplets, store.serialize_tsv());
    report_warnings(warnings);
    out_ << "extract-triplets: " << store.size() << " triplets (" << extracted << " from pages, " << extended
         << " from the hierarchy)\n";
  }

  void gen_pos() {
    CorpusStore corpus = load_corpus();
    require_schema("gen-pos");
    Lexicon lex = lexicon("gen-pos");
    std::vector<std::string> warnings;
    TripletStore trips =
        parse_triplets(read_file(need(artifacts::kTriplets, "extract-triplets")), c_.schema, &warnings,
                       (dir_ / artifacts::kTriplets).string());
    auto bags = generate_positive_bags(corpus, lex, trips, c_.schema, c_.threads);
    write(artifacts::kPositives, serialize_bags(bags));
    std::size_t instances = 0;
    for (const auto& b : bags) instances += b.instances.size();
    report_warnings(warnings);
    out_ << "gen-pos: " << bags.size() << " positive bags, " << instances << " instances\n";
  }

  void gen_neg() {
    CorpusStore corpus = load_corpus();
    auto positives = load_bags(artifacts::kPositives, "gen-pos");
    require_schema("gen-neg");
    Lexicon lex = lexicon("gen-neg");
    if (positives.empty()) throw ValidationError("gen-neg: there are no positive bags");
    std::vector<std::string> warnings;
    SentenceMentions mentions = index_mentions(corpus, lex, c_.threads);
    auto pool = build_negative_pool(corpus, mentions, lex, c_.schema, c_.irrelevant_groups, c_.pool_size,
                                    derive_seed(c_.seed, "pool"), &warnings);
    auto type1 = generate_type1_negatives(positives, pool, lex, c_.schema, derive_seed(c_.seed, "type1"));
    WordEmbeddingTable words;
    if (c_.paths.word_embeddings) {
      words = load_word_embeddings(*c_.paths.word_embeddings);
    } else {
      SkipGramOptions sg = c_.skipgram;
      sg.seed = derive_seed(c_.seed, "skipgram");
      words = train_skipgram(corpus, sg);
    }
    write(artifacts::kWordEmbeddings, words.serialize());
    std::size_t k = c_.type2_k ? c_.type2_k : positives.size();
    auto type2 = select_type2_negatives(pool, positives, k, words, &warnings, c_.threads);
    write(artifacts::kPool, serialize_bags(pool));
    write(artifacts::kType1, serialize_bags(type1));
    write(artifacts::kType2, serialize_bags(type2));
    report_warnings(warnings);
    out_ << "gen-neg: pool " << pool.size() << ", type1 " << type1.size() << ", type2 " << type2.size() << '\n';
  }

  void build_dataset() {
    auto positives = load_bags(artifacts::kPositives, "gen-pos");
    auto type1 = load_bags(artifacts::kType1, "gen-neg");
    auto type2 = load_bags(artifacts::kType2, "gen-neg");
    for (NegativeKind kind : {NegativeKind::kType1, NegativeKind::kType2, NegativeKind::kMix}) {
      Dataset ds = assemble_datasets(positives, type1, type2, kind, c_.split_fraction, derive_seed(c_.seed, "dataset"));
      write(artifacts::dataset(kind), serialize_dataset(ds));
      out_ << "build-dataset: " << to_string(kind) << ": " << ds.indices(Split::kTrain).size() << " train, "
           << ds.indices(Split::kTest).size() << " test bags\n";
    }
  }

  void train() {
    Dataset ds = load_dataset(c_.negative_kind);
    require_schema("train");
    Lexicon lex = lexicon("train");
    CuiEmbeddingTable cuis = cui_table("train");
    std::optional<WordEmbeddingTable> words = word_table();
    ModelConfig mc = c_.model;
    mc.d_k = cuis.dim();
    mc.seed = derive_seed(c_.seed, "model");
    TrainConfig tc = c_.train;
    tc.seed = derive_seed(c_.seed, "train");
    TrainingResources res{&lex, &cuis, words ? &*words : nullptr, &c_.schema};
    if (words && words->dim() != mc.d_e)
      out_ << "warning: word embeddings have dimension " << words->dim() << ", model.d_e is " << mc.d_e
           << "; token embeddings start random\n";
    TrainResult r = dsre::train(ds, res, mc, tc);
    write(artifacts::model(c_.negative_kind), serialize_checkpoint(r.model.config, r.model.params, r.model.label_names));
    write(artifacts::loss_log(c_.negative_kind), loss_log_csv(r.loss_log));
    out_ << "train: " << to_string(c_.negative_kind) << ": " << r.epoch_loss.size() << " epochs";
    if (!r.epoch_loss.empty()) out_ << ", final epoch loss " << r.epoch_loss.back();
    out_ << '\n';
  }

  void eval() {
    TrainedModel m = load_model(c_.negative_kind);
    Dataset ds = load_dataset(c_.negative_kind);
    Lexicon lex = lexicon("eval");
    CuiEmbeddingTable cuis = cui_table("eval");
    Metrics metrics = evaluate(m, ds, Split::kTest, lex, cuis, schema_of(m), c_.threads);
    write(artifacts::metrics(c_.negative_kind), metrics_json(metrics));
    out_ << "eval: " << to_string(c_.negative_kind) << " test split\n" << metrics_table(metrics);
  }

  void cross_test() {
    if (!c_.against) throw ValidationError("cross-test needs the negative kind to test against (--against)");
    TrainedModel m = load_model(c_.negative_kind);
    Dataset a = load_dataset(c_.negative_kind);
    Dataset b = load_dataset(*c_.against);
    Lexicon lex = lexicon("cross-test");
    CuiEmbeddingTable cuis = cui_table("cross-test");
    CrossTestResult r = dsre::cross_test(m, a, b, lex, cuis, schema_of(m), c_.threads);
    write(artifacts::cross_test(c_.negative_kind, *c_.against), cross_test_json(r));
    out_ << "cross-test: trained on " << to_string(c_.negative_kind) << ", tested on " << to_string(*c_.against)
         << ": overall " << r.overall_accuracy << ", negatives " << r.negative_accuracy << " (" << r.negatives
         << " bags)\n";
  }

  void predict() {
    TrainedModel m = load_model(c_.negative_kind);
    Lexicon lex = lexicon("predict");
    CuiEmbeddingTable cuis = cui_table("predict");
    RelationSchema schema = schema_of(m);
    std::vector<Bag> bags;
    if (c_.input) {
      bags = parse_bags(read_file(*c_.input), c_.input->string());
    } else {
      Dataset ds = load_dataset(c_.negative_kind);
      for (std::size_t i : ds.indices(Split::kTest)) bags.push_back(ds.bags[i]);
    }
    std::string out;
    for (const auto& bag : bags) {
      Bag unlabeled = bag;
      if (!schema.contains(unlabeled.label)) unlabeled.label = std::string(kNegativeLabel);
      BagInput in = prepare_bag(unlabeled, lex, m.params.vocab(), cuis, schema);
      Prediction p = predict_bag(in, m.params, m.config);
      json probs = json::object();
      for (std::size_t l = 0; l < p.probs.size(); ++l) probs[m.label_names[l]] = p.probs[l];
      out += json{{"head_cui", bag.head_cui},
                  {"tail_cui", bag.tail_cui},
                  {"label", bag.label},
                  {"predicted", m.label_names[p.label]},
                  {"probs", probs},
                  {"attention", p.alpha}}
                 .dump() +
             "\n";
    }
    write(artifacts::predictions(c_.negative_kind), out);
    out_ << "predict: " << bags.size() << " bags -> " << artifacts::predictions(c_.negative_kind) << '\n';
  }

 private:
  fs::path require(const std::optional<fs::path>& p, const char* field, std::string_view stage) const {
    if (!p) throw ValidationError(std::string(stage) + " needs paths." + field + " in the config");
    return *p;
  }

  void require_schema(std::string_view stage) const {
    if (c_.schema.size() < 2) throw ValidationError(std::string(stage) + " needs a schema with at least one relation");
  }

  fs::path need(std::string_view name, std::string_view stage) const {
    fs::path p = dir_ / name;
    if (!fs::exists(p)) missing_artifact(p, stage);
    return p;
  }

  void write(std::string_view name, std::string_view contents) const {
    fs::create_directories(dir_);
    write_file_atomic(dir_ / name, contents);
  }

  void report_warnings(const std::vector<std::string>& warnings) const {
    for (const auto& w : warnings) out_ << "warning: " << w << '\n';
  }

  Lexicon lexicon(std::string_view stage) const { return load_lexicon(require(c_.paths.lexicon, "lexicon", stage)); }

  HierarchyEdges hierarchy() const { return c_.paths.hierarchy ? load_hierarchy(*c_.paths.hierarchy) : HierarchyEdges{}; }

  CuiEmbeddingTable cui_table(std::string_view stage) const {
    return load_cui_embeddings(require(c_.paths.cui_embeddings, "cui_embeddings", stage), hierarchy());
  }

  std::optional<WordEmbeddingTable> word_table() const {
    if (c_.paths.word_embeddings) return load_word_embeddings(*c_.paths.word_embeddings);
    fs::path p = dir_ / artifacts::kWordEmbeddings;
    if (fs::exists(p)) return load_word_embeddings(p);
    return std::nullopt;
  }

  CorpusStore load_corpus() const {
    fs::path p = need(artifacts::kCorpus, "ingest");
    return CorpusStore::deserialize(read_file(p), p.string());
  }

  std::vector<Bag> load_bags(std::string_view name, std::string_view stage) const {
    fs::path p = need(name, stage);
    return parse_bags(read_file(p), p.string());
  }

  Dataset load_dataset(NegativeKind kind) const {
    fs::path p = need(artifacts::dataset(kind), "build-dataset");
    return parse_dataset(read_file(p), p.string());
  }

  TrainedModel load_model(NegativeKind kind) const {
    fs::path p = need(artifacts::model(kind), "train");
    return parse_checkpoint(read_file(p));
  }

  // The config schema must agree with the labels the model was trained on.
  RelationSchema schema_of(const TrainedModel& m) const {
    std::vector<std::string> ids;
    for (const auto& l : c_.schema.labels()) ids.push_back(l.id);
    if (ids != m.label_names)
      throw ValidationError("config schema labels differ from the labels the model was trained with");
    return c_.schema;
  }

  const PipelineConfig& c_;
  std::ostream& out_;
  fs::path dir_;
};

void synth_demo(const PipelineConfig& base, std::ostream& out) {
  SynthOptions so;
  so.sentences = base.synth_sentences;
  so.triplets = std::max<std::size_t>(30, so.sentences / 10);
  so.diso_concepts = std::max<std::size_t>(20, so.triplets / 3);
  so.anat_concepts = std::max<std::size_t>(10, so.triplets / 8);
  so.chem_concepts = 20;
  so.gene_concepts = 12;
  so.seed = base.seed;
  so.cui_dim = base.model.d_k;
  SynthWorld world = make_synth_world(so);
  PipelineConfig c = write_synth_inputs(world, base.paths.out / "inputs", base);
  out << "synth-demo: inputs written to " << (base.paths.out / "inputs").string() << '\n';
  for (const char* stage : {"ingest", "extract-triplets", "gen-pos", "gen-neg", "build-dataset"}) run_stage(stage, c, out);
  const std::vector<NegativeKind> kinds = {NegativeKind::kType1, NegativeKind::kType2, NegativeKind::kMix};
  json summary = {{"seed", base.seed}, {"metrics", json::object()}, {"cross_test", json::object()}};
  for (NegativeKind kind : kinds) {
    PipelineConfig k = c;
    k.negative_kind = kind;
    run_stage("train", k, out);
    run_stage("eval", k, out);
    json m = json::parse(read_file(c.paths.out / artifacts::metrics(kind)));
    summary["metrics"][std::string(to_string(kind))] = {{"overall_accuracy", m["overall_accuracy"]},
                                                        {"positive_accuracy", m["positive_accuracy"]}};
  }
  for (NegativeKind a : kinds) {
    for (NegativeKind b : kinds) {
      if (a == b) continue;
      PipelineConfig k = c;
      k.negative_kind = a;
      k.against = b;
      run_stage("cross-test", k, out);
      json r = json::parse(read_file(c.paths.out / artifacts::cross_test(a, b)));
      summary["cross_test"][std::string(to_string(a)) + "_on_" + std::string(to_string(b))] = {
          {"overall_accuracy", r["overall_accuracy"]}, {"negative_accuracy", r["negative_accuracy"]}};
    }
  }
  fs::create_directories(c.paths.out);
  write_file_atomic(c.paths.out / "demo_summary.json", summary.dump(2) + "\n");
  out << "synth-demo: summary written to " << (c.paths.out / "demo_summary.json").string() << '\n';
}

const std::map<std::string, std::function<void(Stage&)>, std::less<>>& stage_table() {
  static const std::map<std::string, std::function<void(Stage&)>, std::less<>> t = {
      {"ingest", [](Stage& s) { s.ingest(); }},
      {"extract-triplets", [](Stage& s) { s.extract_triplets(); }},
      {"gen-pos", [](Stage& s) { s.gen_pos(); }},
      {"gen-neg", [](Stage& s) { s.gen_neg(); }},
      {"build-dataset", [](Stage& s) { s.build_dataset(); }},
      {"train", [](Stage& s) { s.train(); }},
      {"eval", [](Stage& s) { s.eval(); }},
      {"cross-test", [](Stage& s) { s.cross_test(); }},
      {"predict", [](Stage& s) { s.predict(); }},
  };
  return t;
}

json path_json(const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); }

}  // namespace

namespace artifacts {
std::string dataset(NegativeKind kind) { return "dataset_" + std::string(to_string(kind)) + ".jsonl"; }
std::string model(NegativeKind kind) { return "model_" + std::string(to_string(kind)) + ".json"; }
std::string loss_log(NegativeKind kind) { return "loss_" + std::string(to_string(kind)) + ".csv"; }
std::string metrics(NegativeKind kind) { return "metrics_" + std::string(to_string(kind)) + ".json"; }
std::string cross_test(NegativeKind trained, NegativeKind tested) {
  return "cross_" + std::string(to_string(trained)) + "_on_" + std::string(to_string(tested)) + ".json";
}
std::string predictions(NegativeKind kind) { return "predictions_" + std::string(to_string(kind)) + ".jsonl"; }
}  // namespace artifacts

void PipelineConfig::validate() const {
  check_exists(paths.corpus, "corpus");
  check_exists(paths.lexicon, "lexicon");
  check_exists(paths.triplets, "triplets");
  check_exists(paths.hierarchy, "hierarchy");
  check_exists(paths.pages, "pages");
  check_exists(paths.heading_rules, "heading_rules");
  check_exists(paths.word_embeddings, "word_embeddings");
  check_exists(paths.cui_embeddings, "cui_embeddings");
  if (input && !fs::exists(*input)) field_error("input", "file not found: " + input->string());
  if (pool_size == 0) field_error("sampler.pool_size", "must be >= 1");
  if (max_entry_tokens == 0) field_error("sampler.max_entry_tokens", "must be >= 1");
  if (!(split_fraction > 0 && split_fraction < 1)) field_error("sampler.split_fraction", "must be in (0, 1)");
  for (const auto& g : irrelevant_groups)
    if (!is_known_semantic_group(g)) field_error("sampler.irrelevant_groups", "unknown semantic group " + g);
  for (const auto& r : hierarchy_relations)
    if (!schema.contains(r)) field_error("sampler.hierarchy_relations", "relation " + r + " is not in the schema");
  if (threads < 1) field_error("threads", "must be >= 1");
  if (skipgram.dim == 0) field_error("skipgram.dim", "must be >= 1");
  if (model.d_e == 0) field_error("model.d_e", "must be >= 1");
  if (model.d_r == 0) field_error("model.d_r", "must be >= 1");
  if (model.d_c == 0) field_error("model.d_c", "must be >= 1");
  if (model.d_k == 0) field_error("model.d_k", "must be >= 1");
  if (model.n_s == 0) field_error("model.n_s", "must be >= 1");
  if (!(model.init_scale > 0)) field_error("model.init_scale", "must be > 0");
  if (!(train.learning_rate > 0)) field_error("train.learning_rate", "must be > 0");
  if (!(train.l2 >= 0)) field_error("train.l2", "must be >= 0");
  if (train.batch_size == 0) field_error("train.batch_size", "must be >= 1");
  if (synth_sentences == 0) field_error("synth_sentences", "must be >= 1");
}

PipelineConfig parse_config(std::string_view text, const fs::path& base) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw ValidationError("config is not valid JSON");
  PipelineConfig c;
  ObjectReader r(root, "");
  r.field("paths", [&](const json& v, const std::string& name) {
    ObjectReader p(v, name);
    auto opt_path = [&](const char* key, std::optional<fs::path>& dst) {
      p.field(key, [&](const json& x, const std::string& n) {
        if (!x.is_null()) dst = resolve(base, as_string(x, n));
      });
    };
    opt_path("corpus", c.paths.corpus);
    opt_path("lexicon", c.paths.lexicon);
    opt_path("triplets", c.paths.triplets);
    opt_path("hierarchy", c.paths.hierarchy);
    opt_path("pages", c.paths.pages);
    opt_path("heading_rules", c.paths.heading_rules);
    opt_path("word_embeddings", c.paths.word_embeddings);
    opt_path("cui_embeddings", c.paths.cui_embeddings);
    p.field("out", [&](const json& x, const std::string& n) { c.paths.out = resolve(base, as_string(x, n)); });
    p.finish();
  });
  r.field("schema", [&](const json& v, const std::string&) { c.schema = RelationSchema::from_json(v.dump()); });
  r.field("sampler", [&](const json& v, const std::string& name) {
    ObjectReader s(v, name);
    s.field("pool_size", [&](const json& x, const std::string& n) { c.pool_size = as_count(x, n); });
    s.field("max_entry_tokens", [&](const json& x, const std::string& n) { c.max_entry_tokens = as_count(x, n); });
    s.field("irrelevant_groups", [&](const json& x, const std::string& n) {
      auto v2 = as_strings(x, n);
      c.irrelevant_groups = {v2.begin(), v2.end()};
    });
    s.field("banned_semantic_types", [&](const json& x, const std::string& n) {
      auto v2 = as_strings(x, n);
      c.banned_semantic_types = {v2.begin(), v2.end()};
    });
    s.field("hierarchy_relations", [&](const json& x, const std::string& n) { c.hierarchy_relations = as_strings(x, n); });
    s.field("type2_k", [&](const json& x, const std::string& n) { c.type2_k = as_count(x, n); });
    s.field("split_fraction", [&](const json& x, const std::string& n) { c.split_fraction = as_number(x, n); });
    s.field("negative_kind",
            [&](const json& x, const std::string& n) { c.negative_kind = parse_negative_kind(as_string(x, n)); });
    s.finish();
  });
  r.field("skipgram", [&](const json& v, const std::string& name) {
    ObjectReader s(v, name);
    s.field("dim", [&](const json& x, const std::string& n) { c.skipgram.dim = as_count(x, n); });
    s.field("window", [&](const json& x, const std::string& n) { c.skipgram.window = as_count(x, n); });
    s.field("negatives", [&](const json& x, const std::string& n) { c.skipgram.negatives = as_count(x, n); });
    s.field("epochs", [&](const json& x, const std::string& n) { c.skipgram.epochs = as_count(x, n); });
    s.field("learning_rate", [&](const json& x, const std::string& n) { c.skipgram.learning_rate = as_number(x, n); });
    s.field("min_count", [&](const json& x, const std::string& n) { c.skipgram.min_count = as_count(x, n); });
    s.finish();
  });
  r.field("model", [&](const json& v, const std::string& name) {
    ObjectReader m(v, name);
    m.field("encoder", [&](const json& x, const std::string& n) { c.model.encoder = parse_encoder_variant(as_string(x, n)); });
    m.field("fusion", [&](const json& x, const std::string& n) { c.model.fusion = parse_fusion(as_string(x, n)); });
    m.field("d_e", [&](const json& x, const std::string& n) { c.model.d_e = as_count(x, n); });
    m.field("d_r", [&](const json& x, const std::string& n) { c.model.d_r = as_count(x, n); });
    m.field("d_c", [&](const json& x, const std::string& n) { c.model.d_c = as_count(x, n); });
    m.field("d_k", [&](const json& x, const std::string& n) { c.model.d_k = as_count(x, n); });
    m.field("n_s", [&](const json& x, const std::string& n) { c.model.n_s = as_count(x, n); });
    m.field("init_scale", [&](const json& x, const std::string& n) { c.model.init_scale = as_number(x, n); });
    m.finish();
  });
  r.field("train", [&](const json& v, const std::string& name) {
    ObjectReader t(v, name);
    t.field("learning_rate", [&](const json& x, const std::string& n) { c.train.learning_rate = as_number(x, n); });
    t.field("l2", [&](const json& x, const std::string& n) { c.train.l2 = as_number(x, n); });
    t.field("epochs", [&](const json& x, const std::string& n) { c.train.epochs = as_count(x, n); });
    t.field("batch_size", [&](const json& x, const std::string& n) { c.train.batch_size = as_count(x, n); });
    t.field("optimizer", [&](const json& x, const std::string& n) { c.train.optimizer = parse_optimizer(as_string(x, n)); });
    t.finish();
  });
  r.field("seed", [&](const json& x, const std::string& n) {
    if (!x.is_number_unsigned()) field_error(n, "expected a non-negative integer");
    c.seed = x.get<std::uint64_t>();
  });
  r.field("threads", [&](const json& x, const std::string& n) {
    std::size_t t = as_count(x, n);
    if (t == 0 || t > 1024) field_error(n, "must be in [1, 1024]");
    c.threads = static_cast<int>(t);
  });
  r.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
  json relations = json::parse(c.schema.to_json());
  json j = {
      {"paths",
       {{"corpus", path_json(c.paths.corpus)},
        {"lexicon", path_json(c.paths.lexicon)},
        {"triplets", path_json(c.paths.triplets)},
        {"hierarchy", path_json(c.paths.hierarchy)},
        {"pages", path_json(c.paths.pages)},
        {"heading_rules", path_json(c.paths.heading_rules)},
        {"word_embeddings", path_json(c.paths.word_embeddings)},
        {"cui_embeddings", path_json(c.paths.cui_embeddings)},
        {"out", c.paths.out.generic_string()}}},
      {"schema", relations},
      {"sampler",
       {{"pool_size", c.pool_size},
        {"max_entry_tokens", c.max_entry_tokens},
        {"irrelevant_groups", c.irrelevant_groups},
        {"banned_semantic_types", c.banned_semantic_types},
        {"hierarchy_relations", c.hierarchy_relations},
        {"type2_k", c.type2_k},
        {"split_fraction", c.split_fraction},
        {"negative_kind", std::string(to_string(c.negative_kind))}}},
      {"skipgram",
       {{"dim", c.skipgram.dim},
        {"window", c.skipgram.window},
        {"negatives", c.skipgram.negatives},
        {"epochs", c.skipgram.epochs},
        {"learning_rate", c.skipgram.learning_rate},
        {"min_count", c.skipgram.min_count}}},
      {"model",
       {{"encoder", std::string(to_string(c.model.encoder))},
        {"fusion", std::string(to_string(c.model.fusion))},
        {"d_e", c.model.d_e},
        {"d_r", c.model.d_r},
        {"d_c", c.model.d_c},
        {"d_k", c.model.d_k},
        {"n_s", c.model.n_s},
        {"init_scale", c.model.init_scale}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"l2", c.train.l2},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"optimizer", std::string(to_string(c.train.optimizer))}}},
      {"seed", c.seed},
      {"threads", c.threads}};
  return j.dump(2) + "\n";
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"ingest",     "extract-triplets", "gen-pos", "gen-neg",
                                             "build-dataset", "train",          "eval",    "cross-test",
                                             "predict",    "synth-demo"};
  return s;
}

void run_stage(std::string_view subcommand, const PipelineConfig& config, std::ostream& out) {
  config.validate();
  if (subcommand == "synth-demo") return synth_demo(config, out);
  auto it = stage_table().find(subcommand);
  if (it == stage_table().end()) throw ValidationError("unknown subcommand \"" + std::string(subcommand) + "\"");
  Stage stage(config, out);
  it->second(stage);
}

int run(std::string_view subcommand, const PipelineConfig& config, std::ostream& out, std::ostream& err) {
  try {
    run_stage(subcommand, config, out);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

PipelineConfig synth_demo_config() {
  PipelineConfig c;
  c.skipgram.dim = 32;
  c.skipgram.epochs = 3;
  c.model.d_e = 32;
  c.model.d_r = 32;
  c.model.d_c = 16;
  c.model.d_k = 16;
  c.train.learning_rate = 1e-2;
  c.train.epochs = 15;
  c.train.batch_size = 16;
  return c;
}

PipelineConfig write_synth_inputs(const SynthWorld& w, const fs::path& dir, const PipelineConfig& base) {
  fs::create_directories(dir);
  write_file_atomic(dir / "corpus.jsonl", w.corpus_jsonl);
  write_file_atomic(dir / "lexicon.tsv", serialize_lexicon(w.lexicon));
  write_file_atomic(dir / "triplets.tsv", w.triplets.serialize_tsv());
  std::string h = "child_cui\tparent_cui\n";
  for (const auto& [child, parent] : w.hierarchy) h += child + '\t' + parent + '\n';
  write_file_atomic(dir / "hierarchy.tsv", h);
  write_file_atomic(dir / "pages.jsonl", w.pages_jsonl);
  write_file_atomic(dir / "heading_rules.json", w.heading_rules_json);
  write_file_atomic(dir / "cui_embeddings.txt", w.cui_vectors.serialize());

  // Paths in the written config are relative to `dir`, so the file is the
  // same wherever the demo runs.
  PipelineConfig rel = base;
  rel.paths.corpus = "corpus.jsonl";
  rel.paths.lexicon = "lexicon.tsv";
  rel.paths.triplets = "triplets.tsv";
  rel.paths.hierarchy = "hierarchy.tsv";
  rel.paths.pages = "pages.jsonl";
  rel.paths.heading_rules = "heading_rules.json";
  rel.paths.cui_embeddings = "cui_embeddings.txt";
  rel.paths.word_embeddings.reset();
  rel.paths.out = "..";
  rel.schema = w.schema;
  rel.irrelevant_groups = w.irrelevant_groups;
  rel.hierarchy_relations = {"IN"};
  rel.model.d_k = w.cui_vectors.dim();
  write_file_atomic(dir / "config.json", config_to_json(rel));

  PipelineConfig abs = rel;
  for (auto* p : {&abs.paths.corpus, &abs.paths.lexicon, &abs.paths.triplets, &abs.paths.hierarchy, &abs.paths.pages,
                  &abs.paths.heading_rules, &abs.paths.cui_embeddings})
    *p = dir / **p;
  abs.paths.out = base.paths.out;
  return abs;
}

}  // namespace dsre
