#include "dsre/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

struct GroupSpec {
  const char* group;
  const char* semantic_type;
  std::array<const char*, 3> suffixes;
};

constexpr std::array<GroupSpec, 4> kGroups = {{
    {"DISO", "Disease or Syndrome", {"itis", "osis", "emia"}},
    {"ANAT", "Body Part, Organ, or Organ Component", {"um", "ula", "ex"}},
    {"CHEM", "Pharmacologic Substance", {"ine", "ol", "ide"}},
    {"GENE", "Gene or Genome", {"ase", "in", "or"}},
}};

constexpr std::array<const char*, 12> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"};
constexpr std::array<const char*, 5> kVowels = {"a", "e", "i", "o", "u"};

struct Templates {
  std::vector<std::string> forward;   // {A} head, {B} tail
  std::vector<std::string> backward;  // tail mentioned first
  std::string long_distance;          // title holds the head, {B} the tail
};

const std::map<std::string, Templates>& relation_templates() {
  static const std::map<std::string, Templates> t = {
      {"DDx",
       {{"{A} is often confused with {B}.", "{A} should be distinguished from {B}.",
         "Differentiating {A} from {B} can be difficult."},
        {"{B} is often confused with {A}."},
        "It is often confused with {B}."}},
      {"MC",
       {{"{A} may cause {B}.", "{A} can lead to {B} in severe cases."},
        {"{B} is frequently caused by {A}."},
        "It may cause {B}."}},
      {"IN",
       {{"{A} occurs in the {B}.", "{A} typically affects the {B}."},
        {"Lesions of the {B} are typical of {A}."},
        "It occurs in the {B}."}},
  };
  return t;
}

const std::vector<std::string> kPoolTemplates = {"{A} was combined with {B}.", "{A} interacts with {B} in vitro.",
                                                 "Levels of {A} and {B} were measured."};
const std::vector<std::string> kFillers = {"The patient was stable.", "Follow-up was uneventful.",
                                           "Further studies are needed.", "Treatment included {A}.",
                                           "Expression of {A} was elevated."};
const std::vector<std::string> kConnectives = {"with", "and", "near", "after", "without", "or", "then"};
const std::vector<std::vector<std::string>> kHeadings = {
    {"Overview"}, {"Clinical features"}, {"Clinical features", "Complications"}, {"Diagnosis"}, {"Pathology"}};

std::string fill_template(std::string tmpl, const std::string& a, const std::string& b) {
  auto sub = [&](const std::string& key, const std::string& val) {
    for (std::size_t p; (p = tmpl.find(key)) != std::string::npos;) tmpl.replace(p, key.size(), val);
  };
  sub("{A}", a);
  sub("{B}", b);
  if (!tmpl.empty() && tmpl[0] >= 'a' && tmpl[0] <= 'z') tmpl[0] = static_cast<char>(tmpl[0] - 'a' + 'A');
  return tmpl;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

class Namer {
 public:
  explicit Namer(std::uint64_t seed) : rng_(seed) {}

  std::string word(const char* suffix) {
    for (;;) {
      std::string w;
      for (int s = 0; s < 2; ++s) {
        w += kOnsets[std::uniform_int_distribution<std::size_t>(0, kOnsets.size() - 1)(rng_)];
        w += kVowels[std::uniform_int_distribution<std::size_t>(0, kVowels.size() - 1)(rng_)];
      }
      w += suffix;
      if (used_.insert(w).second) return w;
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::unordered_set<std::string> used_;
};

}  // namespace

RelationSchema synth_schema() {
  return RelationSchema({{"DDx", false, "DISO", "DISO", std::nullopt},
                         {"MC", true, "DISO", "DISO", std::nullopt},
                         {"IN", true, "DISO", "ANAT", std::nullopt}});
}

SynthWorld make_synth_world(const SynthOptions& opt) {
  if (opt.diso_concepts < 3 || opt.anat_concepts < 2 || opt.chem_concepts + opt.gene_concepts < 2)
    throw ValidationError("synthetic world needs at least 3 DISO, 2 ANAT and 2 irrelevant concepts");
  if (opt.sentences_per_doc == 0) throw ValidationError("sentences_per_doc must be >= 1");

  SynthWorld w;
  w.schema = synth_schema();
  w.irrelevant_groups = {"CHEM", "GENE"};

  Namer namer(derive_seed(opt.seed, "names"));
  std::mt19937_64& nrng = namer.rng();
  std::vector<Concept> concepts;
  std::map<std::string, std::vector<std::size_t>> by_group;
  const std::array<std::size_t, 4> counts = {opt.diso_concepts, opt.anat_concepts, opt.chem_concepts,
                                             opt.gene_concepts};
  for (std::size_t g = 0; g < kGroups.size(); ++g) {
    for (std::size_t i = 0; i < counts[g]; ++i) {
      Concept c;
      char cui[16];
      std::snprintf(cui, sizeof(cui), "C%07zu", concepts.size() + 1);
      c.cui = cui;
      const auto& sfx = kGroups[g].suffixes;
      const char* suffix = sfx[std::uniform_int_distribution<std::size_t>(0, sfx.size() - 1)(nrng)];
      c.preferred_name = namer.word(suffix);
      if (std::bernoulli_distribution(0.3)(nrng)) c.preferred_name = namer.word("") + " " + c.preferred_name;
      if (std::bernoulli_distribution(0.3)(nrng)) c.synonyms.push_back(namer.word(suffix));
      c.semantic_type = kGroups[g].semantic_type;
      c.semantic_group = kGroups[g].group;
      by_group[c.semantic_group].push_back(concepts.size());
      concepts.push_back(std::move(c));
    }
  }

  std::mt19937_64 rng(derive_seed(opt.seed, "world"));

  // Part-of forest over anatomy, plus a few broader disorders.
  for (const char* g : {"ANAT", "DISO"}) {
    const auto& ids = by_group[g];
    double p = std::string_view(g) == "ANAT" ? 0.6 : 0.2;
    for (std::size_t i = 1; i < ids.size(); ++i) {
      if (!std::bernoulli_distribution(p)(rng)) continue;
      std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      w.hierarchy.emplace_back(concepts[ids[i]].cui, concepts[ids[j]].cui);
    }
  }

  // Triplets cycle through the labels; no unordered pair carries two labels.
  const std::vector<std::string> labels = {"DDx", "MC", "IN"};
  std::set<std::string> used_pairs;
  std::vector<Triplet> trips;
  const auto& diso = by_group["DISO"];
  const auto& anat = by_group["ANAT"];
  for (std::size_t n = 0, attempts = 0; n < opt.triplets; ++attempts) {
    if (attempts > 100 * (opt.triplets + 10)) throw ValidationError("not enough concepts for the requested triplets");
    const std::string& label = labels[n % labels.size()];
    const Concept& h = concepts[pick(diso, rng)];
    const Concept& t = concepts[pick(label == "IN" ? anat : diso, rng)];
    if (h.cui == t.cui) continue;
    if (!used_pairs.insert(pair_key(h.cui, t.cui)).second) continue;
    trips.push_back({h.cui, label, t.cui, "synthetic"});
    ++n;
  }
  for (const auto& t : trips) w.triplets.insert(t);

  auto name = [&](const std::string& cui) -> const std::string& {
    for (const auto& c : concepts)
      if (c.cui == cui) return c.preferred_name;
    throw Error("unknown cui " + cui);
  };
  auto surface = [&](const Concept& c) -> const std::string& {
    if (!c.synonyms.empty() && std::bernoulli_distribution(0.3)(rng)) return c.synonyms.front();
    return c.preferred_name;
  };
  std::vector<std::size_t> irrelevant = by_group["CHEM"];
  irrelevant.insert(irrelevant.end(), by_group["GENE"].begin(), by_group["GENE"].end());
  std::vector<std::size_t> all(concepts.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::map<std::string, std::size_t> cui_index;
  for (std::size_t i = 0; i < concepts.size(); ++i) cui_index[concepts[i].cui] = i;

  auto relation_sentence = [&](const Triplet& t) {
    const Templates& tm = relation_templates().at(t.relation);
    const Concept& h = concepts[cui_index[t.head_cui]];
    const Concept& tl = concepts[cui_index[t.tail_cui]];
    if (std::bernoulli_distribution(0.25)(rng)) return fill_template(pick(tm.backward, rng), surface(h), surface(tl));
    return fill_template(pick(tm.forward, rng), surface(h), surface(tl));
  };
  auto pool_sentence = [&] {
    std::size_t a = pick(irrelevant, rng), b;
    do b = pick(irrelevant, rng);
    while (b == a);
    return fill_template(pick(kPoolTemplates, rng), surface(concepts[a]), surface(concepts[b]));
  };
  auto noise_sentence = [&] {
    std::size_t k = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    std::string s = "Reported";
    for (std::size_t i = 0; i < k; ++i) {
      if (i) s += " " + pick(kConnectives, rng);
      s += " " + surface(concepts[pick(all, rng)]);
    }
    return s + ".";
  };
  auto filler_sentence = [&] { return fill_template(pick(kFillers, rng), surface(concepts[pick(irrelevant, rng)]), ""); };

  const std::size_t docs = (opt.sentences + opt.sentences_per_doc - 1) / opt.sentences_per_doc;
  std::size_t next_triplet = 0;
  std::size_t emitted = 0;
  std::string corpus;
  for (std::size_t d = 0; d < docs; ++d) {
    std::size_t quota = std::min(opt.sentences_per_doc, opt.sentences - emitted);
    std::vector<std::string> sentences;
    std::string title;
    if (!trips.empty() && std::bernoulli_distribution(opt.titled_doc_rate)(rng)) {
      const Triplet& t = pick(trips, rng);
      title = fill_template(name(t.head_cui) + " overview", "", "");
      const Concept& tl = concepts[cui_index[t.tail_cui]];
      sentences.push_back(fill_template(relation_templates().at(t.relation).long_distance, "", surface(tl)));
      while (sentences.size() < quota)
        sentences.push_back(std::bernoulli_distribution(0.5)(rng) ? pool_sentence() : filler_sentence());
    } else {
      title = "Case series " + std::to_string(d + 1);
      while (sentences.size() < quota) {
        double r = std::uniform_real_distribution<double>(0, 1)(rng);
        if (!trips.empty() && (next_triplet < trips.size() || r < opt.relation_rate)) {
          const Triplet& t = next_triplet < trips.size() ? trips[next_triplet++] : pick(trips, rng);
          sentences.push_back(relation_sentence(t));
        } else if (r < opt.relation_rate + opt.pool_rate) {
          sentences.push_back(pool_sentence());
        } else if (r < opt.relation_rate + opt.pool_rate + opt.noise_rate) {
          sentences.push_back(noise_sentence());
        } else {
          sentences.push_back(filler_sentence());
        }
      }
    }
    emitted += sentences.size();
    std::size_t nsec = std::min<std::size_t>(sentences.size(), std::uniform_int_distribution<std::size_t>(1, 3)(rng));
    json secs = json::array();
    for (std::size_t s = 0; s < nsec; ++s) {
      std::size_t lo = s * sentences.size() / nsec, hi = (s + 1) * sentences.size() / nsec;
      std::string text;
      for (std::size_t k = lo; k < hi; ++k) text += (k > lo ? " " : "") + sentences[k];
      secs.push_back({{"headings", pick(kHeadings, rng)}, {"text", text}});
    }
    char id[32];
    std::snprintf(id, sizeof(id), "doc%05zu", d + 1);
    corpus += json{{"doc_id", id}, {"title", title}, {"sections", secs}}.dump() + "\n";
  }
  w.corpus_jsonl = std::move(corpus);

  // One reference page per head concept, listing its partners by relation.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> pages;
  for (const auto& t : trips) pages[t.head_cui][t.relation].push_back(name(t.tail_cui));
  const std::map<std::string, std::string> heading_of = {
      {"DDx", "Differential Diagnosis"}, {"MC", "Complications"}, {"IN", "Location"}};
  for (const auto& [head, rels] : pages) {
    json secs = json::array();
    for (const auto& [rel, entries] : rels) secs.push_back({{"heading", heading_of.at(rel)}, {"entries", entries}});
    secs.push_back({{"heading", "History"}, {"entries", {"first described in " + std::to_string(1900 + secs.size())}}});
    w.pages_jsonl += json{{"title", name(head)}, {"sections", secs}}.dump() + "\n";
  }
  w.heading_rules_json = json::array({{{"pattern", "differential diagnosis"}, {"match", "exact"}, {"relation", "DDx"}},
                                      {{"pattern", "complication"}, {"match", "prefix"}, {"relation", "MC"}},
                                      {{"pattern", "location"}, {"match", "exact"}, {"relation", "IN"}}})
                             .dump(2) +
                         "\n";

  std::mt19937_64 vrng(derive_seed(opt.seed, "cui-vectors"));
  std::normal_distribution<double> normal(0.0, 1.0);
  w.cui_vectors = EmbeddingTable(opt.cui_dim);
  Vector v(opt.cui_dim);
  for (const auto& c : concepts) {
    for (auto& x : v) x = normal(vrng);
    if (std::bernoulli_distribution(opt.missing_cui_rate)(vrng)) continue;
    w.cui_vectors.set(c.cui, v);
  }

  w.lexicon = Lexicon(std::move(concepts));
  return w;
}

FusionTask make_fusion_task(const FusionTaskOptions& opt) {
  if (opt.labels < 2) throw ValidationError("fusion task needs at least 2 labels");
  if (opt.bags < 10 || opt.instances_per_bag == 0) throw ValidationError("fusion task needs bags and instances");
  std::mt19937_64 rng(derive_seed(opt.seed, "fusion"));
  std::normal_distribution<double> normal(0.0, 1.0);

  FusionTask task;
  task.cui_dim = opt.cui_dim;
  task.label_names.push_back(std::string(kNegativeLabel));
  for (std::size_t l = 1; l < opt.labels; ++l) task.label_names.push_back("R" + std::to_string(l));

  Tokens words;
  for (std::size_t i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  Tokens cues;
  for (std::size_t l = 0; l < opt.labels; ++l) cues.push_back("cue" + std::to_string(l));
  Tokens vocab_tokens = words;
  vocab_tokens.insert(vocab_tokens.end(), cues.begin(), cues.end());
  std::sort(vocab_tokens.begin(), vocab_tokens.end());
  task.vocab = Vocabulary(vocab_tokens);

  // Unit directions, one per label.
  std::vector<Vector> dirs(opt.labels, Vector(opt.cui_dim));
  for (auto& d : dirs) {
    double n = 0;
    for (auto& x : d) {
      x = normal(rng);
      n += x * x;
    }
    for (auto& x : d) x /= std::sqrt(n);
  }
  const std::string mask = group_mask_token("DISO");
  for (std::size_t b = 0; b < opt.bags; ++b) {
    std::size_t label = std::uniform_int_distribution<std::size_t>(0, opt.labels - 1)(rng);
    bool textual = b % 2 == 0;
    BagInput in;
    in.label = label;
    for (std::size_t i = 0; i < opt.instances_per_bag; ++i) {
      Tokens toks = {mask, pick(words, rng), pick(words, rng), mask, pick(words, rng)};
      if (textual) toks.insert(toks.begin() + 2, cues[label]);
      toks.push_back(std::string(kSepToken));
      std::vector<std::uint32_t> ids;
      for (const auto& t : toks) ids.push_back(task.vocab.id(t));
      in.instances.push_back(std::move(ids));
    }
    in.k1.resize(opt.cui_dim);
    in.k2.resize(opt.cui_dim);
    for (std::size_t j = 0; j < opt.cui_dim; ++j) {
      in.k1[j] = textual ? 0.5 * normal(rng) : 4.0 * dirs[label][j] + 0.3 * normal(rng);
      in.k2[j] = 0.5 * normal(rng);
    }
    task.inputs.push_back(std::move(in));
  }
  std::vector<std::size_t> order(opt.bags);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cut = static_cast<std::size_t>(std::lround(opt.train_fraction * static_cast<double>(opt.bags)));
  task.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  task.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  return task;
}

}  // namespace dsre
