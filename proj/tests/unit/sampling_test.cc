#include "dsre/sampling.h"

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dsre/synth.h"
#include "oracles.h"

namespace dsre {
namespace {

RelationSchema medical_schema() {
  return RelationSchema({{"DDx", false, "DISO", "DISO", {}},
                         {"MC", true, "DISO", "DISO", "MBCB"},
                         {"MBCB", true, "DISO", "DISO", "MC"},
                         {"IN", true, "DISO", "ANAT", {}}});
}

Lexicon small_lexicon() {
  return Lexicon({{"C0011849", "diabetes", {}, "Disease or Syndrome", "DISO"},
                  {"C1262477", "weight loss", {}, "Finding", "DISO"},
                  {"C0020538", "hypertension", {}, "Disease or Syndrome", "DISO"},
                  {"C0018787", "heart", {}, "Body Part", "ANAT"},
                  {"C0022646", "kidney", {}, "Body Part", "ANAT"},
                  {"C0004057", "aspirin", {}, "Pharmacologic Substance", "CHEM"},
                  {"C0020740", "ibuprofen", {}, "Pharmacologic Substance", "CHEM"},
                  {"C0025598", "metformin", {}, "Pharmacologic Substance", "CHEM"}});
}

CorpusStore corpus_of(std::vector<std::pair<std::string, std::string>> docs) {
  CorpusStore c;
  int i = 0;
  for (auto& [title, text] : docs) c.add(build_document("d" + std::to_string(i++), title, {{{"Section"}, text}}));
  return c;
}

TripletStore store_of(std::vector<Triplet> ts) {
  TripletStore s;
  for (auto& t : ts) s.insert(std::move(t));
  return s;
}

TEST(Decompose, FiveParts) {
  Tokens s = {"a", "causes", "b", "in", "children"};
  Decomposition d = decompose(s, {0, 1}, {2, 3});
  EXPECT_EQ(d.head, Tokens{});
  EXPECT_EQ(d.e1, Tokens{"a"});
  EXPECT_EQ(d.middle, Tokens{"causes"});
  EXPECT_EQ(d.e2, Tokens{"b"});
  EXPECT_EQ(d.tail, (Tokens{"in", "children"}));
  EXPECT_EQ(decompose(s, {2, 3}, {0, 1}), d);
}

TEST(Decompose, AdjacentEntitiesHaveEmptyMiddle) {
  EXPECT_TRUE(decompose({"x", "y", "z"}, {0, 1}, {1, 2}).middle.empty());
  EXPECT_THROW(decompose({"x", "y", "z"}, {0, 2}, {1, 3}), ValidationError);
}

TEST(Decompose, ConcatenationIdentityOnRandomSpans) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 500; ++round) {
    std::size_t n = 2 + rng() % 30;
    Tokens s;
    for (std::size_t i = 0; i < n; ++i) s.push_back("t" + std::to_string(rng() % 7));
    std::size_t a0 = rng() % (n - 1), a1 = a0 + 1 + rng() % (n - a0 - 1);
    std::size_t b0 = a1 + rng() % (n - a1), b1 = b0 + 1 + rng() % (n - b0);
    if (b1 > n) continue;
    Span a{a0, a1}, b{b0, b1};
    EXPECT_EQ(decompose(s, a, b).concat(), s);
    EXPECT_EQ(decompose(s, b, a).concat(), s);
  }
}

TEST(NearestPair, SmallestGapThenLeftmost) {
  Span a, b;
  ASSERT_TRUE(nearest_pair({{0, 1}, {6, 7}}, {{3, 4}, {9, 10}}, &a, &b));
  EXPECT_EQ(a, (Span{0, 1}));  // gap 2 twice: leftmost pair wins
  EXPECT_EQ(b, (Span{3, 4}));
  EXPECT_FALSE(nearest_pair({}, {{0, 1}}, &a, &b));
}

TEST(GeneratePositiveBags, ShortDistanceInstance) {
  auto corpus = corpus_of({{"Notes", "Diabetes often causes weight loss."}});
  auto bags = generate_positive_bags(corpus, small_lexicon(), store_of({{"C0011849", "MC", "C1262477", "t"}}),
                                     medical_schema());
  ASSERT_EQ(bags.size(), 1u);
  EXPECT_EQ(bags[0].label, "MC");
  ASSERT_EQ(bags[0].instances.size(), 1u);
  const Instance& i = bags[0].instances[0];
  EXPECT_EQ(i.distance, Distance::kShort);
  EXPECT_EQ(i.decomposition.middle, (Tokens{"often", "causes"}));
  EXPECT_EQ(i.decomposition.concat(), i.sentence_tokens);
}

TEST(GeneratePositiveBags, LongDistanceFromTitle) {
  auto corpus = corpus_of({{"Diabetes", "Patients report weight loss."}});
  auto bags = generate_positive_bags(corpus, small_lexicon(), store_of({{"C0011849", "MC", "C1262477", "t"}}),
                                     medical_schema());
  ASSERT_EQ(bags.size(), 1u);
  const Instance& i = bags[0].instances[0];
  EXPECT_EQ(i.distance, Distance::kLong);
  EXPECT_TRUE(i.e1.in_title);
  EXPECT_EQ(i.e1.cui, "C0011849");
  EXPECT_TRUE(i.decomposition.head.empty());
  EXPECT_EQ(i.decomposition.e1, Tokens{"diabetes"});
}

TEST(GeneratePositiveBags, ReversedSurfaceOrderUsesInverse) {
  auto corpus = corpus_of({{"Notes", "Weight loss is caused by diabetes."}});
  auto bags = generate_positive_bags(corpus, small_lexicon(), store_of({{"C0011849", "MC", "C1262477", "t"}}),
                                     medical_schema());
  ASSERT_EQ(bags.size(), 1u);
  EXPECT_EQ(bags[0].label, "MBCB");
  EXPECT_EQ(bags[0].head_cui, "C1262477");
  EXPECT_EQ(bags[0].tail_cui, "C0011849");
}

TEST(GeneratePositiveBags, NoMatchNoBag) {
  auto corpus = corpus_of({{"Notes", "Hypertension affects the heart."}});
  EXPECT_TRUE(generate_positive_bags(corpus, small_lexicon(), store_of({{"C0011849", "MC", "C1262477", "t"}}),
                                     medical_schema())
                  .empty());
}

TEST(GeneratePositiveBags, EqualsExhaustiveScanOnSyntheticCorpus) {
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthOptions o;
    o.sentences = 200;
    o.triplets = 10;
    o.noise_rate = 0.2;
    o.seed = seed;
    SynthWorld w = make_synth_world(o);
    CorpusStore corpus = ingest_jsonl_docs(w.corpus_jsonl);
    auto bags = generate_positive_bags(corpus, w.lexicon, w.triplets, w.schema);
    auto expected = oracle::exhaustive_positive_set(corpus, w.lexicon, w.triplets, w.schema);
    EXPECT_FALSE(expected.empty());
    EXPECT_EQ(oracle::signatures(bags), expected);
    std::size_t instances = 0;
    for (const auto& b : bags) {
      instances += b.instances.size();
      for (const auto& i : b.instances) {
        EXPECT_EQ(std::set<std::string>({i.e1.cui, i.e2.cui}), std::set<std::string>({b.head_cui, b.tail_cui}));
        if (i.distance == Distance::kShort) {
          EXPECT_EQ(i.decomposition.concat(), i.sentence_tokens);
        }
      }
    }
    EXPECT_EQ(instances, expected.size());
    EXPECT_EQ(bags, generate_positive_bags(corpus, w.lexicon, w.triplets, w.schema, 4));
  }
}

TEST(MaskInstance, ReplacesEntitiesWithGroups) {
  auto corpus = corpus_of({{"Notes", "Diabetes causes weight loss"}, {"Notes", "Diabetes in the kidney"}});
  auto lex = small_lexicon();
  auto bags = generate_positive_bags(
      corpus, lex, store_of({{"C0011849", "MC", "C1262477", "t"}, {"C0011849", "IN", "C0022646", "t"}}),
      medical_schema());
  ASSERT_EQ(bags.size(), 2u);
  EXPECT_EQ(mask_instance(bags[0].instances[0], lex).sentence, (Tokens{"[GRP:DISO]", "causes", "[GRP:DISO]"}));
  EXPECT_EQ(mask_instance(bags[1].instances[0], lex).sentence,
            (Tokens{"[GRP:DISO]", "in", "the", "[GRP:ANAT]"}));
}

TEST(MaskInstance, OnlyEntitiesGiveTwoMasks) {
  Instance i;
  i.sentence_tokens = {"weight", "loss", "diabetes"};
  i.e1 = {"C1262477", {0, 2}, false};
  i.e2 = {"C0011849", {2, 3}, false};
  EXPECT_EQ(mask_instance(i, small_lexicon()).sentence, (Tokens{"[GRP:DISO]", "[GRP:DISO]"}));
}

TEST(MaskInstance, LongDistanceMasksTitle) {
  auto corpus = corpus_of({{"Diabetes", "Patients report weight loss."}});
  auto lex = small_lexicon();
  auto bags = generate_positive_bags(corpus, lex, store_of({{"C0011849", "MC", "C1262477", "t"}}), medical_schema());
  MaskedInstance m = mask_instance(bags[0].instances[0], lex);
  EXPECT_EQ(m.title, Tokens{"[GRP:DISO]"});
  EXPECT_EQ(m.sentence, (Tokens{"patients", "report", "[GRP:DISO]", "."}));
  Tokens seq = m.sequence();
  EXPECT_EQ(seq.front(), "[GRP:DISO]");
  EXPECT_NE(std::find(seq.begin(), seq.end(), std::string(kSepToken)), seq.end());
}

TEST(NegativePool, TwoIrrelevantMentionsRequired) {
  auto corpus = corpus_of({{"Notes", "Aspirin and ibuprofen interact. Aspirin helps diabetes. Metformin."}});
  std::vector<std::string> warnings;
  auto pool = build_negative_pool(corpus, small_lexicon(), RelationSchema({{"DDx", false, "DISO", "DISO", {}}}),
                                  {"CHEM"}, 10, 1, &warnings);
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_EQ(pool[0].label, "NA");
  EXPECT_EQ(pool[0].instances.size(), 1u);
  EXPECT_EQ(warnings.size(), 1u);  // asked for 10, have 1
}

TEST(NegativePool, IrrelevantGroupMustNotBeASlotGroup) {
  auto corpus = corpus_of({{"Notes", "x"}});
  EXPECT_THROW(build_negative_pool(corpus, small_lexicon(), medical_schema(), {"DISO"}, 10, 1), ValidationError);
}

TEST(NegativePool, SeededSubsampleIsDeterministic) {
  SynthOptions o;
  o.sentences = 600;
  SynthWorld w = make_synth_world(o);
  CorpusStore corpus = ingest_jsonl_docs(w.corpus_jsonl);
  auto a = build_negative_pool(corpus, w.lexicon, w.schema, w.irrelevant_groups, 20, 5);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, build_negative_pool(corpus, w.lexicon, w.schema, w.irrelevant_groups, 20, 5, nullptr, 3));
  EXPECT_NE(a, build_negative_pool(corpus, w.lexicon, w.schema, w.irrelevant_groups, 20, 6));
}

struct Type1Fixture {
  SynthWorld world;
  CorpusStore corpus;
  std::vector<Bag> positives, pool;
  Type1Fixture() {
    SynthOptions o;
    o.sentences = 400;
    world = make_synth_world(o);
    corpus = ingest_jsonl_docs(world.corpus_jsonl);
    positives = generate_positive_bags(corpus, world.lexicon, world.triplets, world.schema);
    pool = build_negative_pool(corpus, world.lexicon, world.schema, world.irrelevant_groups, 1000, 1);
  }
};

TEST(Type1Negatives, StructureAudit) {
  Type1Fixture f;
  std::vector<Type1Provenance> prov;
  auto negs = generate_type1_negatives(f.positives, f.pool, f.world.lexicon, f.world.schema, 3, &prov);
  std::size_t positive_instances = 0;
  for (const auto& b : f.positives) positive_instances += b.instances.size();
  ASSERT_EQ(prov.size(), positive_instances);
  for (const auto& p : prov) {
    const Instance& n = negs[p.negative_bag].instances[p.negative_instance];
    const Instance& src = f.positives[p.positive_bag].instances[p.positive_instance];
    const Instance& donor = f.pool[p.donor_bag].instances[p.donor_instance];
    EXPECT_EQ(negs[p.negative_bag].label, "NA");
    EXPECT_EQ(n.decomposition.head, src.decomposition.head);
    EXPECT_EQ(n.decomposition.tail, src.decomposition.tail);
    EXPECT_EQ(n.decomposition.middle, donor.decomposition.middle);
    EXPECT_EQ(f.world.lexicon.at(n.e1.cui).semantic_group, f.world.lexicon.at(src.e1.cui).semantic_group);
    EXPECT_EQ(f.world.lexicon.at(n.e2.cui).semantic_group, f.world.lexicon.at(src.e2.cui).semantic_group);
    EXPECT_EQ(n.decomposition.concat(), n.sentence_tokens);
  }
}

TEST(Type1Negatives, EmptyDonorMiddleAllowed) {
  auto lex = small_lexicon();
  Bag pos{"C0011849", "C1262477", "MC", {}};
  Instance p;
  p.sentence_tokens = {"diabetes", "causes", "weight", "loss"};
  p.e1 = {"C0011849", {0, 1}, false};
  p.e2 = {"C1262477", {2, 4}, false};
  p.decomposition = decomposition_of(p);
  pos.instances.push_back(p);
  Bag donor{"C0004057", "C0020740", "NA", {}};
  Instance d;
  d.sentence_tokens = {"aspirin", "ibuprofen"};
  d.e1 = {"C0004057", {0, 1}, false};
  d.e2 = {"C0020740", {1, 2}, false};
  d.decomposition = decomposition_of(d);
  donor.instances.push_back(d);
  auto negs = generate_type1_negatives({pos}, {donor}, lex, medical_schema(), 1);
  ASSERT_EQ(negs.size(), 1u);
  EXPECT_TRUE(negs[0].instances[0].decomposition.middle.empty());
  const Instance& n = negs[0].instances[0];
  EXPECT_EQ(n.sentence_tokens.size(), n.e1.span.size() + n.e2.span.size());
  EXPECT_THROW(generate_type1_negatives({pos}, {}, lex, medical_schema(), 1), ValidationError);
}

TEST(Type1Negatives, SmallGroupIsAnError) {
  Lexicon lex({{"D1", "dee", {}, "Disease or Syndrome", "DISO"}, {"A1", "ay", {}, "Body Part", "ANAT"},
               {"A2", "bee", {}, "Body Part", "ANAT"}});
  Bag pos{"D1", "A1", "IN", {}};
  Instance p;
  p.sentence_tokens = {"dee", "in", "ay"};
  p.e1 = {"D1", {0, 1}, false};
  p.e2 = {"A1", {2, 3}, false};
  p.decomposition = decomposition_of(p);
  pos.instances.push_back(p);
  EXPECT_THROW(generate_type1_negatives({pos}, {pos}, lex, medical_schema(), 1), ValidationError);
}

TEST(Type1Negatives, Deterministic) {
  Type1Fixture f;
  auto a = generate_type1_negatives(f.positives, f.pool, f.world.lexicon, f.world.schema, 8);
  auto b = generate_type1_negatives(f.positives, f.pool, f.world.lexicon, f.world.schema, 8);
  EXPECT_EQ(serialize_bags(a), serialize_bags(b));
}

WordEmbeddingTable table2d() {
  EmbeddingTable t(2);
  t.set("t", std::vector<double>{1, 2});
  t.set("t1", std::vector<double>{1, 0});
  t.set("t2", std::vector<double>{0, 1});
  return t;
}

Bag bag_of(std::vector<Tokens> sentences) {
  Bag b{"X", "Y", "NA", {}};
  for (auto& s : sentences) {
    Instance i;
    i.sentence_tokens = std::move(s);
    b.instances.push_back(std::move(i));
  }
  return b;
}

TEST(SentenceEmbedding, MeanOfKnownTokens) {
  auto t = table2d();
  EXPECT_EQ(sentence_embedding({"t"}, t), (Vector{1, 2}));
  EXPECT_EQ(sentence_embedding({"t1", "t2"}, t), (Vector{0.5, 0.5}));
  EXPECT_EQ(sentence_embedding({"t1", "zzz"}, t), (Vector{1, 0}));
  EXPECT_EQ(sentence_embedding({"zzz"}, t), (Vector{0, 0}));
  EXPECT_EQ(sentence_embedding({}, t), (Vector{0, 0}));
}

TEST(BagEmbedding, MeanOfSentences) {
  auto t = table2d();
  EXPECT_EQ(bag_embedding(bag_of({{"t"}}), t), (Vector{1, 2}));
  EXPECT_EQ(bag_embedding(bag_of({{"t1"}, {"t2"}}), t), (Vector{0.5, 0.5}));
  std::mt19937_64 rng(2);
  for (int r = 0; r < 50; ++r) {
    std::vector<Tokens> s(1 + rng() % 4);
    for (auto& x : s)
      for (std::size_t k = 0, n = rng() % 5; k < n; ++k) x.push_back(std::vector<std::string>{"t", "t1", "t2", "q"}[rng() % 4]);
    Bag b = bag_of(s);
    auto got = bag_embedding(b, t);
    auto want = oracle::bag_mean(b, t);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(CosineSimilarity, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(Vector{1, 2, 2}, Vector{2, 1, 2}), 8.0 / 9.0, 1e-15);
  EXPECT_EQ(cosine_similarity(Vector{0, 0}, Vector{1, 1}), 0.0);
  EXPECT_THROW(cosine_similarity(Vector{1}, Vector{1, 2}), ValidationError);
}

TEST(Type2Negatives, SortRuleAndTies) {
  EmbeddingTable t(2);
  // Scores against the positive (1,0): b1 0.9-ish, b2 lower, b3 in between.
  t.set("p", std::vector<double>{1, 0});
  t.set("a", std::vector<double>{0.9, std::sqrt(1 - 0.81)});
  t.set("b", std::vector<double>{0.5, std::sqrt(1 - 0.25)});
  t.set("c", std::vector<double>{0.7, std::sqrt(1 - 0.49)});
  std::vector<Bag> pool = {bag_of({{"a"}}), bag_of({{"b"}}), bag_of({{"c"}})};
  pool[0].head_cui = "b1";
  pool[1].head_cui = "b2";
  pool[2].head_cui = "b3";
  std::vector<Bag> pos = {bag_of({{"p"}})};
  auto top2 = select_type2_negatives(pool, pos, 2, t);
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(top2[0].head_cui, "b1");
  EXPECT_EQ(top2[1].head_cui, "b3");
  auto all = select_type2_negatives(pool, pos, 3, t);
  EXPECT_EQ(all[2].head_cui, "b2");

  std::vector<std::string> warnings;
  EXPECT_EQ(select_type2_negatives(pool, pos, 5, t, &warnings).size(), 3u);
  EXPECT_EQ(warnings.size(), 1u);

  std::vector<Bag> tied = {bag_of({{"a"}}), bag_of({{"a"}}), bag_of({{"a"}})};
  for (std::size_t i = 0; i < tied.size(); ++i) tied[i].head_cui = "t" + std::to_string(i);
  auto sel = select_type2_negatives(tied, pos, 2, t);
  EXPECT_EQ(sel[0].head_cui, "t0");
  EXPECT_EQ(sel[1].head_cui, "t1");
}

TEST(Type2Negatives, MatchesAllPairsOracle) {
  std::mt19937_64 rng(17);
  EmbeddingTable t(3);
  std::normal_distribution<double> n;
  for (int w = 0; w < 8; ++w) t.set("w" + std::to_string(w), std::vector<double>{n(rng), n(rng), n(rng)});
  auto random_bag = [&](std::size_t id) {
    std::vector<Tokens> s(1 + rng() % 3);
    for (auto& x : s)
      for (std::size_t k = 0, len = 1 + rng() % 3; k < len; ++k) x.push_back("w" + std::to_string(rng() % 9));
    Bag b = bag_of(s);
    b.head_cui = "B" + std::to_string(id);
    return b;
  };
  for (int round = 0; round < 40; ++round) {
    std::size_t m = 1 + rng() % 50, k = 1 + rng() % m;
    std::vector<Bag> pool, pos;
    for (std::size_t i = 0; i < m; ++i) pool.push_back(round % 4 == 0 && i % 3 ? pool.front() : random_bag(i));
    for (std::size_t i = 0, p = 1 + rng() % 6; i < p; ++i) pos.push_back(random_bag(100 + i));
    auto got = select_type2_negatives(pool, pos, k, t);
    auto want = oracle::brute_force_type2(pool, pos, k, t);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], pool[want[i]]);
  }
}

Bag simple_bag(std::string h, std::string t, std::string label) {
  Bag b{std::move(h), std::move(t), std::move(label), {}};
  b.instances.emplace_back();
  return b;
}

TEST(AssembleDatasets, TenAndTen) {
  std::vector<Bag> pos, neg1, neg2;
  for (int i = 0; i < 10; ++i) {
    pos.push_back(simple_bag("P" + std::to_string(i), "Q" + std::to_string(i), "MC"));
    neg1.push_back(simple_bag("N" + std::to_string(i), "M" + std::to_string(i), "NA"));
    neg2.push_back(simple_bag("R" + std::to_string(i), "S" + std::to_string(i), "NA"));
  }
  Dataset d = assemble_datasets(pos, neg1, neg2, NegativeKind::kType1, 0.8, 1);
  EXPECT_EQ(d.indices(Split::kTrain).size(), 16u);
  EXPECT_EQ(d.indices(Split::kTest).size(), 4u);

  Dataset mix = assemble_datasets(pos, neg1, neg2, NegativeKind::kMix, 0.8, 1);
  int from1 = 0, from2 = 0;
  for (const auto& b : mix.bags) {
    from1 += b.head_cui[0] == 'N';
    from2 += b.head_cui[0] == 'R';
  }
  EXPECT_EQ(from1, 5);
  EXPECT_EQ(from2, 5);
  EXPECT_EQ(serialize_dataset(mix), serialize_dataset(assemble_datasets(pos, neg1, neg2, NegativeKind::kMix, 0.8, 1)));
}

TEST(AssembleDatasets, ShortfallIsReported) {
  std::vector<Bag> pos, neg;
  for (int i = 0; i < 10; ++i) pos.push_back(simple_bag("P" + std::to_string(i), "Q", "MC"));
  for (int i = 0; i < 3; ++i) neg.push_back(simple_bag("N" + std::to_string(i), "M", "NA"));
  try {
    assemble_datasets(pos, neg, {}, NegativeKind::kType1, 0.8, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("shortfall"), std::string::npos);
  }
}

TEST(AssembleDatasets, SharedPairsNeverStraddleSplits) {
  std::vector<Bag> pos, neg;
  for (int i = 0; i < 40; ++i) {
    pos.push_back(simple_bag("P" + std::to_string(i % 15), "Q" + std::to_string(i % 4), i % 2 ? "MC" : "MBCB"));
    neg.push_back(simple_bag("Q" + std::to_string(i % 4), "P" + std::to_string(i % 9), "NA"));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Dataset d = assemble_datasets(pos, neg, {}, NegativeKind::kType1, 0.8, seed);
    std::set<std::string> train, test;
    for (std::size_t i = 0; i < d.bags.size(); ++i)
      (d.split[i] == Split::kTrain ? train : test).insert(pair_key(d.bags[i].head_cui, d.bags[i].tail_cui));
    for (const auto& k : train) EXPECT_FALSE(test.count(k)) << k;
  }
}

TEST(DatasetIo, RoundTrip) {
  Type1Fixture f;
  auto negs = generate_type1_negatives(f.positives, f.pool, f.world.lexicon, f.world.schema, 3);
  Dataset d = assemble_datasets(f.positives, negs, f.pool, NegativeKind::kMix, 0.8, 4);
  std::string text = serialize_dataset(d);
  Dataset back = parse_dataset(text);
  EXPECT_EQ(back.bags, d.bags);
  EXPECT_EQ(back.split, d.split);
  EXPECT_EQ(serialize_dataset(back), text);
  EXPECT_EQ(parse_bags(serialize_bags(f.positives)), f.positives);
  EXPECT_THROW(parse_dataset("{not json\n"), ParseError);
}

}  // namespace
}  // namespace dsre
