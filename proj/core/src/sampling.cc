#include "dsre/sampling.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace dsre {

Tokens Decomposition::concat() const {
  Tokens out;
  for (const Tokens* part : {&head, &e1, &middle, &e2, &tail}) out.insert(out.end(), part->begin(), part->end());
  return out;
}

std::string_view to_string(NegativeKind kind) {
  switch (kind) {
    case NegativeKind::kType1: return "type1";
    case NegativeKind::kType2: return "type2";
    case NegativeKind::kMix: return "mix";
  }
  return "type1";
}

NegativeKind parse_negative_kind(std::string_view s) {
  if (s == "type1") return NegativeKind::kType1;
  if (s == "type2") return NegativeKind::kType2;
  if (s == "mix") return NegativeKind::kMix;
  throw ValidationError("negative kind must be type1, type2 or mix, got \"" + std::string(s) + "\"");
}

std::string_view to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::string pair_key(std::string_view a, std::string_view b) {
  std::string k;
  if (b < a) std::swap(a, b);
  k.append(a).append(1, '\t').append(b);
  return k;
}

Decomposition decompose(const Tokens& sentence, Span a, Span b) {
  for (const Span& s : {a, b}) {
    if (s.start >= s.end || s.end > sentence.size()) throw ValidationError("entity span out of range");
  }
  if (a.overlaps(b)) throw ValidationError("entity spans overlap");
  if (b.start < a.start) std::swap(a, b);
  auto slice = [&](std::size_t from, std::size_t to) {
    return Tokens(sentence.begin() + static_cast<std::ptrdiff_t>(from), sentence.begin() + static_cast<std::ptrdiff_t>(to));
  };
  return {slice(0, a.start), slice(a.start, a.end), slice(a.end, b.start), slice(b.start, b.end),
          slice(b.end, sentence.size())};
}

Decomposition decomposition_of(const Instance& inst) {
  if (inst.distance == Distance::kShort) return decompose(inst.sentence_tokens, inst.e1.span, inst.e2.span);
  const Span& t = inst.e1.span;
  const Span& s = inst.e2.span;
  if (t.start >= t.end || t.end > inst.title_tokens.size() || s.start >= s.end || s.end > inst.sentence_tokens.size())
    throw ValidationError("long-distance entity span out of range");
  auto slice = [](const Tokens& v, std::size_t from, std::size_t to) {
    return Tokens(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to));
  };
  return {{}, slice(inst.title_tokens, t.start, t.end), slice(inst.sentence_tokens, 0, s.start),
          slice(inst.sentence_tokens, s.start, s.end), slice(inst.sentence_tokens, s.end, inst.sentence_tokens.size())};
}

bool nearest_pair(const std::vector<Span>& a, const std::vector<Span>& b, Span* best_a, Span* best_b) {
  bool found = false;
  std::size_t best_gap = 0, best_lo = 0, best_hi = 0;
  for (const Span& x : a) {
    for (const Span& y : b) {
      if (x.overlaps(y)) continue;
      const Span& first = x.start < y.start ? x : y;
      const Span& second = x.start < y.start ? y : x;
      std::size_t gap = second.start - first.end;
      if (!found || gap < best_gap || (gap == best_gap && (first.start < best_lo ||
                                                           (first.start == best_lo && second.start < best_hi)))) {
        found = true;
        best_gap = gap;
        best_lo = first.start;
        best_hi = second.start;
        *best_a = x;
        *best_b = y;
      }
    }
  }
  return found;
}

SentenceMentions index_mentions(const CorpusStore& corpus, const Lexicon& lexicon, int threads) {
  std::vector<const Tokens*> refs;
  for (const auto& d : corpus.documents())
    for (const auto& sec : d.sections)
      for (const auto& s : sec.sentences) refs.push_back(&s.tokens);
  SentenceMentions out;
  out.sentences.resize(refs.size());
  out.titles.resize(corpus.size());
  parallel_for(refs.size(), threads, [&](std::size_t i) { out.sentences[i] = lexicon.find_mentions(*refs[i]); });
  parallel_for(corpus.size(), threads,
               [&](std::size_t i) { out.titles[i] = lexicon.find_mentions(corpus.documents()[i].title_tokens); });
  return out;
}

namespace {

using SpansByCui = std::map<std::string, std::vector<Span>>;

SpansByCui group_spans(const std::vector<Mention>& mentions) {
  SpansByCui out;
  for (const auto& m : mentions) out[m.cui].push_back(m.token_span);
  return out;
}

struct Candidate {
  std::size_t triplet;
  std::size_t flat;
  Distance distance;
  std::string bag_key;
  std::string head, label, tail;
  Instance instance;
};

// Bag identity after resolving surface order against the schema.
void orient(const Triplet& t, bool forward, const RelationSchema& schema, std::string* head, std::string* label,
            std::string* tail) {
  const RelationLabel& rel = schema.label(t.relation);
  if (!rel.directed) {
    *head = std::min(t.head_cui, t.tail_cui);
    *tail = std::max(t.head_cui, t.tail_cui);
    *label = t.relation;
  } else if (!forward && rel.inverse_of) {
    *head = t.tail_cui;
    *tail = t.head_cui;
    *label = *rel.inverse_of;
  } else {
    *head = t.head_cui;
    *tail = t.tail_cui;
    *label = t.relation;
  }
}

}  // namespace

std::vector<Bag> generate_positive_bags(const CorpusStore& corpus, const Lexicon& lexicon,
                                        const TripletStore& triplets, const RelationSchema& schema, int threads) {
  return generate_positive_bags(corpus, index_mentions(corpus, lexicon, threads), triplets, schema);
}

std::vector<Bag> generate_positive_bags(const CorpusStore& corpus, const SentenceMentions& mentions,
                                        const TripletStore& triplets, const RelationSchema& schema) {
  const auto& trips = triplets.triplets();
  std::unordered_map<std::string, std::vector<std::size_t>> by_cui;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    schema.require(trips[i].relation);
    by_cui[trips[i].head_cui].push_back(i);
    by_cui[trips[i].tail_cui].push_back(i);
  }

  std::vector<Candidate> candidates;
  std::size_t flat = 0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const Document& doc = corpus.documents()[d];
    SpansByCui title = group_spans(mentions.titles[d]);
    for (std::size_t si = 0; si < doc.sections.size(); ++si) {
      const Section& sec = doc.sections[si];
      Tokens headings = heading_path_tokens(sec);
      for (std::size_t k = 0; k < sec.sentences.size(); ++k, ++flat) {
        const Tokens& toks = sec.sentences[k].tokens;
        SpansByCui sent = group_spans(mentions.sentences[flat]);
        std::set<std::size_t> touched;
        for (const SpansByCui* m : {&sent, &title})
          for (const auto& [cui, _] : *m)
            if (auto it = by_cui.find(cui); it != by_cui.end()) touched.insert(it->second.begin(), it->second.end());

        for (std::size_t ti : touched) {
          const Triplet& t = trips[ti];
          auto hs = sent.find(t.head_cui), ts = sent.find(t.tail_cui);
          Candidate c{ti, flat, Distance::kShort, {}, {}, {}, {}, {}};
          Instance& inst = c.instance;
          bool forward;
          if (hs != sent.end() && ts != sent.end()) {
            Span a, b;
            if (!nearest_pair(hs->second, ts->second, &a, &b)) continue;
            forward = a.start < b.start;
            inst.e1 = forward ? EntityRef{t.head_cui, a, false} : EntityRef{t.tail_cui, b, false};
            inst.e2 = forward ? EntityRef{t.tail_cui, b, false} : EntityRef{t.head_cui, a, false};
          } else {
            const std::string* in_title = nullptr;
            const std::string* in_sent = nullptr;
            if (title.count(t.head_cui) && ts != sent.end() && hs == sent.end()) {
              in_title = &t.head_cui;
              in_sent = &t.tail_cui;
            } else if (title.count(t.tail_cui) && hs != sent.end() && ts == sent.end()) {
              in_title = &t.tail_cui;
              in_sent = &t.head_cui;
            } else {
              continue;
            }
            c.distance = Distance::kLong;
            forward = in_title == &t.head_cui;
            inst.distance = Distance::kLong;
            inst.e1 = {*in_title, title.at(*in_title).front(), true};
            inst.e2 = {*in_sent, sent.at(*in_sent).front(), false};
          }
          inst.doc_id = doc.doc_id;
          inst.section = si;
          inst.sentence = k;
          inst.title_tokens = doc.title_tokens;
          inst.heading_tokens = headings;
          inst.sentence_tokens = toks;
          inst.decomposition = decomposition_of(inst);
          orient(t, forward, schema, &c.head, &c.label, &c.tail);
          c.bag_key = c.head + '\t' + c.label + '\t' + c.tail;
          candidates.push_back(std::move(c));
        }
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.triplet != b.triplet) return a.triplet < b.triplet;
    if (a.flat != b.flat) return a.flat < b.flat;
    return a.distance < b.distance;
  });

  std::vector<Bag> bags;
  std::unordered_map<std::string, std::size_t> bag_index;
  std::vector<std::set<std::pair<std::size_t, int>>> seen;
  for (auto& c : candidates) {
    auto [it, inserted] = bag_index.emplace(c.bag_key, bags.size());
    if (inserted) {
      bags.push_back({c.head, c.tail, c.label, {}});
      seen.emplace_back();
    }
    if (!seen[it->second].insert({c.flat, static_cast<int>(c.distance)}).second) continue;
    bags[it->second].instances.push_back(std::move(c.instance));
  }
  return bags;
}

Tokens MaskedInstance::sequence() const {
  Tokens out = title;
  out.insert(out.end(), sentence.begin(), sentence.end());
  out.emplace_back(kSepToken);
  out.insert(out.end(), headings.begin(), headings.end());
  return out;
}

namespace {

Tokens replace_spans(const Tokens& tokens, std::vector<std::pair<Span, std::string>> repl) {
  std::sort(repl.begin(), repl.end(), [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
  Tokens out;
  std::size_t pos = 0;
  for (const auto& [span, tok] : repl) {
    if (span.start < pos || span.end > tokens.size()) throw ValidationError("mask span out of range or overlapping");
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
               tokens.begin() + static_cast<std::ptrdiff_t>(span.start));
    out.push_back(tok);
    pos = span.end;
  }
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos), tokens.end());
  return out;
}

}  // namespace

MaskedInstance mask_instance(const Instance& inst, const Lexicon& lexicon) {
  std::string g1 = group_mask_token(lexicon.at(inst.e1.cui).semantic_group);
  std::string g2 = group_mask_token(lexicon.at(inst.e2.cui).semantic_group);
  MaskedInstance out;
  out.headings = inst.heading_tokens;
  if (inst.e1.in_title) {
    out.title = replace_spans(inst.title_tokens, {{inst.e1.span, g1}});
    out.sentence = replace_spans(inst.sentence_tokens, {{inst.e2.span, g2}});
  } else {
    out.title = inst.title_tokens;
    out.sentence = replace_spans(inst.sentence_tokens, {{inst.e1.span, g1}, {inst.e2.span, g2}});
  }
  return out;
}

std::vector<Bag> build_negative_pool(const CorpusStore& corpus, const Lexicon& lexicon, const RelationSchema& schema,
                                     const std::set<std::string>& irrelevant_groups, std::size_t pool_size,
                                     std::uint64_t seed, std::vector<std::string>* warnings, int threads) {
  return build_negative_pool(corpus, index_mentions(corpus, lexicon, threads), lexicon, schema, irrelevant_groups,
                             pool_size, seed, warnings);
}

std::vector<Bag> build_negative_pool(const CorpusStore& corpus, const SentenceMentions& mentions,
                                     const Lexicon& lexicon, const RelationSchema& schema,
                                     const std::set<std::string>& irrelevant_groups, std::size_t pool_size,
                                     std::uint64_t seed, std::vector<std::string>* warnings) {
  auto slots = schema.slot_groups();
  for (const auto& g : irrelevant_groups) {
    if (slots.count(g)) throw ValidationError("irrelevant group " + g + " is used by a relation slot");
  }
  std::vector<Bag> bags;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t flat = 0;
  for (const auto& doc : corpus.documents()) {
    for (std::size_t si = 0; si < doc.sections.size(); ++si) {
      const Section& sec = doc.sections[si];
      for (std::size_t k = 0; k < sec.sentences.size(); ++k, ++flat) {
        std::vector<const Mention*> ms;
        for (const auto& m : mentions.sentences[flat])
          if (irrelevant_groups.count(lexicon.at(m.cui).semantic_group)) ms.push_back(&m);
        const Mention* best_a = nullptr;
        const Mention* best_b = nullptr;
        std::size_t best_gap = 0;
        // Mentions are sorted and non-overlapping, so (i, j) with i < j is in
        // surface order and the first strict improvement is the leftmost.
        for (std::size_t i = 0; i < ms.size(); ++i) {
          for (std::size_t j = i + 1; j < ms.size(); ++j) {
            if (ms[i]->cui == ms[j]->cui) continue;
            std::size_t gap = ms[j]->token_span.start - ms[i]->token_span.end;
            if (!best_a || gap < best_gap) {
              best_a = ms[i];
              best_b = ms[j];
              best_gap = gap;
            }
          }
        }
        if (!best_a) continue;
        Instance inst;
        inst.doc_id = doc.doc_id;
        inst.section = si;
        inst.sentence = k;
        inst.title_tokens = doc.title_tokens;
        inst.heading_tokens = heading_path_tokens(sec);
        inst.sentence_tokens = sec.sentences[k].tokens;
        inst.e1 = {best_a->cui, best_a->token_span, false};
        inst.e2 = {best_b->cui, best_b->token_span, false};
        inst.decomposition = decomposition_of(inst);
        std::string key = pair_key(best_a->cui, best_b->cui);
        auto [it, inserted] = index.emplace(key, bags.size());
        if (inserted) {
          bags.push_back({std::min(best_a->cui, best_b->cui), std::max(best_a->cui, best_b->cui),
                          std::string(kNegativeLabel), {}});
        }
        bags[it->second].instances.push_back(std::move(inst));
      }
    }
  }
  if (bags.size() <= pool_size) {
    if (bags.size() < pool_size && warnings)
      warnings->push_back("negative pool has " + std::to_string(bags.size()) + " bags, requested " +
                          std::to_string(pool_size));
    return bags;
  }
  std::vector<std::size_t> all(bags.size()), keep;
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(keep), pool_size, rng);
  std::vector<Bag> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(std::move(bags[i]));
  return out;
}

std::vector<Bag> generate_type1_negatives(const std::vector<Bag>& positives, const std::vector<Bag>& pool,
                                          const Lexicon& lexicon, const RelationSchema& schema, std::uint64_t seed,
                                          std::vector<Type1Provenance>* provenance) {
  (void)schema;
  std::vector<std::pair<std::size_t, std::size_t>> donors;
  for (std::size_t b = 0; b < pool.size(); ++b)
    for (std::size_t i = 0; i < pool[b].instances.size(); ++i) donors.emplace_back(b, i);
  if (donors.empty()) throw ValidationError("Type 1 generation needs a nonempty negative pool");

  std::unordered_set<std::string> positive_pairs;
  for (const auto& b : positives) positive_pairs.insert(pair_key(b.head_cui, b.tail_cui));

  std::map<std::string, std::vector<const Concept*>> by_group;
  auto candidates = [&](const std::string& cui) -> const std::vector<const Concept*>& {
    const std::string& g = lexicon.at(cui).semantic_group;
    auto it = by_group.find(g);
    if (it == by_group.end()) it = by_group.emplace(g, lexicon.concepts_in_group(g)).first;
    if (it->second.size() < 2)
      throw ValidationError("semantic group " + g + " needs at least 2 lexicon entities for Type 1 negatives");
    return it->second;
  };

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_donor(0, donors.size() - 1);
  std::vector<Bag> out;
  std::unordered_map<std::string, std::size_t> index;
  constexpr int kMaxRedraws = 32;

  for (std::size_t pb = 0; pb < positives.size(); ++pb) {
    for (std::size_t pi = 0; pi < positives[pb].instances.size(); ++pi) {
      const Instance& pos = positives[pb].instances[pi];
      auto [db, di] = donors[pick_donor(rng)];
      const Instance& donor = pool[db].instances[di];
      const auto& c1 = candidates(pos.e1.cui);
      const auto& c2 = candidates(pos.e2.cui);
      std::uniform_int_distribution<std::size_t> u1(0, c1.size() - 1), u2(0, c2.size() - 1);
      const Concept* r1 = nullptr;
      const Concept* r2 = nullptr;
      for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        r1 = c1[u1(rng)];
        r2 = c2[u2(rng)];
        if (r1->cui == r2->cui) continue;
        if (positive_pairs.count(pair_key(r1->cui, r2->cui)) && attempt + 1 < kMaxRedraws) continue;
        break;
      }
      if (r1->cui == r2->cui) {
        // Only possible when every draw collided; walk to a distinct concept.
        for (const Concept* c : c2)
          if (c->cui != r1->cui) {
            r2 = c;
            break;
          }
      }

      const Decomposition& src = pos.decomposition;
      Tokens t1 = lexicon.terms_of(r1->cui).front();
      Tokens t2 = lexicon.terms_of(r2->cui).front();
      Instance neg;
      neg.doc_id = pos.doc_id;
      neg.section = pos.section;
      neg.sentence = pos.sentence;
      if (pos.distance == Distance::kShort) neg.title_tokens = pos.title_tokens;
      neg.heading_tokens = pos.heading_tokens;
      neg.distance = Distance::kShort;
      Tokens& s = neg.sentence_tokens;
      s = src.head;
      Span s1{s.size(), s.size() + t1.size()};
      s.insert(s.end(), t1.begin(), t1.end());
      s.insert(s.end(), donor.decomposition.middle.begin(), donor.decomposition.middle.end());
      Span s2{s.size(), s.size() + t2.size()};
      s.insert(s.end(), t2.begin(), t2.end());
      s.insert(s.end(), src.tail.begin(), src.tail.end());
      neg.e1 = {r1->cui, s1, false};
      neg.e2 = {r2->cui, s2, false};
      neg.decomposition = decomposition_of(neg);

      auto [it, inserted] = index.emplace(r1->cui + '\t' + r2->cui, out.size());
      if (inserted) out.push_back({r1->cui, r2->cui, std::string(kNegativeLabel), {}});
      out[it->second].instances.push_back(std::move(neg));
      if (provenance) provenance->push_back({it->second, out[it->second].instances.size() - 1, pb, pi, db, di});
    }
  }
  return out;
}

Vector sentence_embedding(const Tokens& tokens, const WordEmbeddingTable& table) {
  Vector out(table.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& t : tokens) {
    auto row = table.find(t);
    if (!row) continue;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (*row)[k];
    ++n;
  }
  if (n)
    for (double& x : out) x /= static_cast<double>(n);
  return out;
}

Vector bag_embedding(const Bag& bag, const WordEmbeddingTable& table) {
  if (bag.instances.empty()) throw ValidationError("bag_embedding on an empty bag");
  Vector out(table.dim(), 0.0);
  for (const auto& inst : bag.instances) {
    Vector s = sentence_embedding(inst.sentence_tokens, table);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += s[k];
  }
  for (double& x : out) x /= static_cast<double>(bag.instances.size());
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine_similarity: dimension mismatch " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return 0.0;
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

std::vector<double> type2_scores(const std::vector<Bag>& pool, const std::vector<Bag>& positives,
                                 const WordEmbeddingTable& table, int threads) {
  std::vector<Vector> pos(positives.size());
  parallel_for(positives.size(), threads, [&](std::size_t i) { pos[i] = bag_embedding(positives[i], table); });
  std::vector<double> scores(pool.size(), -1.0);
  parallel_for(pool.size(), threads, [&](std::size_t i) {
    Vector e = bag_embedding(pool[i], table);
    double best = -1.0;
    for (const auto& p : pos) best = std::max(best, cosine_similarity(e, p));
    scores[i] = best;
  });
  return scores;
}

std::vector<Bag> select_type2_negatives(const std::vector<Bag>& pool, const std::vector<Bag>& positives,
                                        std::size_t k, const WordEmbeddingTable& table,
                                        std::vector<std::string>* warnings, int threads) {
  if (pool.size() < k && warnings)
    warnings->push_back("Type 2 pool has " + std::to_string(pool.size()) + " bags, requested " + std::to_string(k));
  std::vector<double> scores = type2_scores(pool, positives, table, threads);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(k, order.size()));
  std::vector<Bag> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    out.push_back(pool[i]);
    out.back().label = std::string(kNegativeLabel);
  }
  return out;
}

namespace {

// Uniform subset of `want` items in original order (all when fewer).
std::vector<std::size_t> pick(std::size_t available, std::size_t want, std::uint64_t seed) {
  std::vector<std::size_t> all(available), out;
  std::iota(all.begin(), all.end(), 0);
  if (available <= want) return all;
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), want, rng);
  return out;
}

void assign_groups(const std::vector<Bag>& bags, std::vector<std::vector<std::size_t>> groups, std::uint64_t seed,
                   std::map<std::string, long>& target, std::map<std::string, long>& in_train,
                   std::vector<Split>& split) {
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  for (const auto& g : groups) {
    std::map<std::string, long> need;
    for (std::size_t b : g) ++need[bags[b].label];
    bool fits = std::all_of(need.begin(), need.end(),
                            [&](const auto& kv) { return in_train[kv.first] + kv.second <= target[kv.first]; });
    for (std::size_t b : g) split[b] = fits ? Split::kTrain : Split::kTest;
    if (fits)
      for (const auto& [l, n] : need) in_train[l] += n;
  }
}

}  // namespace

Dataset assemble_datasets(const std::vector<Bag>& positives, const std::vector<Bag>& type1_negatives,
                          const std::vector<Bag>& type2_negatives, NegativeKind kind, double split_fraction,
                          std::uint64_t seed) {
  if (positives.empty()) throw ValidationError("assemble_datasets: no positive bags");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ValidationError("split_fraction must be in (0, 1)");
  const std::size_t n = positives.size();
  const auto min_needed = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / 1.1 - 1e-12));

  std::vector<const Bag*> negatives;
  // Dataset-1 and Dataset-2 draw from fixed streams, and the mix takes a
  // random half of each of those draws.
  auto s1 = pick(type1_negatives.size(), n, derive_seed(seed, "type1"));
  auto s2 = pick(type2_negatives.size(), n, derive_seed(seed, "type2"));
  if (kind == NegativeKind::kType1) {
    for (std::size_t i : s1) negatives.push_back(&type1_negatives[i]);
  } else if (kind == NegativeKind::kType2) {
    for (std::size_t i : s2) negatives.push_back(&type2_negatives[i]);
  } else {
    std::size_t half1 = n / 2, half2 = n - n / 2;
    for (std::size_t i : pick(s1.size(), half1, derive_seed(seed, "mix1"))) negatives.push_back(&type1_negatives[s1[i]]);
    for (std::size_t i : pick(s2.size(), half2, derive_seed(seed, "mix2"))) negatives.push_back(&type2_negatives[s2[i]]);
  }
  if (negatives.size() < min_needed)
    throw ValidationError("insufficient " + std::string(to_string(kind)) + " negatives: need at least " +
                          std::to_string(min_needed) + " for " + std::to_string(n) + " positives, have " +
                          std::to_string(negatives.size()) + " (shortfall " +
                          std::to_string(min_needed - negatives.size()) + ")");

  Dataset ds;
  ds.negative_kind = kind;
  ds.seed = seed;
  ds.split_fraction = split_fraction;
  ds.bags = positives;
  for (const Bag* b : negatives) {
    ds.bags.push_back(*b);
    ds.bags.back().label = std::string(kNegativeLabel);
  }
  ds.split.assign(ds.bags.size(), Split::kTest);

  std::map<std::string, long> count, target, in_train;
  for (const auto& b : ds.bags) ++count[b.label];
  for (const auto& [l, c] : count) target[l] = std::lround(split_fraction * static_cast<double>(c));

  std::vector<std::vector<std::size_t>> pos_groups, neg_groups;
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    auto [it, inserted] = group_of.emplace(pair_key(ds.bags[i].head_cui, ds.bags[i].tail_cui), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  for (auto& g : groups) {
    bool has_positive = std::any_of(g.begin(), g.end(), [&](std::size_t b) { return ds.bags[b].label != kNegativeLabel; });
    (has_positive ? pos_groups : neg_groups).push_back(std::move(g));
  }
  assign_groups(ds.bags, std::move(pos_groups), derive_seed(seed, "split-pos"), target, in_train, ds.split);
  assign_groups(ds.bags, std::move(neg_groups), derive_seed(seed, "split-neg"), target, in_train, ds.split);
  return ds;
}

}  // namespace dsre
