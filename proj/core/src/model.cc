#include "dsre/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

void softmax_inplace(std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y = W x + b for a row-major (rows x cols) W.
Vector affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::size_t rows,
              std::size_t cols) {
  Vector y(b.begin(), b.end());
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(w.subspan(r * cols, cols), x);
  return y;
}

// g_W += dy x^T, g_b += dy, returns W^T dy when `dx` is requested.
void affine_backward(std::span<const double> w, std::span<const double> x, std::span<const double> dy,
                     std::span<double> gw, std::span<double> gb, Vector* dx, std::size_t rows, std::size_t cols) {
  if (dx) dx->assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double d = dy[r];
    if (d == 0) continue;
    gb[r] += d;
    double* g = gw.data() + r * cols;
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      g[c] += d * x[c];
      if (dx) (*dx)[c] += d * wr[c];
    }
  }
}

std::span<double> slice(std::span<double> flat, const TensorInfo& t) { return flat.subspan(t.offset, t.size()); }

}  // namespace

std::string_view to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kBowLinear: return "bow_linear";
    case EncoderVariant::kAvgEmbedProj: return "avg_embed_proj";
    case EncoderVariant::kTokenAttention: return "token_attention";
  }
  return "avg_embed_proj";
}

EncoderVariant parse_encoder_variant(std::string_view s) {
  if (s == "bow_linear") return EncoderVariant::kBowLinear;
  if (s == "avg_embed_proj") return EncoderVariant::kAvgEmbedProj;
  if (s == "token_attention") return EncoderVariant::kTokenAttention;
  throw ValidationError("encoder_variant must be bow_linear, avg_embed_proj or token_attention, got \"" +
                        std::string(s) + "\"");
}

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::kFull: return "full";
    case Fusion::kTextOnly: return "text_only";
    case Fusion::kCuiOnly: return "cui_only";
  }
  return "full";
}

Fusion parse_fusion(std::string_view s) {
  if (s == "full") return Fusion::kFull;
  if (s == "text_only") return Fusion::kTextOnly;
  if (s == "cui_only") return Fusion::kCuiOnly;
  throw ValidationError("fusion must be full, text_only or cui_only, got \"" + std::string(s) + "\"");
}

void ModelConfig::validate() const {
  if (d_e == 0 || d_r == 0 || d_k == 0 || d_c == 0) throw ValidationError("model dimensions must be positive");
  if (n_s == 0) throw ValidationError("n_s must be positive");
  if (num_labels < 2) throw ValidationError("num_labels must count NA plus at least one relation");
  if (!(l2 >= 0)) throw ValidationError("l2 must be non-negative");
  if (!(init_scale > 0)) throw ValidationError("init_scale must be positive");
}

Vocabulary::Vocabulary() {
  add(std::string(kUnkToken));
  add(std::string(kSepToken));
  for (const auto& g : known_semantic_groups()) add(group_mask_token(g));
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) add(t);
}

void Vocabulary::add(const std::string& t) {
  if (index_.emplace(t, static_cast<std::uint32_t>(tokens_.size())).second) tokens_.push_back(t);
}

std::uint32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

ModelParams::ModelParams(const ModelConfig& c, Vocabulary vocab) : vocab_(std::move(vocab)) {
  c.validate();
  const std::size_t v = vocab_.size();
  switch (c.encoder) {
    case EncoderVariant::kBowLinear:
      add_tensor("bow.W", v, c.d_r, false);
      add_tensor("bow.b", c.d_r, 1, true);
      break;
    case EncoderVariant::kTokenAttention:
      add_tensor("emb", v, c.d_e, false);
      add_tensor("attn.q", c.d_e, 1, false);
      add_tensor("proj.W", c.d_r, c.d_e, false);
      add_tensor("proj.b", c.d_r, 1, true);
      break;
    case EncoderVariant::kAvgEmbedProj:
      add_tensor("emb", v, c.d_e, false);
      add_tensor("proj.W", c.d_r, c.d_e, false);
      add_tensor("proj.b", c.d_r, 1, true);
      break;
  }
  add_tensor("v_ep", c.d_r, 1, false);
  add_tensor("W1", c.d_c, c.d_k, false);
  add_tensor("b1", c.d_c, 1, true);
  add_tensor("W2", c.d_c, c.d_k, false);
  add_tensor("b2", c.d_c, 1, true);
  add_tensor("W", c.num_labels, c.d_r + 2 * c.d_c, false);
  add_tensor("b", c.num_labels, 1, true);
}

void ModelParams::add_tensor(const std::string& name, std::size_t rows, std::size_t cols, bool bias) {
  tensors_.push_back({name, rows, cols, values_.size(), bias});
  values_.resize(values_.size() + rows * cols, 0.0);
}

const TensorInfo& ModelParams::info(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw ValidationError("no parameter tensor \"" + std::string(name) + "\"");
}

bool ModelParams::has(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const TensorInfo& t) { return t.name == name; });
}

std::span<double> ModelParams::tensor(std::string_view name) {
  const auto& t = info(name);
  return {values_.data() + t.offset, t.size()};
}

std::span<const double> ModelParams::tensor(std::string_view name) const {
  const auto& t = info(name);
  return {values_.data() + t.offset, t.size()};
}

std::vector<double> ModelParams::weight_mask() const {
  std::vector<double> mask(values_.size(), 0.0);
  for (const auto& t : tensors_)
    if (!t.is_bias) std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 1.0);
  return mask;
}

ModelParams init_params(const ModelConfig& config, Vocabulary vocab, const WordEmbeddingTable* word_table) {
  ModelParams p(config, std::move(vocab));
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u(-config.init_scale, config.init_scale);
  for (double& x : p.values()) x = u(rng);
  if (word_table && p.has("emb") && word_table->dim() == config.d_e) {
    auto emb = p.tensor("emb");
    const auto& toks = p.vocab().tokens();
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (auto row = word_table->find(toks[i])) std::copy(row->begin(), row->end(), emb.begin() + static_cast<std::ptrdiff_t>(i * config.d_e));
    }
  }
  return p;
}

Vocabulary build_vocabulary(const std::vector<const Bag*>& bags, const Lexicon& lexicon) {
  std::set<std::string> tokens;
  for (const Bag* b : bags)
    for (const auto& inst : b->instances)
      for (auto& t : mask_instance(inst, lexicon).sequence()) tokens.insert(std::move(t));
  return Vocabulary(std::vector<std::string>(tokens.begin(), tokens.end()));
}

BagInput prepare_bag(const Bag& bag, const Lexicon& lexicon, const Vocabulary& vocab,
                     const CuiEmbeddingTable& cui_table, const RelationSchema& schema) {
  BagInput in;
  for (const auto& inst : bag.instances) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : mask_instance(inst, lexicon).sequence()) ids.push_back(vocab.id(t));
    in.instances.push_back(std::move(ids));
  }
  in.k1 = cui_table.lookup(bag.head_cui);
  in.k2 = cui_table.lookup(bag.tail_cui);
  in.label = schema.require(bag.label);
  return in;
}

EncoderTrace encode_sentence_traced(std::span<const std::uint32_t> ids, const ModelParams& params,
                                    const ModelConfig& config) {
  if (ids.empty()) throw ValidationError("encode_sentence: empty input sequence");
  const std::size_t v = params.vocab().size();
  for (auto id : ids)
    if (id >= v) throw ValidationError("token id out of vocabulary range");
  EncoderTrace tr;
  tr.ids.assign(ids.begin(), ids.end());
  const std::size_t de = config.d_e, dr = config.d_r;
  if (config.encoder == EncoderVariant::kBowLinear) {
    auto w = params.tensor("bow.W");
    auto b = params.tensor("bow.b");
    tr.r.assign(b.begin(), b.end());
    for (auto id : ids) {
      const double* row = w.data() + id * dr;
      for (std::size_t k = 0; k < dr; ++k) tr.r[k] += row[k];
    }
    return tr;
  }
  auto emb = params.tensor("emb");
  tr.pooled.assign(de, 0.0);
  if (config.encoder == EncoderVariant::kAvgEmbedProj) {
    for (auto id : ids)
      for (std::size_t k = 0; k < de; ++k) tr.pooled[k] += emb[id * de + k];
    for (double& x : tr.pooled) x /= static_cast<double>(ids.size());
  } else {
    auto q = params.tensor("attn.q");
    tr.attention.resize(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t) tr.attention[t] = dot(q, emb.subspan(ids[t] * de, de));
    softmax_inplace(tr.attention);
    for (std::size_t t = 0; t < ids.size(); ++t)
      for (std::size_t k = 0; k < de; ++k) tr.pooled[k] += tr.attention[t] * emb[ids[t] * de + k];
  }
  tr.r = affine(params.tensor("proj.W"), params.tensor("proj.b"), tr.pooled, dr, de);
  return tr;
}

Aggregate aggregate_bag(const std::vector<Vector>& columns, std::span<const double> v_ep) {
  if (columns.empty()) throw ValidationError("aggregate_bag needs at least one instance");
  Aggregate out;
  out.alpha.resize(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].size() != v_ep.size()) throw ValidationError("aggregate_bag: dimension mismatch");
    out.alpha[i] = dot(columns[i], v_ep);
  }
  softmax_inplace(out.alpha);
  out.r.assign(v_ep.size(), 0.0);
  for (std::size_t i = 0; i < columns.size(); ++i)
    for (std::size_t k = 0; k < out.r.size(); ++k) out.r[k] += out.alpha[i] * columns[i][k];
  return out;
}

Fused fuse_and_classify(std::span<const double> r, std::span<const double> k1, std::span<const double> k2,
                        const ModelParams& params, const ModelConfig& config) {
  if (r.size() != config.d_r) throw ValidationError("fuse_and_classify: r has dimension " + std::to_string(r.size()));
  if (k1.size() != config.d_k || k2.size() != config.d_k)
    throw ValidationError("fuse_and_classify: entity embeddings must have dimension d_k=" + std::to_string(config.d_k));
  Fused out;
  out.c1 = affine(params.tensor("W1"), params.tensor("b1"), k1, config.d_c, config.d_k);
  out.c2 = affine(params.tensor("W2"), params.tensor("b2"), k2, config.d_c, config.d_k);
  out.f.assign(r.begin(), r.end());
  out.f.insert(out.f.end(), out.c1.begin(), out.c1.end());
  out.f.insert(out.f.end(), out.c2.begin(), out.c2.end());
  if (config.fusion == Fusion::kTextOnly) std::fill(out.f.begin() + static_cast<std::ptrdiff_t>(config.d_r), out.f.end(), 0.0);
  if (config.fusion == Fusion::kCuiOnly) std::fill_n(out.f.begin(), config.d_r, 0.0);
  const std::size_t fdim = config.d_r + 2 * config.d_c;
  out.logits = affine(params.tensor("W"), params.tensor("b"), out.f, config.num_labels, fdim);
  out.probs = out.logits;
  softmax_inplace(out.probs);
  return out;
}

ForwardTrace forward_loss_on(const BagInput& bag, std::size_t label, const ModelParams& params,
                             const ModelConfig& config, std::vector<std::size_t> instances) {
  if (instances.empty()) throw ValidationError("forward_loss: empty bag");
  if (label >= config.num_labels) throw ValidationError("forward_loss: label out of range");
  ForwardTrace tr;
  tr.params = &params;
  tr.generation = params.generation();
  tr.config = config;
  tr.sampled = std::move(instances);
  std::vector<Vector> columns;
  for (std::size_t i : tr.sampled) {
    tr.encoded.push_back(encode_sentence_traced(bag.instances.at(i), params, config));
    columns.push_back(tr.encoded.back().r);
  }
  tr.aggregate = aggregate_bag(columns, params.tensor("v_ep"));
  tr.k1 = bag.k1;
  tr.k2 = bag.k2;
  tr.fused = fuse_and_classify(tr.aggregate.r, tr.k1, tr.k2, params, config);
  tr.label = label;
  const auto& z = tr.fused.logits;
  double mx = *std::max_element(z.begin(), z.end());
  double lse = 0;
  for (double x : z) lse += std::exp(x - mx);
  tr.loss = mx + std::log(lse) - z[label];
  if (config.l2 > 0) {
    double sq = 0;
    for (const auto& t : params.tensors()) {
      if (t.is_bias) continue;
      for (std::size_t i = 0; i < t.size(); ++i) sq += params.values()[t.offset + i] * params.values()[t.offset + i];
    }
    tr.loss += 0.5 * config.l2 * sq;
  }
  return tr;
}

ForwardTrace forward_loss(const BagInput& bag, std::size_t label, const ModelParams& params,
                          const ModelConfig& config, std::mt19937_64& rng) {
  if (bag.instances.empty()) throw ValidationError("forward_loss: empty bag");
  std::vector<std::size_t> all(bag.instances.size()), picked;
  std::iota(all.begin(), all.end(), 0);
  if (all.size() <= config.n_s) {
    picked = std::move(all);
  } else {
    std::sample(all.begin(), all.end(), std::back_inserter(picked), config.n_s, rng);
  }
  return forward_loss_on(bag, label, params, config, std::move(picked));
}

void accumulate_gradients(const ForwardTrace& tr, const ModelParams& params, std::span<double> grad, double scale,
                          bool include_l2) {
  if (tr.params != &params || tr.generation != params.generation())
    throw Error("backward: stale trace (parameters changed since the forward pass)");
  if (grad.size() != params.size()) throw ValidationError("backward: gradient buffer has the wrong size");
  const ModelConfig& c = tr.config;
  const std::size_t fdim = c.d_r + 2 * c.d_c;

  Vector dz = tr.fused.probs;
  dz[tr.label] -= 1.0;
  for (double& x : dz) x *= scale;

  Vector df;
  affine_backward(params.tensor("W"), tr.fused.f, dz, slice(grad, params.info("W")), slice(grad, params.info("b")),
                  &df, c.num_labels, fdim);
  if (c.fusion == Fusion::kTextOnly) std::fill(df.begin() + static_cast<std::ptrdiff_t>(c.d_r), df.end(), 0.0);
  if (c.fusion == Fusion::kCuiOnly) std::fill_n(df.begin(), c.d_r, 0.0);

  std::span<const double> dr(df.data(), c.d_r);
  std::span<const double> dc1(df.data() + c.d_r, c.d_c);
  std::span<const double> dc2(df.data() + c.d_r + c.d_c, c.d_c);
  affine_backward(params.tensor("W1"), tr.k1, dc1, slice(grad, params.info("W1")), slice(grad, params.info("b1")),
                  nullptr, c.d_c, c.d_k);
  affine_backward(params.tensor("W2"), tr.k2, dc2, slice(grad, params.info("W2")), slice(grad, params.info("b2")),
                  nullptr, c.d_c, c.d_k);

  // Bag attention.
  const auto& alpha = tr.aggregate.alpha;
  const std::size_t m = alpha.size();
  auto v = params.tensor("v_ep");
  auto gv = slice(grad, params.info("v_ep"));
  Vector dalpha(m);
  double mean = 0;
  for (std::size_t i = 0; i < m; ++i) {
    dalpha[i] = dot(tr.encoded[i].r, dr);
    mean += alpha[i] * dalpha[i];
  }
  std::vector<Vector> dri(m, Vector(c.d_r));
  for (std::size_t i = 0; i < m; ++i) {
    double ds = alpha[i] * (dalpha[i] - mean);
    const Vector& ri = tr.encoded[i].r;
    for (std::size_t k = 0; k < c.d_r; ++k) {
      gv[k] += ds * ri[k];
      dri[i][k] = alpha[i] * dr[k] + ds * v[k];
    }
  }

  // Sentence encoders.
  for (std::size_t i = 0; i < m; ++i) {
    const EncoderTrace& et = tr.encoded[i];
    const Vector& d = dri[i];
    if (c.encoder == EncoderVariant::kBowLinear) {
      auto gw = slice(grad, params.info("bow.W"));
      auto gb = slice(grad, params.info("bow.b"));
      for (std::size_t k = 0; k < c.d_r; ++k) gb[k] += d[k];
      for (auto id : et.ids) {
        double* row = gw.data() + id * c.d_r;
        for (std::size_t k = 0; k < c.d_r; ++k) row[k] += d[k];
      }
      continue;
    }
    Vector dx;
    affine_backward(params.tensor("proj.W"), et.pooled, d, slice(grad, params.info("proj.W")),
                    slice(grad, params.info("proj.b")), &dx, c.d_r, c.d_e);
    auto emb = params.tensor("emb");
    auto gemb = slice(grad, params.info("emb"));
    const std::size_t n = et.ids.size();
    if (c.encoder == EncoderVariant::kAvgEmbedProj) {
      for (auto id : et.ids)
        for (std::size_t k = 0; k < c.d_e; ++k) gemb[id * c.d_e + k] += dx[k] / static_cast<double>(n);
    } else {
      auto q = params.tensor("attn.q");
      auto gq = slice(grad, params.info("attn.q"));
      Vector da(n);
      double abar = 0;
      for (std::size_t t = 0; t < n; ++t) {
        da[t] = dot(emb.subspan(et.ids[t] * c.d_e, c.d_e), dx);
        abar += et.attention[t] * da[t];
      }
      for (std::size_t t = 0; t < n; ++t) {
        double a = et.attention[t];
        double ds = a * (da[t] - abar);
        const std::size_t base = et.ids[t] * c.d_e;
        for (std::size_t k = 0; k < c.d_e; ++k) {
          gq[k] += ds * emb[base + k];
          gemb[base + k] += a * dx[k] + ds * q[k];
        }
      }
    }
  }

  if (include_l2 && c.l2 > 0) {
    for (const auto& t : params.tensors()) {
      if (t.is_bias) continue;
      for (std::size_t i = 0; i < t.size(); ++i) grad[t.offset + i] += scale * c.l2 * params.values()[t.offset + i];
    }
  }
}

std::vector<double> backward(const ForwardTrace& trace, const ModelParams& params) {
  std::vector<double> grad(params.size(), 0.0);
  accumulate_gradients(trace, params, grad, 1.0, true);
  return grad;
}

Prediction predict_bag(const BagInput& bag, const ModelParams& params, const ModelConfig& config) {
  if (bag.instances.empty()) throw ValidationError("predict_bag: empty bag");
  std::vector<Vector> columns;
  columns.reserve(bag.instances.size());
  for (const auto& ids : bag.instances) columns.push_back(encode_sentence(ids, params, config));
  Aggregate agg = aggregate_bag(columns, params.tensor("v_ep"));
  Fused fused = fuse_and_classify(agg.r, bag.k1, bag.k2, params, config);
  Prediction p;
  p.probs = std::move(fused.probs);
  p.alpha = std::move(agg.alpha);
  for (std::size_t i = 1; i < p.probs.size(); ++i)
    if (p.probs[i] > p.probs[p.label]) p.label = i;
  return p;
}

std::string serialize_checkpoint(const ModelConfig& config, const ModelParams& params,
                                 const std::vector<std::string>& label_names) {
  json cfg = {{"encoder_variant", std::string(to_string(config.encoder))},
              {"fusion", std::string(to_string(config.fusion))},
              {"d_e", config.d_e},
              {"d_r", config.d_r},
              {"d_k", config.d_k},
              {"d_c", config.d_c},
              {"n_s", config.n_s},
              {"num_labels", config.num_labels},
              {"l2", config.l2},
              {"init_scale", config.init_scale},
              {"seed", config.seed}};
  json tensors = json::array();
  for (const auto& t : params.tensors()) {
    auto data = params.tensor(t.name);
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"data", std::vector<double>(data.begin(), data.end())}});
  }
  json j = {{"format_version", kCheckpointFormatVersion},
            {"config", cfg},
            {"labels", label_names},
            {"vocab", params.vocab().tokens()},
            {"tensors", tensors}};
  return j.dump();
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("checkpoint is not valid JSON");
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ValidationError("unsupported checkpoint format_version");
    Checkpoint ck;
    const json& c = j.at("config");
    ck.config.encoder = parse_encoder_variant(c.at("encoder_variant").get<std::string>());
    ck.config.fusion = parse_fusion(c.value("fusion", std::string("full")));
    ck.config.d_e = c.at("d_e").get<std::size_t>();
    ck.config.d_r = c.at("d_r").get<std::size_t>();
    ck.config.d_k = c.at("d_k").get<std::size_t>();
    ck.config.d_c = c.at("d_c").get<std::size_t>();
    ck.config.n_s = c.at("n_s").get<std::size_t>();
    ck.config.num_labels = c.at("num_labels").get<std::size_t>();
    ck.config.l2 = c.at("l2").get<double>();
    ck.config.init_scale = c.at("init_scale").get<double>();
    ck.config.seed = c.at("seed").get<std::uint64_t>();
    ck.label_names = j.at("labels").get<std::vector<std::string>>();
    auto vocab_tokens = j.at("vocab").get<std::vector<std::string>>();
    Vocabulary vocab(vocab_tokens);
    if (vocab.tokens() != vocab_tokens) throw ValidationError("checkpoint vocabulary is inconsistent");
    ck.params = ModelParams(ck.config, std::move(vocab));
    const json& tensors = j.at("tensors");
    if (tensors.size() != ck.params.tensors().size())
      throw ValidationError("checkpoint has " + std::to_string(tensors.size()) + " tensors, config expects " +
                            std::to_string(ck.params.tensors().size()));
    for (const auto& t : tensors) {
      std::string name = t.at("name").get<std::string>();
      if (!ck.params.has(name)) throw ValidationError("checkpoint tensor \"" + name + "\" is not part of this model");
      const auto& info = ck.params.info(name);
      auto rows = t.at("rows").get<std::size_t>(), cols = t.at("cols").get<std::size_t>();
      auto data = t.at("data").get<std::vector<double>>();
      if (rows != info.rows || cols != info.cols || data.size() != info.size())
        throw ValidationError("checkpoint tensor \"" + name + "\" has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", expected " + std::to_string(info.rows) + "x" +
                              std::to_string(info.cols));
      std::copy(data.begin(), data.end(), ck.params.tensor(name).begin());
    }
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace dsre
