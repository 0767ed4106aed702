#include "dsre/embeddings.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <set>

namespace dsre {
namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_size(std::string_view s, std::size_t& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

void EmbeddingTable::set(const std::string& key, std::span<const double> values) {
  if (values.size() != dim_)
    throw ValidationError("vector for \"" + key + "\" has dimension " + std::to_string(values.size()) +
                          ", table expects " + std::to_string(dim_));
  auto [it, inserted] = index_.emplace(key, keys_.size());
  if (inserted) {
    keys_.push_back(key);
    data_.insert(data_.end(), values.begin(), values.end());
  } else {
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
  }
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

std::string EmbeddingTable::serialize() const {
  std::string out = std::to_string(keys_.size()) + " " + std::to_string(dim_) + "\n";
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    out += keys_[i];
    for (double v : row(i)) {
      out += ' ';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable EmbeddingTable::parse(std::string_view text, const std::string& origin) {
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  std::string_view line;
  if (!next_line(line)) throw ParseError(origin, 1, "missing \"<count> <dim>\" header");
  auto head = split_spaces(line);
  std::size_t count = 0, dim = 0;
  if (head.size() != 2 || !parse_size(head[0], count) || !parse_size(head[1], dim) || dim == 0)
    throw ParseError(origin, line_no, "header must be \"<count> <dim>\"");
  EmbeddingTable table(dim);
  std::vector<double> values(dim);
  while (next_line(line)) {
    auto parts = split_spaces(line);
    std::string key(parts.empty() ? std::string_view() : parts[0]);
    if (parts.size() != dim + 1)
      throw ParseError(origin, line_no,
                       "row \"" + key + "\" has " + std::to_string(parts.size() - 1) + " values, expected " +
                           std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(parts[k + 1], values[k])) throw ParseError(origin, line_no, "bad number in row \"" + key + "\"");
    }
    if (table.contains(key)) throw ParseError(origin, line_no, "duplicate key \"" + key + "\"");
    table.set(key, values);
  }
  if (table.size() != count)
    throw ParseError(origin, line_no, "header announces " + std::to_string(count) + " rows, found " +
                                          std::to_string(table.size()));
  return table;
}

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path) {
  return EmbeddingTable::parse(read_file(path), path.string());
}

WordEmbeddingTable train_skipgram(const std::vector<Tokens>& sentences, const SkipGramOptions& opt) {
  if (opt.dim == 0) throw ValidationError("skip-gram dimension must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& t : s) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> vocab;
  for (auto& [tok, c] : counts)
    if (c >= opt.min_count) vocab.emplace_back(tok, c);
  if (vocab.empty()) throw ValidationError("skip-gram vocabulary is empty");
  std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::unordered_map<std::string, std::size_t> id;
  for (std::size_t i = 0; i < vocab.size(); ++i) id.emplace(vocab[i].first, i);

  const std::size_t v = vocab.size(), d = opt.dim;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
  std::vector<double> in(v * d), out(v * d, 0.0);
  for (double& x : in) x = init(rng);

  std::vector<double> noise_weights(v);
  for (std::size_t i = 0; i < v; ++i) noise_weights[i] = std::pow(static_cast<double>(vocab[i].second), 0.75);
  std::discrete_distribution<std::size_t> noise(noise_weights.begin(), noise_weights.end());

  std::vector<std::vector<std::size_t>> encoded;
  std::size_t total_tokens = 0;
  for (const auto& s : sentences) {
    std::vector<std::size_t> e;
    for (const auto& t : s)
      if (auto it = id.find(t); it != id.end()) e.push_back(it->second);
    total_tokens += e.size();
    encoded.push_back(std::move(e));
  }

  const double total_steps = static_cast<double>(std::max<std::size_t>(1, total_tokens * opt.epochs));
  double processed = 0;
  std::vector<double> grad_in(d);
  std::uniform_int_distribution<std::size_t> shrink(0, opt.window > 0 ? opt.window - 1 : 0);
  auto sigmoid = [](double x) { return x > 30 ? 1.0 : (x < -30 ? 0.0 : 1.0 / (1.0 + std::exp(-x))); };

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& sent : encoded) {
      for (std::size_t pos = 0; pos < sent.size(); ++pos, processed += 1) {
        double lr = std::max(opt.learning_rate * 1e-4, opt.learning_rate * (1.0 - processed / total_steps));
        std::size_t reach = opt.window - shrink(rng);
        std::size_t lo = pos >= reach ? pos - reach : 0;
        std::size_t hi = std::min(sent.size(), pos + reach + 1);
        for (std::size_t c = lo; c < hi; ++c) {
          if (c == pos) continue;
          double* center = &in[sent[c] * d];
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (std::size_t k = 0; k <= opt.negatives; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = sent[pos];
              label = 1.0;
            } else {
              target = noise(rng);
              if (target == sent[pos]) continue;
              label = 0.0;
            }
            double* ctx = &out[target * d];
            double dot = 0;
            for (std::size_t j = 0; j < d; ++j) dot += center[j] * ctx[j];
            double g = (label - sigmoid(dot)) * lr;
            for (std::size_t j = 0; j < d; ++j) {
              grad_in[j] += g * ctx[j];
              ctx[j] += g * center[j];
            }
          }
          for (std::size_t j = 0; j < d; ++j) center[j] += grad_in[j];
        }
      }
    }
  }

  WordEmbeddingTable table(d);
  for (std::size_t i = 0; i < v; ++i) table.set(vocab[i].first, std::span<const double>(&in[i * d], d));
  return table;
}

WordEmbeddingTable train_skipgram(const CorpusStore& corpus, const SkipGramOptions& options) {
  if (corpus.empty()) throw ValidationError("skip-gram needs a nonempty corpus");
  std::vector<Tokens> sentences;
  for (const auto& doc : corpus.documents()) {
    if (!doc.title_tokens.empty()) sentences.push_back(doc.title_tokens);
    for (const auto& sec : doc.sections) {
      Tokens h = heading_path_tokens(sec);
      if (!h.empty()) sentences.push_back(std::move(h));
      for (const auto& s : sec.sentences) sentences.push_back(s.tokens);
    }
  }
  return train_skipgram(sentences, options);
}

CuiEmbeddingTable::CuiEmbeddingTable(EmbeddingTable table, HierarchyEdges hierarchy) : table_(std::move(table)) {
  for (auto& [child, parent] : hierarchy) parents_[child].push_back(parent);
  for (auto& [_, ps] : parents_) {
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  }
  recompute_mean();
}

CuiEmbeddingTable::CuiEmbeddingTable(const CuiEmbeddingTable& other)
    : table_(other.table_), parents_(other.parents_), global_mean_(other.global_mean_) {}

CuiEmbeddingTable& CuiEmbeddingTable::operator=(const CuiEmbeddingTable& other) {
  if (this != &other) {
    table_ = other.table_;
    parents_ = other.parents_;
    global_mean_ = other.global_mean_;
    std::unique_lock lock(*mu_);
    cache_.clear();
  }
  return *this;
}

void CuiEmbeddingTable::recompute_mean() {
  global_mean_.assign(table_.dim(), 0.0);
  if (table_.empty()) return;
  for (std::size_t i = 0; i < table_.size(); ++i) {
    auto r = table_.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) global_mean_[k] += r[k];
  }
  for (double& x : global_mean_) x /= static_cast<double>(table_.size());
}

void CuiEmbeddingTable::set(const std::string& cui, std::span<const double> values) {
  if (table_.dim() == 0 && table_.empty()) table_ = EmbeddingTable(values.size());
  table_.set(cui, values);
  recompute_mean();
  std::unique_lock lock(*mu_);
  cache_.clear();
}

std::optional<std::string> CuiEmbeddingTable::resolve_uncached(const std::string& cui) const {
  if (table_.contains(cui)) return cui;
  std::set<std::string> visited{cui};
  std::vector<std::string> level{cui};
  while (!level.empty()) {
    std::set<std::string> next;
    for (const auto& node : level) {
      auto it = parents_.find(node);
      if (it == parents_.end()) continue;
      for (const auto& p : it->second)
        if (visited.insert(p).second) next.insert(p);
    }
    for (const auto& p : next)
      if (table_.contains(p)) return p;  // std::set iterates in lexicographic order
    level.assign(next.begin(), next.end());
  }
  return std::nullopt;
}

std::optional<std::string> CuiEmbeddingTable::resolve(std::string_view cui) const {
  std::string key(cui);
  {
    std::shared_lock lock(*mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto answer = resolve_uncached(key);
  std::unique_lock lock(*mu_);
  cache_.emplace(key, answer);
  return answer;
}

Vector CuiEmbeddingTable::lookup(std::string_view cui) const {
  auto r = resolve(cui);
  if (!r) return global_mean_;
  auto row = *table_.find(*r);
  return Vector(row.begin(), row.end());
}

CuiEmbeddingTable load_cui_embeddings(const std::filesystem::path& path, HierarchyEdges hierarchy) {
  return CuiEmbeddingTable(EmbeddingTable::parse(read_file(path), path.string()), std::move(hierarchy));
}

}  // namespace dsre
