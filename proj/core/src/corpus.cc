#include "dsre/corpus.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length in bytes of a Unicode whitespace code point starting at `i`, or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  auto c = static_cast<unsigned char>(s[i]);
  if (is_ascii_space(c)) return 1;
  if (c < 0x80) return 0;
  auto at = [&](std::size_t k) -> unsigned char {
    return k < s.size() ? static_cast<unsigned char>(s[k]) : 0;
  };
  if (c == 0xC2 && (at(i + 1) == 0x85 || at(i + 1) == 0xA0)) return 2;
  if (c == 0xE1 && at(i + 1) == 0x9A && at(i + 2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(i + 1) == 0x80) {
    unsigned char d = at(i + 2);
    if ((d >= 0x80 && d <= 0x8A) || d == 0xA8 || d == 0xA9 || d == 0xAF) return 3;
  }
  if (c == 0xE2 && at(i + 1) == 0x81 && at(i + 2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(i + 1) == 0x80 && at(i + 2) == 0x80) return 3;  // U+3000
  return 0;
}

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

bool is_word_byte(std::string_view s, std::size_t i) {
  auto c = static_cast<unsigned char>(s[i]);
  if (c >= 0x80) return whitespace_len(s, i) == 0;
  return std::isalnum(c) != 0;
}

constexpr std::array<std::string_view, 5> kAbbreviations = {"e.g.", "i.e.", "dr.", "vs.", "fig."};

bool ends_with_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_ascii_space(static_cast<unsigned char>(text[b - 1]))) --b;
  std::string word = to_lower_ascii(text.substr(b, dot + 1 - b));
  std::size_t lead = 0;
  while (lead < word.size() && !std::isalnum(static_cast<unsigned char>(word[lead]))) ++lead;
  std::string_view w = std::string_view(word).substr(lead);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), w) != kAbbreviations.end();
}

Span trimmed(std::string_view text, Span s) {
  while (s.start < s.end && is_ascii_space(static_cast<unsigned char>(text[s.start]))) ++s.start;
  while (s.end > s.start && is_ascii_space(static_cast<unsigned char>(text[s.end - 1]))) --s.end;
  return s;
}

json document_to_json(const Document& d) {
  json sections = json::array();
  for (const auto& sec : d.sections) {
    json sentences = json::array();
    for (const auto& s : sec.sentences) {
      sentences.push_back({{"tokens", s.tokens},
                           {"span", {s.source_char_span.start, s.source_char_span.end}}});
    }
    sections.push_back({{"headings", sec.heading_path}, {"text", sec.text}, {"sentences", sentences}});
  }
  return {{"doc_id", d.doc_id}, {"title", d.title}, {"title_tokens", d.title_tokens},
          {"sections", sections}};
}

Document document_from_raw_json(const json& j, const std::string& origin, std::size_t line,
                                std::size_t* truncated) {
  auto require = [&](const char* key, json::value_t type) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(origin, line, std::string("missing field \"") + key + "\"");
    if (it->type() != type) throw ParseError(origin, line, std::string("field \"") + key + "\" has wrong type");
    return *it;
  };
  if (!j.is_object()) throw ParseError(origin, line, "record is not a JSON object");
  std::string doc_id = require("doc_id", json::value_t::string).get<std::string>();
  std::string title = require("title", json::value_t::string).get<std::string>();
  const json& secs = require("sections", json::value_t::array);
  std::vector<std::pair<std::vector<std::string>, std::string>> raw;
  for (const auto& s : secs) {
    if (!s.is_object() || !s.contains("text") || !s["text"].is_string())
      throw ParseError(origin, line, "section needs a string \"text\"");
    std::vector<std::string> headings;
    if (s.contains("headings")) {
      if (!s["headings"].is_array()) throw ParseError(origin, line, "\"headings\" must be an array");
      for (const auto& h : s["headings"]) {
        if (!h.is_string()) throw ParseError(origin, line, "heading must be a string");
        headings.push_back(h.get<std::string>());
      }
    }
    raw.emplace_back(std::move(headings), s["text"].get<std::string>());
  }
  return build_document(std::move(doc_id), std::move(title), std::move(raw), truncated);
}

}  // namespace

std::vector<TokenWithOffset> tokenize_with_offsets(std::string_view text) {
  std::vector<TokenWithOffset> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (std::size_t ws = whitespace_len(text, i)) {
      i += ws;
      continue;
    }
    auto c = static_cast<unsigned char>(text[i]);
    if (is_punct(c)) {
      out.push_back({std::string(1, static_cast<char>(c)), {i, i + 1}});
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < n) {
      if (is_word_byte(text, i)) {
        ++i;
        continue;
      }
      auto d = static_cast<unsigned char>(text[i]);
      bool next_word = i + 1 < n && is_word_byte(text, i + 1);
      if (d == '-' && i > start && next_word) {
        ++i;
        continue;
      }
      if ((d == '.' || d == ',') && i > start && is_digit(static_cast<unsigned char>(text[i - 1])) &&
          i + 1 < n && is_digit(static_cast<unsigned char>(text[i + 1]))) {
        ++i;
        continue;
      }
      break;
    }
    out.push_back({to_lower_ascii(text.substr(start, i - start)), {start, i}});
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.token));
  return out;
}

std::vector<Span> split_sentence_spans(std::string_view text) {
  std::vector<Span> out;
  const std::size_t n = text.size();
  std::size_t cur = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < n && !is_ascii_space(static_cast<unsigned char>(text[i + 1]))) continue;
    std::size_t j = i + 1;
    while (j < n && is_ascii_space(static_cast<unsigned char>(text[j]))) ++j;
    bool boundary = j == n || (text[j] >= 'A' && text[j] <= 'Z');
    if (!boundary) continue;
    if (c == '.' && ends_with_abbreviation(text, i)) continue;
    Span s = trimmed(text, {cur, i + 1});
    if (s.size()) out.push_back(s);
    cur = j;
    i = j == 0 ? 0 : j - 1;
  }
  Span rest = trimmed(text, {cur, n});
  if (rest.size()) out.push_back(rest);
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const Span& s : split_sentence_spans(text)) out.emplace_back(text.substr(s.start, s.size()));
  return out;
}

Tokens heading_path_tokens(const std::vector<std::string>& heading_path) {
  Tokens out;
  for (std::size_t i = 0; i < heading_path.size(); ++i) {
    if (i) out.emplace_back("/");
    Tokens t = tokenize(heading_path[i]);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

void CorpusStore::add(Document doc) {
  if (index_.count(doc.doc_id)) throw ValidationError("duplicate doc_id \"" + doc.doc_id + "\"");
  index_.emplace(doc.doc_id, docs_.size());
  docs_.push_back(std::move(doc));
}

const Document* CorpusStore::find(std::string_view doc_id) const {
  auto it = index_.find(std::string(doc_id));
  return it == index_.end() ? nullptr : &docs_[it->second];
}

std::size_t CorpusStore::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : docs_)
    for (const auto& s : d.sections) n += s.sentences.size();
  return n;
}

std::string CorpusStore::serialize() const {
  std::string out;
  for (const auto& d : docs_) {
    out += document_to_json(d).dump();
    out += '\n';
  }
  return out;
}

CorpusStore CorpusStore::deserialize(std::string_view jsonl, const std::string& origin) {
  CorpusStore store;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(origin, line_no, "invalid JSON");
    try {
      Document d;
      d.doc_id = j.at("doc_id").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.title_tokens = j.at("title_tokens").get<Tokens>();
      for (const auto& s : j.at("sections")) {
        Section sec;
        sec.heading_path = s.at("headings").get<std::vector<std::string>>();
        sec.text = s.at("text").get<std::string>();
        for (const auto& t : s.at("sentences")) {
          Sentence st;
          st.tokens = t.at("tokens").get<Tokens>();
          st.source_char_span = {t.at("span").at(0).get<std::size_t>(), t.at("span").at(1).get<std::size_t>()};
          sec.sentences.push_back(std::move(st));
        }
        d.sections.push_back(std::move(sec));
      }
      store.add(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(origin, line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
  return store;
}

Document build_document(std::string doc_id, std::string title,
                        std::vector<std::pair<std::vector<std::string>, std::string>> sections,
                        std::size_t* truncated) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.title = std::move(title);
  doc.title_tokens = tokenize(doc.title);
  if (doc.title_tokens.size() > kMaxSentenceTokens) doc.title_tokens.resize(kMaxSentenceTokens);
  for (auto& [headings, text] : sections) {
    Section sec;
    sec.heading_path = std::move(headings);
    sec.text = std::move(text);
    std::string_view view = sec.text;
    for (const Span& span : split_sentence_spans(view)) {
      auto toks = tokenize_with_offsets(view.substr(span.start, span.size()));
      if (toks.empty()) continue;
      if (toks.size() > kMaxSentenceTokens) {
        toks.resize(kMaxSentenceTokens);
        if (truncated) ++*truncated;
      }
      Sentence s;
      s.source_char_span = {span.start + toks.front().chars.start, span.start + toks.back().chars.end};
      for (auto& t : toks) s.tokens.push_back(std::move(t.token));
      sec.sentences.push_back(std::move(s));
    }
    doc.sections.push_back(std::move(sec));
  }
  return doc;
}

namespace {

// Parses and builds one chunk of lines, possibly in parallel, then appends
// the documents to the store in source order.
void ingest_chunk(CorpusStore& store, const std::vector<std::pair<std::size_t, std::string>>& lines,
                  const std::string& origin, int threads) {
  std::vector<Document> docs(lines.size());
  std::vector<std::size_t> trunc(lines.size(), 0);
  parallel_for(lines.size(), threads, [&](std::size_t k) {
    json j = json::parse(lines[k].second, nullptr, false);
    if (j.is_discarded()) throw ParseError(origin, lines[k].first, "invalid JSON");
    docs[k] = document_from_raw_json(j, origin, lines[k].first, &trunc[k]);
  });
  for (std::size_t k = 0; k < docs.size(); ++k) {
    try {
      store.add(std::move(docs[k]));
    } catch (const ValidationError& e) {
      throw ParseError(origin, lines[k].first, e.what());
    }
    store.add_truncated(trunc[k]);
  }
}

constexpr std::size_t kIngestChunk = 256;

}  // namespace

CorpusStore ingest_jsonl_docs(std::string_view contents, const std::string& origin, int threads) {
  CorpusStore store;
  std::vector<std::pair<std::size_t, std::string>> chunk;
  std::size_t line_no = 0, pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    chunk.emplace_back(line_no, std::string(line));
    if (chunk.size() == kIngestChunk) {
      ingest_chunk(store, chunk, origin, threads);
      chunk.clear();
    }
  }
  ingest_chunk(store, chunk, origin, threads);
  return store;
}

CorpusStore ingest_corpus(const std::filesystem::path& path, std::string_view format, int threads) {
  if (format != "jsonl-docs") throw ValidationError("unknown corpus format \"" + std::string(format) + "\"");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  CorpusStore store;
  std::vector<std::pair<std::size_t, std::string>> chunk;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    chunk.emplace_back(line_no, std::move(line));
    line.clear();
    if (chunk.size() == kIngestChunk) {
      ingest_chunk(store, chunk, path.string(), threads);
      chunk.clear();
    }
  }
  ingest_chunk(store, chunk, path.string(), threads);
  return store;
}

}  // namespace dsre
