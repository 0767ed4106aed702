#ifndef DSRE_CORPUS_H_
#define DSRE_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dsre/common.h"

namespace dsre {

inline constexpr std::size_t kMaxSentenceTokens = 128;

struct Sentence {
  Tokens tokens;
  // Byte offsets into the owning section's text.
  Span source_char_span;
};

struct Section {
  std::vector<std::string> heading_path;  // outermost first
  std::string text;
  std::vector<Sentence> sentences;
};

struct Document {
  std::string doc_id;
  std::string title;
  Tokens title_tokens;
  std::vector<Section> sections;
};

struct TokenWithOffset {
  std::string token;
  Span chars;
};

// Lowercases, splits on Unicode whitespace and puts punctuation in its own
// token. Hyphens and decimal points between word characters stay inside the
// token ("anti-ccp", "2.5").
Tokens tokenize(std::string_view text);
std::vector<TokenWithOffset> tokenize_with_offsets(std::string_view text);

// Splits at '.', '!' or '?' followed by whitespace and then an uppercase
// letter or the end of text. A fixed abbreviation list suppresses splits.
std::vector<std::string> split_sentences(std::string_view text);
std::vector<Span> split_sentence_spans(std::string_view text);

// Headings joined outermost-to-innermost with a "/" token between levels.
Tokens heading_path_tokens(const std::vector<std::string>& heading_path);
inline Tokens heading_path_tokens(const Section& section) {
  return heading_path_tokens(section.heading_path);
}

// Immutable after build; safe for concurrent reads.
class CorpusStore {
 public:
  CorpusStore() = default;

  // Throws ValidationError on a duplicate doc_id.
  void add(Document doc);

  const std::vector<Document>& documents() const { return docs_; }
  const Document* find(std::string_view doc_id) const;
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  std::size_t sentence_count() const;

  // Normalized JSONL serialization (one document per line, tokens included).
  std::string serialize() const;
  static CorpusStore deserialize(std::string_view jsonl, const std::string& origin = "<memory>");

  std::size_t truncated_sentences() const { return truncated_; }
  void add_truncated(std::size_t n) { truncated_ += n; }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t truncated_ = 0;
};

// Splits section texts into sentences and tokenizes them. Sentences longer
// than kMaxSentenceTokens are truncated; the count is reported through
// `truncated` when given.
Document build_document(std::string doc_id, std::string title,
                        std::vector<std::pair<std::vector<std::string>, std::string>> sections,
                        std::size_t* truncated = nullptr);

// Format "jsonl-docs": one object per line with doc_id, title and
// sections[{headings, text}]. Malformed lines raise ParseError with the line.
CorpusStore ingest_jsonl_docs(std::string_view contents, const std::string& origin = "<memory>",
                              int threads = 1);
CorpusStore ingest_corpus(const std::filesystem::path& path, std::string_view format = "jsonl-docs",
                          int threads = 1);

}  // namespace dsre

#endif  // DSRE_CORPUS_H_
