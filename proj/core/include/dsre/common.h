#ifndef DSRE_COMMON_H_
#define DSRE_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsre {

// Base error type for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented file format. Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A caller-supplied value or configuration is invalid.
class ValidationError : public Error {
 public:
  using Error::Error;
};

using Tokens = std::vector<std::string>;

// Half-open [start, end) range.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

std::vector<std::string> split_tabs(std::string_view line);
std::string join(const Tokens& tokens, std::string_view sep = " ");
std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);

// Reads a whole file; throws Error when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never observe a
// half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Runs fn(i) for i in [0, n) across up to `threads` workers. Each index is
// visited exactly once; callers write into pre-sized slots so results do not
// depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace dsre

#endif  // DSRE_COMMON_H_
