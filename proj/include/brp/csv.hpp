#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace brp::csv {

// Minimal reader for the flat, unquoted comma-separated files this project
// exchanges. Quotes are rejected rather than interpreted.
class Reader {
 public:
  Reader(std::istream& in, std::string source_name);

  // Reads the header and checks it against `expected` exactly.
  void expect_header(const std::vector<std::string>& expected);
  // Reads the header, requiring `prefix` as its leading columns.
  std::vector<std::string> read_header_with_prefix(const std::vector<std::string>& prefix);

  // Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields);

  std::size_t line_number() const noexcept { return line_no_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line);

std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

// Shortest text that round-trips to the same double ("inf"/"-inf" for infinities).
std::string format_double(double v);

}  // namespace brp::csv
