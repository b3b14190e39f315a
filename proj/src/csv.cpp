#include "brp/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "brp/error.hpp"

namespace brp::csv {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(std::istream& in, std::string source_name) : in_(in), source_(std::move(source_name)) {}

void Reader::fail(const std::string& message) const {
  throw DataError(source_ + ":" + std::to_string(line_no_) + ": " + message);
}

bool Reader::next(std::vector<std::string_view>& fields) {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_no_ == 1 && line_.size() >= 3 && line_.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line_.erase(0, 3);
    }
    if (line_.empty()) continue;
    if (line_.find('"') != std::string::npos) fail("quoted fields are not supported");
    fields = split(line_);
    return true;
  }
  return false;
}

void Reader::expect_header(const std::vector<std::string>& expected) {
  std::vector<std::string_view> fields;
  if (!next(fields)) fail("missing header");
  bool ok = fields.size() == expected.size();
  for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == expected[i];
  if (!ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    fail("unexpected header, want `" + want + "`");
  }
}

std::vector<std::string> Reader::read_header_with_prefix(const std::vector<std::string>& prefix) {
  std::vector<std::string_view> fields;
  if (!next(fields)) fail("missing header");
  if (fields.size() < prefix.size()) fail("header too short");
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (fields[i] != prefix[i]) fail("header column " + std::to_string(i + 1) + " must be `" + prefix[i] + "`");
  }
  return {fields.begin() + static_cast<std::ptrdiff_t>(prefix.size()), fields.end()};
}

std::optional<double> parse_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field == "inf" || field == "+inf") return HUGE_VAL;
  if (field == "-inf") return -HUGE_VAL;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(std::string_view field) {
  if (field.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace brp::csv
