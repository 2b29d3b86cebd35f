#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace levelset {

/// Shortest text that round-trips is not what plotting tools expect; CSV
/// output uses a fixed 17 significant digits instead.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Minimal RFC-4180 writer: fields containing a comma, quote or line break
/// are quoted; rows end in CRLF.
class CsvWriter {
public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view s) {
    separate();
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
      out_ << s;
    } else {
      out_ << '"';
      for (char c : s) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    }
    return *this;
  }
  CsvWriter& field(double x) { return field(format_double(x)); }
  CsvWriter& field(std::int64_t x) { return field(std::to_string(x)); }
  CsvWriter& field(std::uint64_t x) { return field(std::to_string(x)); }
  CsvWriter& field(int x) { return field(std::to_string(x)); }
  CsvWriter& field(bool x) { return field(x ? std::string_view("true") : std::string_view("false")); }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }

  void end_row() {
    out_ << "\r\n";
    first_ = true;
  }

  void row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) field(c);
    end_row();
  }

private:
  void separate() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ostream& out_;
  bool first_ = true;
};

}  // namespace levelset
