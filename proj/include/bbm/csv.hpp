#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include "bbm/errors.hpp"

namespace bbm::csv {

// Deterministic numeric formatting shared by all emitters: %.12g through
// snprintf, so identical doubles always give identical bytes.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(std::int64_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

using Field = std::variant<double, std::uint64_t, std::int64_t, int, std::string>;

// Comma-separated, '.' decimal point, header row, UTF-8, LF line endings.
class Writer {
 public:
  Writer(const std::string& path, std::initializer_list<std::string> columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw data_error("csv: cannot open " + path);
    std::string head;
    for (const auto& c : columns) {
      if (!head.empty()) head += ',';
      head += c;
    }
    out_ << head << '\n';
  }

  void row(std::initializer_list<Field> fields) {
    std::string line;
    for (const auto& f : fields) {
      if (!line.empty()) line += ',';
      std::visit([&](const auto& v) { line += to_string_of(v); }, f);
    }
    out_ << line << '\n';
    if (!out_) throw data_error("csv: write failed");
  }

 private:
  static std::string to_string_of(double v) { return fmt(v); }
  static std::string to_string_of(std::uint64_t v) { return fmt(v); }
  static std::string to_string_of(std::int64_t v) { return fmt(v); }
  static std::string to_string_of(int v) { return fmt(v); }
  static std::string to_string_of(const std::string& v) { return v; }

  std::ofstream out_;
};

}  // namespace bbm::csv
