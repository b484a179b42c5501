#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bacon {

inline constexpr std::string_view kVersion = "0.1.0";

// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::string line() const {
    return "# bacon " + std::string(kVersion) + " seed=" + std::to_string(seed) + " config_hash=" + hex64(config_hash);
  }
};

// Small CSV builder: a provenance comment, a header row, then rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    explicit Row(CsvTable& t) : t_(t) {}
    Row& operator<<(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& operator<<(const char* s) { return *this << std::string(s); }
    Row& operator<<(double v) { return *this << format_number(v); }
    Row& operator<<(float v) { return *this << format_number(static_cast<double>(v)); }
    Row& operator<<(int v) { return *this << format_number(v); }
    Row& operator<<(long v) { return *this << format_number(static_cast<std::int64_t>(v)); }
    Row& operator<<(long long v) { return *this << format_number(static_cast<std::int64_t>(v)); }
    Row& operator<<(unsigned long v) { return *this << format_number(static_cast<std::uint64_t>(v)); }
    Row& operator<<(unsigned long long v) { return *this << format_number(static_cast<std::uint64_t>(v)); }
    ~Row() { t_.rows_.push_back(std::move(cells_)); }

   private:
    CsvTable& t_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  const std::vector<std::string>& header() const { return header_; }

  void write(std::ostream& os, const Provenance* provenance = nullptr) const {
    if (provenance) os << provenance->line() << '\n';
    write_cells(os, header_);
    for (const auto& r : rows_) write_cells(os, r);
  }

  std::string str(const Provenance* provenance = nullptr) const {
    std::ostringstream os;
    write(os, provenance);
    return os.str();
  }

 private:
  static void write_cells(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace bacon
