#pragma once

// CSV emission: 17 significant digits in locale-independent scientific
// notation, '#' comment headers, atomic replace on write.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "adia/errors.hpp"

namespace adia {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.16e}", v);
}

class CsvDocument {
 public:
  void comment(std::string_view line) {
    text_ += "# ";
    text_ += line;
    text_ += '\n';
  }
  void comment(std::string_view key, std::string_view value) { comment(fmt::format("{} = {}", key, value)); }

  void header(const std::vector<std::string>& columns) { row(columns); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

/// Writes content to a sibling temporary file, then renames it over path.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);
  fs::path tmp = dir / fmt::format(".{}.tmp{}", path.filename().string(), static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error(fmt::format("cannot move output into place at {}", path.string()));
  }
}

}  // namespace adia
