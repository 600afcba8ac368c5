#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/linalg.hpp"

namespace onlinegamma2 {

// Comma-separated decimal rows without a header. The first row fixes the width unless one is
// given. Errors name the 1-based line.
inline std::vector<Vec> read_csv_rows(std::istream& in, std::optional<std::size_t> width = std::nullopt) {
  std::vector<Vec> rows;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { throw BadInput("line " + std::to_string(lineno) + ": " + what); };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      fail("empty line");
    }
    Vec row;
    std::string_view rest(line);
    for (;;) {
      const std::size_t comma = rest.find(',');
      std::string_view field = rest.substr(0, comma);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      double v = 0.0;
      auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || end != field.data() + field.size())
        fail("cannot parse '" + std::string(field) + "' as a number");
      if (!std::isfinite(v)) fail("non-finite value");
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!width) width = row.size();
    if (row.size() != *width)
      fail("expected " + std::to_string(*width) + " fields, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

// One universe index per line.
inline std::vector<std::size_t> read_records(std::istream& in) {
  std::vector<std::size_t> out;
  std::size_t lineno = 0;
  for (const Vec& r : read_csv_rows(in, 1)) {
    ++lineno;
    const double v = r[0];
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw BadInput("line " + std::to_string(lineno) + ": record must be a nonnegative integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace onlinegamma2
