#pragma once

#include <string>
#include <vector>

#include "forge/evalkit.hpp"

namespace testing {

// Prediction sets whose confusion counts reproduce the published success
// detection table: 76 in-distribution and 58 OOD episodes per method.
struct SplitCounts {
  long long tp, fp, fn, tn;
};

inline forge::PredictionSet predictions_with(forge::Split split, SplitCounts c) {
  using forge::Label;
  forge::PredictionSet s{split, {}};
  for (long long i = 0; i < c.tp; ++i) s.items.push_back({0.9, Label::success});
  for (long long i = 0; i < c.fp; ++i) s.items.push_back({0.7, Label::failure});
  for (long long i = 0; i < c.fn; ++i) s.items.push_back({0.2, Label::success});
  for (long long i = 0; i < c.tn; ++i) s.items.push_back({0.1, Label::failure});
  return s;
}

inline std::vector<forge::MethodPredictions> table2_inputs() {
  using forge::Split;
  auto method = [](std::string name, SplitCounts in, SplitCounts ood) {
    return forge::MethodPredictions{std::move(name),
                                    {predictions_with(Split::in_distribution, in),
                                     predictions_with(Split::ood, ood)}};
  };
  return {method("No Aug", {22, 7, 16, 31}, {6, 28, 23, 1}),
          method("Aug (A)", {24, 10, 14, 28}, {16, 26, 13, 3}),
          method("Aug (A)+(B)", {31, 25, 7, 13}, {22, 26, 7, 3})};
}

// Cells of a rendered " | "-separated table row, trimmed; the row label first.
inline std::vector<std::string> table_cells(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(" | ", start);
    std::string cell = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    if (pos == std::string::npos) break;
    start = pos + 3;
  }
  return out;
}

// Row of a rendered table whose label cell equals label; empty if absent.
inline std::vector<std::string> table_row(const std::string& table, const std::string& label) {
  std::size_t start = 0;
  while (start < table.size()) {
    auto nl = table.find('\n', start);
    if (nl == std::string::npos) nl = table.size();
    auto cells = table_cells(table.substr(start, nl - start));
    if (!cells.empty() && cells[0] == label) return cells;
    start = nl + 1;
  }
  return {};
}

}  // namespace testing
