#include "wmixnet/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>

namespace wmixnet {

namespace {
double choose2(double x) { return x * (x - 1.0) / 2.0; }
}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [k, v] : joint) index += choose2(v);
  double sum_rows = 0.0;
  for (const auto& [k, v] : rows) sum_rows += choose2(v);
  double sum_cols = 0.0;
  for (const auto& [k, v] : cols) sum_cols += choose2(v);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace wmixnet
