#include "gfe/metrics.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "gfe/error.hpp"

namespace gfe {

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "labelings differ in length");
  if (a.size() < 2) return 1.0;

  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, n] : table) index += choose2(n);
  double sum_a = 0.0;
  for (const auto& [key, n] : rows) sum_a += choose2(n);
  double sum_b = 0.0;
  for (const auto& [key, n] : cols) sum_b += choose2(n);

  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  // Both partitions trivial (all singletons or one block each): agreement is perfect.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace gfe
