#include <algorithm>
#include <cmath>
#include <numeric>

#include "xfer/gains_meta.hpp"

namespace xfer {
namespace {

using Count = long long;

Count tied_pairs_of_runs(const std::vector<double>& sorted) {
  Count ties = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

// Sorts v ascending, returning the number of inversions removed.
Count merge_count(std::vector<double>& v, std::vector<double>& buf,
                  std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  Count swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<Count>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

// Knight's O(n log n) formulation: sort by (x, y), count joint and x ties,
// then count the inversions of y with a merge sort.
double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw Error("kendall_tau: need at least two observations");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw Error("kendall_tau: NaN input");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  Count x_ties = 0, joint_ties = 0;
  {
    Count run_x = 1, run_xy = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      const bool same_x = i < n && x[idx[i]] == x[idx[i - 1]];
      const bool same_xy = same_x && y[idx[i]] == y[idx[i - 1]];
      if (same_xy) {
        ++run_xy;
      } else {
        joint_ties += run_xy * (run_xy - 1) / 2;
        run_xy = 1;
      }
      if (same_x) {
        ++run_x;
      } else {
        x_ties += run_x * (run_x - 1) / 2;
        run_x = 1;
      }
    }
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const Count swaps = merge_count(ys, buf, 0, n);
  const Count y_ties = tied_pairs_of_runs(ys);

  const Count pairs = static_cast<Count>(n) * static_cast<Count>(n - 1) / 2;
  if (pairs == x_ties || pairs == y_ties) {
    throw Error("kendall_tau: degenerate input (all values tied)");
  }
  // concordant - discordant
  const Count s = pairs - x_ties - y_ties + joint_ties - 2 * swaps;
  const double denom = std::sqrt(static_cast<double>(pairs - x_ties) *
                                 static_cast<double>(pairs - y_ties));
  return static_cast<double>(s) / denom;
}

}  // namespace xfer
