#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each one is written the slow, obvious way and shares no code with
// the library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "xfer/core_types.hpp"
#include "xfer/domain_distance.hpp"

namespace oracle {

/// Minimum total cost over all n! permutations.
inline double brute_force_assignment(const xfer::DenseMatrix& cost) {
  const std::size_t n = cost.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += cost.at(r, perm[r]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Kendall tau-b by enumerating every pair.
inline double kendall_tau_pairs(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      ((dx > 0) == (dy > 0) ? concordant : discordant) += 1;
    }
  }
  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(n0 - tied_x) * static_cast<double>(n0 - tied_y));
}

inline double iou(const xfer::Box& a, const xfer::Box& b) {
  const double ix = std::max(0.0, std::min(a.x() + a.w(), b.x() + b.w()) - std::max(a.x(), b.x()));
  const double iy = std::max(0.0, std::min(a.y() + a.h(), b.y() + b.h()) - std::max(a.y(), b.y()));
  const double inter = ix * iy;
  return inter / (a.w() * a.h() + b.w() * b.h() - inter);
}

/// AP from scratch at every distinct score cutoff: keep detections scoring
/// at least the cutoff, match them greedily (score order, ties by index,
/// best-IoU unmatched gt), take precision/recall, then integrate the
/// precision envelope over recall. Returns -1 when the class has neither
/// detections nor ground truth.
inline double brute_force_ap(const std::vector<std::vector<xfer::Box>>& dets,
                             const std::vector<std::vector<xfer::Box>>& gts, double thr,
                             int class_id) {
  std::size_t num_gt = 0, num_det = 0;
  std::vector<double> cutoffs;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (const auto& d : dets[i]) {
      if (d.class_id() != class_id) continue;
      ++num_det;
      cutoffs.push_back(d.score());
    }
    for (const auto& g : gts[i]) num_gt += g.class_id() == class_id ? 1 : 0;
  }
  if (num_gt == 0 && num_det == 0) return -1.0;
  if (num_gt == 0 || num_det == 0) return 0.0;
  std::sort(cutoffs.begin(), cutoffs.end(), std::greater<>());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());

  std::vector<double> precision, recall;
  for (double cut : cutoffs) {
    std::size_t tp = 0, kept = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      std::vector<std::size_t> idx;
      for (std::size_t k = 0; k < dets[i].size(); ++k) {
        if (dets[i][k].class_id() == class_id && dets[i][k].score() >= cut) idx.push_back(k);
      }
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return dets[i][a].score() > dets[i][b].score();
      });
      std::vector<bool> used(gts[i].size(), false);
      for (std::size_t k : idx) {
        ++kept;
        double best = -1.0;
        std::size_t best_g = gts[i].size();
        for (std::size_t g = 0; g < gts[i].size(); ++g) {
          if (used[g] || gts[i][g].class_id() != class_id) continue;
          const double v = iou(dets[i][k], gts[i][g]);
          if (v >= thr && v > best) {
            best = v;
            best_g = g;
          }
        }
        if (best_g < gts[i].size()) {
          used[best_g] = true;
          ++tp;
        }
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(kept));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    double interp = 0.0;
    for (std::size_t j = 0; j < recall.size(); ++j) {
      if (recall[j] >= recall[k]) interp = std::max(interp, precision[j]);
    }
    ap += (recall[k] - (k == 0 ? 0.0 : recall[k - 1])) * interp;
  }
  return ap;
}

/// Largest corner shift (scanned on a grid of `step`) for which the
/// translated, shrunk and grown boxes all keep IoU >= min_iou.
inline double scanned_radius(double w, double h, double min_iou, double step) {
  auto ok = [&](double r) {
    const xfer::Box orig(0, 0, w, h);
    const double moved = iou(orig, xfer::Box(r, r, w, h));
    const double shrunk =
        (w - 2 * r > 0 && h - 2 * r > 0) ? iou(orig, xfer::Box(r, r, w - 2 * r, h - 2 * r)) : 0.0;
    const double grown = iou(orig, xfer::Box(-r, -r, w + 2 * r, h + 2 * r));
    return moved >= min_iou && shrunk >= min_iou && grown >= min_iou;
  };
  double r = 0.0;
  while (ok(r + step)) r += step;
  return r;
}

/// Selection sampling (Knuth's algorithm S) driven by the same seeded
/// engine: visit items in order and keep item i with probability
/// needed / remaining.
inline std::vector<std::size_t> selection_sample(std::size_t count, std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> keep;
  if (n >= count) {
    keep.resize(count);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    return keep;
  }
  std::mt19937_64 eng(seed);
  std::size_t needed = n;
  for (std::size_t i = 0; i < count && needed > 0; ++i) {
    const std::size_t remaining = count - i;
    const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    if (u * static_cast<double>(remaining) < static_cast<double>(needed)) {
      keep.push_back(i);
      --needed;
    }
  }
  return keep;
}

/// Central finite differences of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Normwise relative error ||a - n|| / max(||a||, ||n||); 0 when both vanish.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace oracle
