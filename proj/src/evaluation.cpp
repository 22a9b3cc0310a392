// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace xcon {

Assignment hungarian(const MatrixD& cost) {
  const Index rows = cost.rows();
  const Index cols = cost.cols();
  if (rows < 1 || cols < 1) throw Error("cost matrix must be non-empty");
  if (!cost.allFinite()) throw Error("non-finite cost entry");

  const Index n = std::max(rows, cols);
  const double pad = cost.maxCoeff() + 1.0;
  MatrixD a = MatrixD::Constant(n, n, pad);
  a.topLeftCorner(rows, cols) = cost;

  // 1-based potentials formulation; column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  for (Index j = 1; j <= n; ++j) {
    const Index i = p[j] - 1;
    if (i < rows && j - 1 < cols) {
      out.row_to_col[i] = static_cast<int>(j - 1);
      out.cost += cost(i, j - 1);
    }
  }
  return out;
}

namespace {
std::vector<int> distinct(const std::vector<int>& values, const std::vector<bool>& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) out.push_back(values[i]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int index_of(const std::vector<int>& sorted, int value) {
  return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
}

double ratio(std::size_t num, std::size_t den) { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
}  // namespace

EvalReport clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth, const SubsetMasks& masks) {
  const std::size_t n = masks.all.size();
  if (pred.size() != n || truth.size() != n || masks.old.size() != n || masks.novel.size() != n) {
    throw Error("prediction, truth and masks must have the same length");
  }
  EvalReport r;
  r.n_all = masks.count_all();
  if (r.n_all == 0) throw Error("empty All set");
  r.clusters = distinct(pred, masks.all);
  r.classes = distinct(truth, masks.all);

  const auto nr = static_cast<Index>(r.clusters.size());
  const auto nc = static_cast<Index>(r.classes.size());
  r.contingency = Mat<long>::Zero(nr, nc);
  for (std::size_t i = 0; i < n; ++i) {
    if (masks.all[i]) ++r.contingency(index_of(r.clusters, pred[i]), index_of(r.classes, truth[i]));
  }

  const double peak = static_cast<double>(r.contingency.maxCoeff());
  const MatrixD cost = (peak - r.contingency.cast<double>().array()).matrix();
  const Assignment match = hungarian(cost);
  r.permutation.assign(static_cast<std::size_t>(nr), kNoLabel);
  for (Index c = 0; c < nr; ++c) {
    if (match.row_to_col[c] >= 0) r.permutation[c] = r.classes[match.row_to_col[c]];
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!masks.all[i]) continue;
    const bool hit = r.permutation[index_of(r.clusters, pred[i])] == truth[i];
    if (masks.old[i]) {
      ++r.n_old;
      r.matched_old += hit;
    }
    if (masks.novel[i]) {
      ++r.n_new;
      r.matched_new += hit;
    }
    r.matched_all += hit;
  }
  r.acc_all = ratio(r.matched_all, r.n_all);
  r.acc_old = ratio(r.matched_old, r.n_old);
  r.acc_new = ratio(r.matched_new, r.n_new);
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "acc_all=" << r.acc_all << '\n'
      << "acc_old=" << r.acc_old << '\n'
      << "acc_new=" << r.acc_new << '\n'
      << "n_all=" << r.n_all << '\n'
      << "n_old=" << r.n_old << '\n'
      << "n_new=" << r.n_new << '\n'
      << "matched_all=" << r.matched_all << '\n'
      << "matched_old=" << r.matched_old << '\n'
      << "matched_new=" << r.matched_new << '\n'
      << "permutation=";
  for (std::size_t c = 0; c < r.clusters.size(); ++c) {
    out << (c ? "," : "") << r.clusters[c] << ':';
    if (r.permutation[c] == kNoLabel) {
      out << '-';
    } else {
      out << r.permutation[c];
    }
  }
  out << '\n';
  return out.str();
}

std::string report_csv_header() { return "dataset,seed,acc_all,acc_old,acc_new"; }

std::string report_csv_row(const std::string& dataset, std::uint64_t seed, const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << dataset << ',' << seed << ',' << r.acc_all << ',' << r.acc_old << ',' << r.acc_new;
  return out.str();
}

}  // namespace xcon
