// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only oracles and generators. Nothing here calls into the code paths
// it is used to check.

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace xcon::testing {

inline MatrixD random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixD m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline MatrixD random_unit_rows(Index rows, Index cols, std::mt19937_64& rng) {
  MatrixD m = random_matrix(rows, cols, rng);
  for (Index i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

/// Central differences of f with respect to every entry of x.
template <typename Derived>
MatrixD finite_difference(const std::function<double()>& f, Eigen::MatrixBase<Derived>& x, double eps = 1e-4) {
  MatrixD g(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + eps;
      const double up = f();
      x(i, j) = keep - eps;
      const double down = f();
      x(i, j) = keep;
      g(i, j) = (up - down) / (2 * eps);
    }
  }
  return g;
}

/// Largest elementwise relative error; entries below `floor` in magnitude
/// are compared on the absolute scale of `floor`.
inline double max_relative_error(const MatrixD& analytic, const MatrixD& numeric, double floor = 1e-3) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
  }
  return worst;
}

/// Loss of one anchor written straight from the definition: positive set
/// given explicitly, denominator over every other row.
inline double anchor_loss(const MatrixD& e, Index anchor, const std::vector<Index>& positives, double tau) {
  double denom = 0.0;
  for (Index n = 0; n < e.rows(); ++n) {
    if (n != anchor) denom += std::exp(e.row(anchor).dot(e.row(n)) / tau);
  }
  double sum = 0.0;
  for (Index q : positives) sum += std::log(std::exp(e.row(anchor).dot(e.row(q)) / tau) / denom);
  return -sum / static_cast<double>(positives.size());
}

/// Mean two-view loss over all 2b anchors of [z; z_hat].
inline double naive_unsup(const MatrixD& z, const MatrixD& z_hat, double tau) {
  const Index b = z.rows();
  MatrixD e(2 * b, z.cols());
  e << z, z_hat;
  double total = 0.0;
  for (Index a = 0; a < 2 * b; ++a) total += anchor_loss(e, a, {a < b ? a + b : a - b}, tau);
  return total / static_cast<double>(2 * b);
}

/// Mean supervised loss over rows with at least one same-label partner.
inline double naive_sup(const MatrixD& e, const std::vector<int>& labels, double tau) {
  double total = 0.0;
  int anchors = 0;
  for (Index a = 0; a < e.rows(); ++a) {
    std::vector<Index> pos;
    for (Index q = 0; q < e.rows(); ++q) {
      if (q != a && labels[q] == labels[a]) pos.push_back(q);
    }
    if (pos.empty()) continue;
    total += anchor_loss(e, a, pos, tau);
    ++anchors;
  }
  return total / anchors;
}

/// Brute-force minimum over all injective row->column maps (rows <= cols)
/// or column->row maps (rows > cols).
inline double brute_force_assignment(const MatrixD& cost) {
  const bool transpose = cost.rows() > cost.cols();
  const MatrixD c = transpose ? MatrixD(cost.transpose()) : cost;
  std::vector<Index> cols(static_cast<std::size_t>(c.cols()));
  std::iota(cols.begin(), cols.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index r = 0; r < c.rows(); ++r) total += c(r, cols[r]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

/// Isotropic Gaussian blobs around well-separated centres.
struct Blobs {
  MatrixF x;
  std::vector<int> label;
};

inline Blobs make_blobs(Index classes, Index per_class, Index d, double spread, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Blobs b;
  b.x.resize(classes * per_class, d);
  MatrixD centres(classes, d);
  for (Index c = 0; c < classes; ++c) {
    for (Index j = 0; j < d; ++j) centres(c, j) = 0.0;
    centres(c, c % d) = spread * (c / d + 1);
  }
  for (Index c = 0; c < classes; ++c) {
    for (Index i = 0; i < per_class; ++i) {
      const Index row = c * per_class + i;
      for (Index j = 0; j < d; ++j) b.x(row, j) = static_cast<float>(centres(c, j) + noise * normal(rng));
      b.label.push_back(static_cast<int>(c));
    }
  }
  return b;
}

}  // namespace xcon::testing
