// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace xcon {

// Contrastive objectives on unit-norm embeddings. Similarities are plain
// dot products scaled by 1/tau. Every loss is a mean over its anchors and
// returns the gradient with respect to each embedding row.

template <typename Scalar>
struct ContrastiveResult {
  Scalar loss = 0;
  Mat<Scalar> grad;
  Index anchors = 0;
};

/// Multi-positive InfoNCE over the rows of `e`.
///
/// Row i is an anchor when groups[i] != kNoLabel and at least one other row
/// shares its group; those rows are its positives. The softmax denominator
/// of every anchor runs over all other rows, positives included.
template <typename Scalar>
ContrastiveResult<Scalar> grouped_contrastive_loss(const Mat<Scalar>& e, std::span<const int> groups,
                                                   Scalar tau) {
  if (static_cast<Index>(groups.size()) != e.rows()) throw Error("group count does not match rows");
  if (!(tau > Scalar(0))) throw Error("tau must be > 0");
  const Index m = e.rows();
  const Mat<Scalar> logits = (e * e.transpose()) / tau;
  Mat<Scalar> coeff = Mat<Scalar>::Zero(m, m);

  ContrastiveResult<Scalar> out;
  Scalar total = 0;
  std::vector<Index> positives;
  for (Index a = 0; a < m; ++a) {
    if (groups[a] == kNoLabel) continue;
    positives.clear();
    for (Index n = 0; n < m; ++n) {
      if (n != a && groups[n] == groups[a]) positives.push_back(n);
    }
    if (positives.empty()) continue;

    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (Index n = 0; n < m; ++n) {
      if (n != a) peak = std::max(peak, logits(a, n));
    }
    Scalar sum = 0;
    for (Index n = 0; n < m; ++n) {
      if (n != a) sum += std::exp(logits(a, n) - peak);
    }
    const Scalar log_denominator = peak + std::log(sum);

    const Scalar share = Scalar(1) / static_cast<Scalar>(positives.size());
    Scalar positive_mean = 0;
    for (Index q : positives) positive_mean += logits(a, q);
    total += log_denominator - share * positive_mean;

    for (Index n = 0; n < m; ++n) {
      if (n != a) coeff(a, n) = std::exp(logits(a, n) - log_denominator);
    }
    for (Index q : positives) coeff(a, q) -= share;
    ++out.anchors;
  }
  if (out.anchors == 0) {
    out.grad = Mat<Scalar>::Zero(m, e.cols());
    return out;
  }
  const Scalar scale = Scalar(1) / (tau * static_cast<Scalar>(out.anchors));
  out.loss = total / static_cast<Scalar>(out.anchors);
  out.grad = ((coeff + coeff.transpose()) * e) * scale;
  return out;
}

template <typename Scalar>
Mat<Scalar> stack_rows(const Mat<Scalar>& top, const Mat<Scalar>& bottom) {
  Mat<Scalar> out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

/// Two views of b images: row i of `z` and row i of `z_hat` are positives.
template <typename Scalar>
struct Batch {
  Mat<Scalar> z;
  Mat<Scalar> z_hat;
  /// Class per image, kNoLabel on unlabeled rows.
  std::vector<int> labels;

  Index size() const { return z.rows(); }
};

template <typename Scalar>
struct PairGradient {
  Mat<Scalar> z;
  Mat<Scalar> z_hat;
};

template <typename Scalar>
struct PairLoss {
  Scalar loss = 0;
  PairGradient<Scalar> grad;
};

/// Self-supervised two-view loss: mean over all 2b anchors, each with its
/// other view as the positive and the remaining 2b-1 embeddings in the
/// denominator.
template <typename Scalar>
PairLoss<Scalar> unsup_contrastive_loss(const Mat<Scalar>& z, const Mat<Scalar>& z_hat, Scalar tau) {
  const Index b = z.rows();
  if (z_hat.rows() != b || z_hat.cols() != z.cols()) throw Error("view shape mismatch");
  if (b < 2) throw Error("no negatives: batch needs at least 2 images");
  std::vector<int> groups(static_cast<std::size_t>(2 * b));
  for (Index i = 0; i < b; ++i) groups[i] = groups[i + b] = static_cast<int>(i);
  auto r = grouped_contrastive_loss<Scalar>(stack_rows(z, z_hat), groups, tau);
  return {r.loss, {r.grad.topRows(b), r.grad.bottomRows(b)}};
}

/// Supervised loss over the rows of `e`: positives are other rows with the
/// same label. Anchors without a positive are skipped.
template <typename Scalar>
ContrastiveResult<Scalar> sup_contrastive_loss(const Mat<Scalar>& e, std::span<const int> labels, Scalar tau) {
  auto r = grouped_contrastive_loss<Scalar>(e, labels, tau);
  if (r.anchors == 0) throw Error("no positive pairs");
  return r;
}

template <typename Scalar>
struct CombinedLoss {
  Scalar loss = 0;
  Scalar unsup = 0;
  Scalar sup = 0;
  PairGradient<Scalar> grad;
};

/// (1 - lambda) * unsupervised over the whole batch + lambda * supervised
/// over its labeled rows (both views stacked). A batch without labeled
/// rows contributes only the unsupervised term.
template <typename Scalar>
CombinedLoss<Scalar> coarse_loss(const Batch<Scalar>& batch, Scalar tau, Scalar lambda) {
  if (lambda < Scalar(0) || lambda > Scalar(1)) throw Error("lambda must lie in [0, 1]");
  const Index b = batch.size();
  if (static_cast<Index>(batch.labels.size()) != b) throw Error("label count does not match batch");

  CombinedLoss<Scalar> out;
  const PairLoss<Scalar> u = unsup_contrastive_loss(batch.z, batch.z_hat, tau);
  out.unsup = u.loss;
  out.grad.z = (Scalar(1) - lambda) * u.grad.z;
  out.grad.z_hat = (Scalar(1) - lambda) * u.grad.z_hat;

  std::vector<Index> labeled;
  for (Index i = 0; i < b; ++i) {
    if (batch.labels[i] != kNoLabel) labeled.push_back(i);
  }
  if (lambda > Scalar(0) && !labeled.empty()) {
    const auto l = static_cast<Index>(labeled.size());
    Mat<Scalar> e(2 * l, batch.z.cols());
    std::vector<int> groups(static_cast<std::size_t>(2 * l));
    for (Index j = 0; j < l; ++j) {
      e.row(j) = batch.z.row(labeled[j]);
      e.row(j + l) = batch.z_hat.row(labeled[j]);
      groups[j] = groups[j + l] = batch.labels[labeled[j]];
    }
    const auto s = sup_contrastive_loss<Scalar>(e, groups, tau);
    out.sup = s.loss;
    for (Index j = 0; j < l; ++j) {
      out.grad.z.row(labeled[j]) += lambda * s.grad.row(j);
      out.grad.z_hat.row(labeled[j]) += lambda * s.grad.row(j + l);
    }
  }
  out.loss = (Scalar(1) - lambda) * out.unsup + lambda * out.sup;
  return out;
}

template <typename Scalar>
struct FineLoss {
  Scalar loss = 0;
  Scalar unsup = 0;
  Scalar sup = 0;
  std::vector<PairGradient<Scalar>> grads;
};

/// Expert objective: per-sub-dataset losses summed over the K experts,
/// each normalized by its own batch, then mixed by lambda.
template <typename Scalar>
FineLoss<Scalar> fine_loss(const std::vector<Batch<Scalar>>& sub_batches, Scalar tau, Scalar lambda) {
  FineLoss<Scalar> out;
  out.grads.reserve(sub_batches.size());
  for (const auto& batch : sub_batches) {
    if (batch.size() < 2) throw Error("sub-batch needs at least 2 images");
    auto part = coarse_loss(batch, tau, lambda);
    out.unsup += part.unsup;
    out.sup += part.sup;
    out.grads.push_back(std::move(part.grad));
  }
  out.loss = (Scalar(1) - lambda) * out.unsup + lambda * out.sup;
  return out;
}

}  // namespace xcon
