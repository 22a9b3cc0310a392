// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <string>
#include <vector>

namespace xcon {

struct Assignment {
  /// Column matched to each row, or -1 when the row is left unmatched
  /// (only possible when rows > cols).
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost linear assignment (Hungarian method with potentials).
/// Rectangular inputs are padded to square with a constant larger than
/// every entry; min(rows, cols) pairs are returned.
Assignment hungarian(const MatrixD& cost);

struct EvalReport {
  double acc_all = 0.0;
  double acc_old = 0.0;
  double acc_new = 0.0;
  std::size_t n_all = 0;
  std::size_t n_old = 0;
  std::size_t n_new = 0;
  std::size_t matched_all = 0;
  std::size_t matched_old = 0;
  std::size_t matched_new = 0;
  /// Distinct predicted clusters / ground-truth classes, ascending; these
  /// index the contingency rows / columns.
  std::vector<int> clusters;
  std::vector<int> classes;
  /// permutation[r] = class matched to cluster r, or kNoLabel.
  std::vector<int> permutation;
  Mat<long> contingency;
};

/// Hungarian-matched accuracy over the unlabeled rows. One cluster->class
/// mapping is solved on All and reused for Old and New, so
/// matched_all == matched_old + matched_new.
EvalReport clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                               const SubsetMasks& masks);

/// Flat key=value block.
std::string format_report(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const std::string& dataset, std::uint64_t seed, const EvalReport& report);

}  // namespace xcon
