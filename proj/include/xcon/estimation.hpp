// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace xcon {

struct KScore {
  Index k = 0;
  double probe_acc = 0.0;
};

struct KSearchResult {
  Index k_hat = 0;
  /// Every evaluated candidate, ascending in k.
  std::vector<KScore> scores;
  double probe_fraction = 0.2;
};

struct KSearchOptions {
  Index k_min = 0;
  /// Defaults to 2 * |seen| + 10.
  std::optional<Index> k_max;
  std::uint64_t seed = 0;
  double probe_fraction = 0.2;
  /// k-means restarts per candidate.
  Index n_init = 1;
};

/// Stratified hold-out of labeled rows used to score candidate k.
std::vector<Index> select_probe_rows(const DatasetView& view, double fraction, std::uint64_t seed);

/// Class-count search: for each candidate k, plain k-means over all rows,
/// scored by Hungarian-matched accuracy on the probe rows. A coarse grid
/// (step max(1, (k_max - k_min) / 20)) is refined with step 1 around its
/// best point. Ties resolve to the smallest k.
KSearchResult estimate_num_classes(const MatrixF& features, const DatasetView& view, const KSearchOptions& options);

void write_k_scores_csv(const std::filesystem::path& path, const KSearchResult& result);

}  // namespace xcon
