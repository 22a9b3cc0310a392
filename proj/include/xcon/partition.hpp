// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xcon {

/// Disjoint cover of the dataset by K expert sub-datasets.
struct PartitionResult {
  Index K = 0;
  std::vector<int> membership;
  std::vector<Index> sizes;

  /// Row indices belonging to sub-dataset `k`.
  std::vector<Index> members(Index k) const;
};

/// Plain k-means on view 0 of normalized features. Rows are clustered in a
/// canonical (lexicographic) order, so the result does not depend on the
/// input row order. Any sub-dataset with fewer than two rows is an error.
PartitionResult partition_dataset(const FeatureMatrix& m, Index K, std::uint64_t seed);

struct PartitionSummaryRow {
  Index subdataset = 0;
  Index size = 0;
  double labeled_fraction = 0.0;
  std::map<int, Index> class_histogram;
};

std::vector<PartitionSummaryRow> partition_report(const PartitionResult& p, const DatasetView& view);
std::string format_partition_report(const std::vector<PartitionSummaryRow>& rows);

/// "id<TAB>subdataset_index" per row.
void write_partition(const std::filesystem::path& path, const PartitionResult& p, const DatasetView& view);
PartitionResult read_partition(const std::filesystem::path& path, const DatasetView& view);

}  // namespace xcon
