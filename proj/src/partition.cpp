// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/partition.hpp"

#include "xcon/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace xcon {

std::vector<Index> PartitionResult::members(Index k) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < membership.size(); ++i) {
    if (membership[i] == k) out.push_back(static_cast<Index>(i));
  }
  return out;
}

PartitionResult partition_dataset(const FeatureMatrix& m, Index K, std::uint64_t seed) {
  if (!m.normalized) throw Error("partition requires normalized features");
  const Index n = m.rows();
  if (K < 1 || 2 * K > n) throw Error("K must satisfy 1 <= K <= n/2");

  const MatrixF base = m.view(0);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const float* ra = base.row(a).data();
    const float* rb = base.row(b).data();
    return std::lexicographical_compare(ra, ra + base.cols(), rb, rb + base.cols());
  });
  MatrixF sorted(n, base.cols());
  for (Index i = 0; i < n; ++i) sorted.row(i) = base.row(order[i]);

  const ClusterModel model = kmeans(sorted, K, KMeansOptions{.seed = seed});

  PartitionResult p;
  p.K = K;
  p.membership.assign(static_cast<std::size_t>(n), 0);
  p.sizes.assign(static_cast<std::size_t>(K), 0);
  for (Index i = 0; i < n; ++i) {
    p.membership[order[i]] = model.assignment[i];
    ++p.sizes[model.assignment[i]];
  }
  for (Index k = 0; k < K; ++k) {
    if (p.sizes[k] < 2) {
      throw Error("degenerate partition: sub-dataset " + std::to_string(k) + " has " +
                  std::to_string(p.sizes[k]) + " rows at K=" + std::to_string(K));
    }
  }
  return p;
}

std::vector<PartitionSummaryRow> partition_report(const PartitionResult& p, const DatasetView& view) {
  std::vector<PartitionSummaryRow> rows(static_cast<std::size_t>(p.K));
  std::vector<Index> labeled(static_cast<std::size_t>(p.K), 0);
  for (Index k = 0; k < p.K; ++k) rows[k].subdataset = k;
  for (std::size_t i = 0; i < p.membership.size(); ++i) {
    auto& row = rows[p.membership[i]];
    ++row.size;
    if (view.labeled[i]) ++labeled[p.membership[i]];
    if (view.labels[i]) ++row.class_histogram[*view.labels[i]];
  }
  for (Index k = 0; k < p.K; ++k) {
    rows[k].labeled_fraction = rows[k].size ? static_cast<double>(labeled[k]) / rows[k].size : 0.0;
  }
  return rows;
}

std::string format_partition_report(const std::vector<PartitionSummaryRow>& rows) {
  std::ostringstream out;
  out << "subdataset\tsize\tlabeled_fraction\tclass_histogram\n";
  for (const auto& row : rows) {
    out << row.subdataset << '\t' << row.size << '\t' << row.labeled_fraction << '\t';
    bool first = true;
    for (const auto& [cls, count] : row.class_histogram) {
      out << (first ? "" : ",") << cls << ':' << count;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

void write_partition(const std::filesystem::path& path, const PartitionResult& p, const DatasetView& view) {
  if (p.membership.size() != view.size()) throw Error("partition/view row-count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < view.size(); ++i) out << view.ids[i] << '\t' << p.membership[i] << '\n';
}

PartitionResult read_partition(const std::filesystem::path& path, const DatasetView& view) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < view.size(); ++i) row_of[view.ids[i]] = i;

  PartitionResult p;
  p.membership.assign(view.size(), -1);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("partition line without tab: '" + line + "'");
    const auto it = row_of.find(line.substr(0, tab));
    if (it == row_of.end()) throw Error("partition names unknown id '" + line.substr(0, tab) + "'");
    const int k = std::stoi(line.substr(tab + 1));
    if (k < 0) throw Error("negative sub-dataset index");
    p.membership[it->second] = k;
    p.K = std::max<Index>(p.K, k + 1);
  }
  p.sizes.assign(static_cast<std::size_t>(p.K), 0);
  for (int k : p.membership) {
    if (k < 0) throw Error("partition file does not cover every row");
    ++p.sizes[k];
  }
  return p;
}

}  // namespace xcon
