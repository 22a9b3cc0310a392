// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <cstdint>
#include <vector>

namespace xcon {

struct KMeansOptions {
  std::uint64_t seed = 0;
  Index max_iter = 100;
  double tol = 1e-6;
  /// Independent seedings; the run with the lowest final inertia is kept.
  Index n_init = 1;
};

struct ClusterModel {
  Index k = 0;
  MatrixF centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
  Index iterations = 0;
  /// Inertia after each assignment step.
  std::vector<double> inertia_trace;
  /// Semi-supervised mode: bound_classes[c] is the seen class pinned to
  /// cluster c, for c < bound_classes.size().
  std::vector<int> bound_classes;
};

/// k-means++ seeding (D^2 weighting). Deterministic given `seed`.
MatrixF kmeans_pp_init(const MatrixF& x, Index k, std::uint64_t seed);

/// Lloyd's algorithm on squared Euclidean distance. Empty clusters are
/// re-seeded at the point farthest from its centroid.
ClusterModel kmeans(const MatrixF& x, Index k, const KMeansOptions& options = {});

/// Lloyd's algorithm where every labeled row is pinned to the cluster bound
/// to its class. Clusters 0..|seen|-1 are bound to the seen classes in
/// ascending order; the rest are seeded by k-means++ over unlabeled rows.
ClusterModel semi_supervised_kmeans(const MatrixF& x, const DatasetView& view, Index k,
                                    const KMeansOptions& options = {});

}  // namespace xcon
