// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/clustering.hpp"

#include "xcon/parallel.hpp"
#include "random.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>

namespace xcon {

namespace {

constexpr std::size_t kChunkRows = 512;

struct AssignStats {
  std::vector<int> assignment;
  std::vector<double> distance;  // squared distance to the assigned centroid
  MatrixD sums;
  std::vector<Index> counts;
  double inertia = 0.0;
};

// Nearest-centroid assignment with `pinned[i] >= 0` forcing row i.
// Per-chunk partial sums are reduced in chunk order.
AssignStats assign_rows(const MatrixD& x, const MatrixD& centroids, const std::vector<int>& pinned) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Index k = centroids.rows();
  const Index d = x.cols();
  AssignStats out;
  out.assignment.assign(n, 0);
  out.distance.assign(n, 0.0);

  const std::size_t chunks = chunk_count(n, kChunkRows);
  std::vector<MatrixD> part_sums(chunks, MatrixD::Zero(k, d));
  std::vector<std::vector<Index>> part_counts(chunks, std::vector<Index>(static_cast<std::size_t>(k), 0));
  std::vector<double> part_inertia(chunks, 0.0);

  parallel_chunks(n, kChunkRows, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = x.row(static_cast<Index>(i));
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      if (!pinned.empty() && pinned[i] >= 0) {
        best = pinned[i];
        best_dist = (row - centroids.row(best)).squaredNorm();
      } else {
        for (Index j = 0; j < k; ++j) {
          const double dist = (row - centroids.row(j)).squaredNorm();
          if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(j);
          }
        }
      }
      out.assignment[i] = best;
      out.distance[i] = best_dist;
      part_sums[c].row(best) += row;
      ++part_counts[c][static_cast<std::size_t>(best)];
      part_inertia[c] += best_dist;
    }
  });

  out.sums = MatrixD::Zero(k, d);
  out.counts.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.sums += part_sums[c];
    for (Index j = 0; j < k; ++j) out.counts[j] += part_counts[c][j];
    out.inertia += part_inertia[c];
  }
  return out;
}

// k-means++ continuation: picks `count` rows among `candidates`, weighting
// by squared distance to the nearest centroid in `existing` plus those
// already picked.
MatrixD seed_plus_plus(const MatrixD& x, const std::vector<Index>& candidates, const MatrixD& existing,
                       Index count, Rng& rng) {
  const Index d = x.cols();
  MatrixD chosen(existing.rows() + count, d);
  chosen.topRows(existing.rows()) = existing;
  if (count == 0) return chosen;
  if (candidates.empty()) throw Error("insufficient distinct points");

  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  auto update_nearest = [&](const auto& centroid) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      nearest[c] = std::min(nearest[c], (x.row(candidates[c]) - centroid).squaredNorm());
    }
  };
  for (Index e = 0; e < existing.rows(); ++e) update_nearest(existing.row(e));

  Index filled = existing.rows();
  if (existing.rows() == 0) {
    const Index first = candidates[uniform_index(rng, candidates.size())];
    chosen.row(filled++) = x.row(first);
    update_nearest(x.row(first));
  }
  while (filled < chosen.rows()) {
    double total = 0.0;
    for (double w : nearest) total += w;
    if (!(total > 0.0)) throw Error("insufficient distinct points");
    const double target = uniform_unit(rng) * total;
    double acc = 0.0;
    std::size_t pick = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (nearest[c] <= 0.0) continue;
      acc += nearest[c];
      pick = c;
      if (acc > target) break;
    }
    chosen.row(filled++) = x.row(candidates[pick]);
    update_nearest(x.row(candidates[pick]));
  }
  return chosen;
}

ClusterModel lloyd(const MatrixD& x, MatrixD centroids, const std::vector<int>& pinned,
                   const KMeansOptions& options) {
  if (options.max_iter < 1) throw Error("max_iter must be >= 1");
  if (options.tol < 0.0) throw Error("tol must be >= 0");
  const Index k = centroids.rows();
  ClusterModel model;
  model.k = k;

  for (Index it = 0; it < options.max_iter; ++it) {
    AssignStats stats = assign_rows(x, centroids, pinned);
    model.inertia_trace.push_back(stats.inertia);

    MatrixD updated = centroids;
    std::vector<Index> empty;
    for (Index j = 0; j < k; ++j) {
      if (stats.counts[j] > 0) {
        updated.row(j) = stats.sums.row(j) / static_cast<double>(stats.counts[j]);
      } else {
        empty.push_back(j);
      }
    }
    if (!empty.empty()) {
      // Farthest free rows, ties toward the lower row index.
      std::vector<Index> order;
      for (Index i = 0; i < x.rows(); ++i) {
        if (pinned.empty() || pinned[i] < 0) order.push_back(i);
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](Index a, Index b) { return stats.distance[a] > stats.distance[b]; });
      for (std::size_t e = 0; e < empty.size() && e < order.size(); ++e) {
        updated.row(empty[e]) = x.row(order[e]);
      }
    }

    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    model.iterations = it + 1;
    if (shift < options.tol) break;
  }

  AssignStats final_stats = assign_rows(x, centroids, pinned);
  model.inertia_trace.push_back(final_stats.inertia);
  model.assignment = std::move(final_stats.assignment);
  model.inertia = final_stats.inertia;
  model.centroids = centroids.cast<float>();
  return model;
}

void check_k(Index k, Index n) {
  if (k < 1) throw Error("k must be >= 1");
  if (k > n) throw Error("k exceeds number of rows");
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

// Restarts share one generator, so run r's seeding continues where run
// r-1 stopped; n_init = 1 reproduces a single seeded run.
template <typename Run>
ClusterModel best_of(const KMeansOptions& options, Run&& run) {
  if (options.n_init < 1) throw Error("n_init must be >= 1");
  Rng rng = make_rng(options.seed, stream::kKMeansInit);
  ClusterModel best = run(rng);
  for (Index r = 1; r < options.n_init; ++r) {
    ClusterModel candidate = run(rng);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

}  // namespace

MatrixF kmeans_pp_init(const MatrixF& x, Index k, std::uint64_t seed) {
  check_k(k, x.rows());
  Rng rng = make_rng(seed, stream::kKMeansInit);
  const MatrixD xd = x.cast<double>();
  return seed_plus_plus(xd, all_rows(x.rows()), MatrixD(0, x.cols()), k, rng).cast<float>();
}

ClusterModel kmeans(const MatrixF& x, Index k, const KMeansOptions& options) {
  check_k(k, x.rows());
  if (!x.allFinite()) throw Error("non-finite value");
  const MatrixD xd = x.cast<double>();
  return best_of(options, [&](Rng& rng) {
    MatrixD init = seed_plus_plus(xd, all_rows(x.rows()), MatrixD(0, x.cols()), k, rng);
    return lloyd(xd, std::move(init), {}, options);
  });
}

ClusterModel semi_supervised_kmeans(const MatrixF& x, const DatasetView& view, Index k,
                                    const KMeansOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != view.size()) throw Error("feature/view row-count mismatch");
  if (view.labeled_count() == 0) throw Error("no labeled rows");
  const auto seen = static_cast<Index>(view.seen_classes.size());
  if (k < seen) throw Error("k below seen-class count");
  check_k(k, x.rows());
  if (!x.allFinite()) throw Error("non-finite value");

  const MatrixD xd = x.cast<double>();
  std::map<int, int> cluster_of_class;
  std::vector<int> bound;
  for (int cls : view.seen_classes) {
    cluster_of_class[cls] = static_cast<int>(bound.size());
    bound.push_back(cls);
  }

  std::vector<int> pinned(view.size(), -1);
  MatrixD class_means = MatrixD::Zero(seen, x.cols());
  std::vector<Index> class_counts(static_cast<std::size_t>(seen), 0);
  std::vector<Index> unlabeled;
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto row = static_cast<Index>(i);
    if (view.labeled[i]) {
      const int c = cluster_of_class.at(*view.labels[i]);
      pinned[i] = c;
      class_means.row(c) += xd.row(row);
      ++class_counts[c];
    } else {
      unlabeled.push_back(row);
    }
  }
  for (Index c = 0; c < seen; ++c) class_means.row(c) /= static_cast<double>(class_counts[c]);

  ClusterModel model = best_of(options, [&](Rng& rng) {
    MatrixD init = seed_plus_plus(xd, unlabeled, class_means, k - seen, rng);
    return lloyd(xd, std::move(init), pinned, options);
  });
  model.bound_classes = std::move(bound);
  return model;
}

}  // namespace xcon
