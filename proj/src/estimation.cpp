// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/estimation.hpp"

#include "xcon/clustering.hpp"
#include "xcon/evaluation.hpp"
#include "xcon/parallel.hpp"
#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace xcon {

std::vector<Index> select_probe_rows(const DatasetView& view, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("probe fraction must lie in (0, 1)");
  Rng rng = make_rng(seed, stream::kProbeSplit);
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view.labeled[i]) by_class[*view.labels[i]].push_back(static_cast<Index>(i));
  }
  std::vector<Index> probe;
  for (auto& [cls, rows] : by_class) {
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[uniform_index(rng, i)]);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    probe.insert(probe.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(take, rows.size())));
  }
  std::sort(probe.begin(), probe.end());
  return probe;
}

namespace {

double probe_accuracy(const MatrixF& features, const DatasetView& view, const std::vector<Index>& probe, Index k,
                      const KSearchOptions& options) {
  const ClusterModel model = kmeans(features, k, KMeansOptions{.seed = options.seed, .n_init = options.n_init});
  std::vector<int> pred(probe.size());
  std::vector<int> truth(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    pred[i] = model.assignment[probe[i]];
    truth[i] = *view.labels[probe[i]];
  }
  SubsetMasks masks{std::vector<bool>(probe.size(), true), std::vector<bool>(probe.size(), true),
                    std::vector<bool>(probe.size(), false)};
  return clustering_accuracy(pred, truth, masks).acc_all;
}

}  // namespace

KSearchResult estimate_num_classes(const MatrixF& features, const DatasetView& view, const KSearchOptions& options) {
  if (static_cast<std::size_t>(features.rows()) != view.size()) throw Error("feature/view row-count mismatch");
  const auto seen = static_cast<Index>(view.seen_classes.size());
  if (options.k_min < seen) throw Error("k below seen-class count");
  const Index k_max = options.k_max.value_or(2 * seen + 10);
  if (k_max < options.k_min) throw Error("k_max below k_min");
  if (k_max > features.rows()) throw Error("k_max exceeds number of rows");
  if (view.labeled_count() < 10) throw Error("class-count estimation needs at least 10 labeled rows");

  KSearchResult result;
  result.probe_fraction = options.probe_fraction;
  const std::vector<Index> probe = select_probe_rows(view, options.probe_fraction, options.seed);
  if (probe.empty()) throw Error("empty probe set");

  std::map<Index, double> scored;
  auto evaluate = [&](const std::vector<Index>& grid) {
    std::vector<Index> todo;
    for (Index k : grid) {
      if (!scored.contains(k)) todo.push_back(k);
    }
    std::vector<double> acc(todo.size());
    parallel_chunks(todo.size(), 1, [&](std::size_t c, std::size_t, std::size_t) {
      acc[c] = probe_accuracy(features, view, probe, todo[c], options);
    });
    for (std::size_t c = 0; c < todo.size(); ++c) scored[todo[c]] = acc[c];
  };
  auto best_k = [&] {
    Index best = scored.begin()->first;
    for (const auto& [k, acc] : scored) {
      if (acc > scored[best]) best = k;
    }
    return best;
  };

  const Index step = std::max<Index>(1, (k_max - options.k_min) / 20);
  std::vector<Index> coarse;
  for (Index k = options.k_min; k <= k_max; k += step) coarse.push_back(k);
  if (coarse.back() != k_max) coarse.push_back(k_max);
  evaluate(coarse);

  const Index centre = best_k();
  std::vector<Index> fine;
  for (Index k = std::max(options.k_min, centre - step + 1); k <= std::min(k_max, centre + step - 1); ++k) {
    fine.push_back(k);
  }
  evaluate(fine);

  result.k_hat = best_k();
  for (const auto& [k, acc] : scored) result.scores.push_back({k, acc});
  return result;
}

void write_k_scores_csv(const std::filesystem::path& path, const KSearchResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "k,probe_acc\n" << std::setprecision(17);
  for (const auto& s : result.scores) out << s.k << ',' << s.probe_acc << '\n';
}

}  // namespace xcon
