// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"
#include "xcon/estimation.hpp"
#include "xcon/evaluation.hpp"
#include "xcon/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace xcon {

/// Everything one pipeline run depends on. Keys of the text form match
/// the CLI long flags, so an echoed config can be replayed with --config.
struct RunConfig {
  std::filesystem::path features;
  std::optional<std::filesystem::path> meta;
  std::filesystem::path out;
  std::string dataset = "dataset";
  std::uint64_t seed = 0;
  int threads = 1;
  TrainConfig train;
  /// Class count for the final assignment; defaults to the number of
  /// ground-truth classes when unset.
  std::optional<Index> num_classes;
  bool estimate_k = false;
  std::optional<Index> k_min;
  std::optional<Index> k_max;
  Index kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  Index kmeans_n_init = 1;

  /// key=value lines plus commented stage seeds.
  std::string echo() const;
  void set(const std::string& key, const std::string& value);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

enum class Stage : std::uint64_t { kPartition = 1, kTrain = 2, kAssign = 3, kEstimate = 4 };

/// Per-stage seed derived from the root seed.
std::uint64_t stage_seed(std::uint64_t root, Stage stage);

struct PipelineResult {
  Index num_classes = 0;
  std::optional<KSearchResult> k_search;
  std::optional<EvalReport> report;
  std::vector<int> assignment;
};

/// partition -> train -> embed (adapter space) -> semi-supervised k-means
/// -> evaluation. Writes config.txt, partition.tsv, partition_report.txt,
/// model.ckpt, trace.csv, assignments.tsv, pca.csv and, when ground truth
/// is available, report.txt / report.csv. On failure writes error.txt and
/// throws an Error naming the stage.
PipelineResult run_pipeline(const RunConfig& config);

enum class SweepAxis { kAlpha, kLambda, kPartitions };
SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double acc_all = 0.0;
  double acc_old = 0.0;
  double acc_new = 0.0;
};

/// One pipeline per (value, seed) under `<out>/<axis>-<value>/seed-<seed>`;
/// failed cells are counted and skipped. Writes `<out>/sweep.csv`.
std::vector<SweepRow> run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds);

// Artifact helpers shared with the CLI.

/// L2-normalizes unless already normalized.
FeatureMatrix prepare_features(const FeatureMatrix& m);

void write_assignments(const std::filesystem::path& path, const DatasetView& view, const std::vector<int>& assignment);
std::vector<int> read_assignments(const std::filesystem::path& path, const DatasetView& view);

/// Rows projected on the top two principal components.
MatrixD pca_2d(const MatrixF& x);
void write_pca_csv(const std::filesystem::path& path, const DatasetView& view, const MatrixF& embeddings,
                   const std::vector<int>& assignment);

/// Class-count search settings implied by a run config.
KSearchOptions estimate_options(const RunConfig& config, const DatasetView& view);

/// Number of ground-truth classes, or throws if any row lacks one.
Index truth_class_count(const DatasetView& view);

bool has_full_truth(const DatasetView& view);

}  // namespace xcon
