// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace xcon {

/// Embedding table. Rows are stored image-major, view-minor: row
/// `i * views + v` holds view `v` of image `i`.
struct FeatureMatrix {
  MatrixF data;
  Index views = 1;
  bool normalized = false;

  Index rows() const { return views > 0 ? data.rows() / views : 0; }
  Index dim() const { return data.cols(); }

  /// n x d copy of one view.
  MatrixF view(Index v) const;

  /// Throws xcon::Error when an invariant is violated.
  void validate() const;

  static FeatureMatrix from_views(const std::vector<MatrixF>& views);
};

/// Per-row identity, optional class label, and labeled flag.
///
/// Labels on unlabeled rows are held-out ground truth, used only for
/// evaluation. `seen_classes` is derived from the labeled rows.
struct DatasetView {
  std::vector<std::string> ids;
  std::vector<std::optional<int>> labels;
  std::vector<bool> labeled;
  std::set<int> seen_classes;

  std::size_t size() const { return ids.size(); }
  std::size_t labeled_count() const;

  /// Distinct labels over every row where one is known.
  std::set<int> known_classes() const;

  /// Dense labels for training: the class on labeled rows, kNoLabel otherwise.
  std::vector<int> training_labels() const;

  /// Ground truth on every row; throws if any row lacks it.
  std::vector<int> truth_labels() const;

  void validate() const;

  /// Builds a view and derives `seen_classes` from the labeled rows.
  static DatasetView make(std::vector<std::string> ids, std::vector<std::optional<int>> labels,
                          std::vector<bool> labeled);
};

/// Evaluation subsets over the unlabeled rows.
struct SubsetMasks {
  std::vector<bool> all;
  std::vector<bool> old;
  std::vector<bool> novel;

  std::size_t count_all() const;
  std::size_t count_old() const;
  std::size_t count_new() const;
};

struct LoadedFeatures {
  FeatureMatrix features;
  DatasetView view;
};

inline constexpr char kFeatureMagic[8] = {'X', 'C', 'O', 'N', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_file(const std::filesystem::path& path);

void write_metadata(const std::filesystem::path& path, const DatasetView& view);
DatasetView read_metadata(const std::filesystem::path& path);

/// `<prefix>.bin` / `<prefix>.meta`.
std::filesystem::path feature_bin_path(const std::filesystem::path& prefix);
std::filesystem::path feature_meta_path(const std::filesystem::path& prefix);

void save_features(const std::filesystem::path& prefix, const FeatureMatrix& m, const DatasetView& view);

/// Loads and cross-validates a feature/metadata pair. `meta` defaults to
/// the sibling `<prefix>.meta`.
LoadedFeatures load_features(const std::filesystem::path& prefix,
                             const std::optional<std::filesystem::path>& meta = std::nullopt);

/// Scales every row to unit L2 norm. Rows with norm below 1e-12 are an error.
FeatureMatrix l2_normalize(const FeatureMatrix& m);

template <typename Scalar>
Mat<Scalar> l2_normalize_rows(const Mat<Scalar>& m) {
  Mat<Scalar> out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const Scalar norm = out.row(i).norm();
    if (!(norm >= Scalar(1e-12))) throw Error("zero vector at row " + std::to_string(i));
    out.row(i) /= norm;
  }
  return out;
}

SubsetMasks build_subset_masks(const DatasetView& view);

}  // namespace xcon
