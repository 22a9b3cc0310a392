// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xcon {

/// Desk-scale stand-in for self-supervised image features in which a
/// class-irrelevant "background" factor dominates the geometry.
///
/// Each image is background centroid + fine-class offset + instance noise,
/// and each stored view adds independent view noise before normalization.
/// Class ids are background * n_fine_classes + fine index. In every
/// background the first round(seen_fraction * n_fine_classes) fine classes
/// are seen; of their images round(labeled_fraction * count) per class are
/// labeled.
struct GeneratorSpec {
  Index n_backgrounds = 2;
  Index n_fine_classes = 4;
  Index samples_per_class = 50;
  Index d = 32;
  double background_scale = 1.0;
  double class_scale = 0.3;
  double noise_sigma = 0.1;
  /// Dimension of the subspace holding every class offset (0 = all of d).
  Index class_rank = 8;
  Index views = 2;
  double view_sigma = 0.05;
  double seen_fraction = 0.5;
  double labeled_fraction = 0.5;
  std::uint64_t seed = 0;

  Index class_count() const { return n_backgrounds * n_fine_classes; }
  /// background_scale > class_scale > noise_sigma > 0.
  bool nuisance_dominant() const;
  void validate() const;
};

struct SyntheticData {
  FeatureMatrix features;
  DatasetView view;
  /// Background factor per row.
  std::vector<int> background;
};

SyntheticData generate(const GeneratorSpec& spec);

/// Writes `<prefix>.bin`, `<prefix>.meta` and `<prefix>.factors`
/// (metadata columns plus a background column).
void write_synthetic(const std::filesystem::path& prefix, const SyntheticData& data);

}  // namespace xcon
