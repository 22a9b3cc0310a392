// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/contrastive.hpp"
#include "xcon/core.hpp"
#include "xcon/embedding_store.hpp"
#include "xcon/model.hpp"
#include "xcon/partition.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace xcon {

enum class ViewMode { kStoredViews, kFeatureJitter };

std::string to_string(ViewMode mode);
ViewMode parse_view_mode(const std::string& text);

struct TrainConfig {
  double tau = 0.07;
  double lambda = 0.35;
  double alpha = 0.1;
  Index K = 8;
  Index coarse_batch = 256;
  Index fine_batch = 32;
  Index epochs = 200;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  ViewMode view_mode = ViewMode::kFeatureJitter;
  double jitter_sigma = 0.05;
  double drop_prob = 0.1;
  Index hidden = 2048;
  Index projection = 128;
  /// When false the expert heads are never evaluated (coarse-only model).
  bool fine_path = true;

  void validate() const;
};

/// base_lr * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(Index step, Index total_steps, double base_lr);

/// Two views per image plus the class of labeled images.
template <typename Scalar>
struct ViewPair {
  Mat<Scalar> first;
  Mat<Scalar> second;
  std::vector<int> labels;
};

/// One optimizer step's inputs: the coarse batch and one batch per expert
/// (fine[k - 1] feeds head k).
template <typename Scalar>
struct StepBatch {
  ViewPair<Scalar> coarse;
  std::vector<ViewPair<Scalar>> fine;
};

struct ObjectiveWeights {
  double tau = 0.07;
  double lambda = 0.35;
  double alpha = 0.1;
  bool fine_path = true;
};

template <typename Scalar>
struct ObjectiveValue {
  Scalar coarse = 0;
  Scalar fine = 0;
  Scalar total = 0;
};

namespace detail {
template <typename Scalar>
Batch<Scalar> embed_pair(const HeadForward<Scalar>& f, const std::vector<int>& labels) {
  const Index b = f.z.rows() / 2;
  return {f.z.topRows(b), f.z.bottomRows(b), labels};
}
}  // namespace detail

/// Coarse objective through head 0. Gradients (scaled by `scale`) are
/// accumulated into `grads`.
template <typename Scalar>
Scalar coarse_objective(const TrainableModel<Scalar>& model, const ViewPair<Scalar>& pair,
                        const ObjectiveWeights& w, TrainableModel<Scalar>& grads, Scalar scale = 1) {
  const auto f = forward_head(model, 0, stack_rows(pair.first, pair.second));
  const auto loss = coarse_loss(detail::embed_pair(f, pair.labels), Scalar(w.tau), Scalar(w.lambda));
  backward_head(model, f, Mat<Scalar>(stack_rows(loss.grad.z, loss.grad.z_hat) * scale), grads);
  return loss.loss;
}

/// Expert objective: sub-batch k-1 goes through head k.
template <typename Scalar>
Scalar fine_objective(const TrainableModel<Scalar>& model, const std::vector<ViewPair<Scalar>>& pairs,
                      const ObjectiveWeights& w, TrainableModel<Scalar>& grads, Scalar scale = 1) {
  if (static_cast<Index>(pairs.size()) != model.experts()) throw Error("one fine batch per expert head required");
  std::vector<HeadForward<Scalar>> forwards;
  std::vector<Batch<Scalar>> batches;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    forwards.push_back(forward_head(model, static_cast<Index>(k + 1), stack_rows(pairs[k].first, pairs[k].second)));
    batches.push_back(detail::embed_pair(forwards.back(), pairs[k].labels));
  }
  const auto loss = fine_loss(batches, Scalar(w.tau), Scalar(w.lambda));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    backward_head(model, forwards[k], Mat<Scalar>(stack_rows(loss.grads[k].z, loss.grads[k].z_hat) * scale), grads);
  }
  return loss.loss;
}

/// coarse + alpha * fine. The adapter receives gradient from both paths,
/// head 0 from the coarse path only, expert heads from the fine path only.
template <typename Scalar>
ObjectiveValue<Scalar> total_loss(const TrainableModel<Scalar>& model, const StepBatch<Scalar>& batch,
                                  const ObjectiveWeights& w, TrainableModel<Scalar>& grads) {
  ObjectiveValue<Scalar> v;
  v.coarse = coarse_objective(model, batch.coarse, w, grads);
  if (w.fine_path && model.experts() > 0) {
    v.fine = fine_objective(model, batch.fine, w, grads, Scalar(w.alpha));
  }
  v.total = v.coarse + Scalar(w.alpha) * v.fine;
  return v;
}

/// Row indices for one step.
struct BatchIndices {
  std::vector<Index> coarse;
  /// fine[k] holds rows of sub-dataset k.
  std::vector<std::vector<Index>> fine;
  /// Sub-datasets smaller than fine_batch, sampled with replacement.
  std::vector<Index> resampled;
};

/// Coarse batch uniformly from all rows; one fine batch inside each
/// sub-dataset. Draws without replacement unless the pool is too small.
/// The two samplers use separate generators.
BatchIndices sample_batch_indices(const PartitionResult& partition, const TrainConfig& config,
                                  std::mt19937_64& coarse_rng, std::mt19937_64& fine_rng, bool with_fine = true);

/// Materializes the two views of `rows` according to config.view_mode.
ViewPair<float> make_view_pair(const FeatureMatrix& m, const std::vector<int>& labels,
                               const std::vector<Index>& rows, const TrainConfig& config, std::mt19937_64& rng);

struct TraceRow {
  Index step = 0;
  double lr = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double total = 0.0;
};

struct TrainResult {
  TrainableModel<float> model;
  std::vector<TraceRow> trace;
};

Index steps_per_epoch(Index rows, const TrainConfig& config);

/// SGD with momentum and weight decay on the joint objective, cosine
/// learning-rate schedule. Deterministic given the config seed.
TrainResult train(const FeatureMatrix& m, const DatasetView& view, const PartitionResult& partition,
                  const TrainConfig& config);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

/// Adapter output, L2-normalized: the space used for class assignment.
MatrixF embed_features(const TrainableModel<float>& model, const MatrixF& features);

inline constexpr char kCheckpointMagic[8] = {'X', 'C', 'O', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainableModel<float> model;
  std::string config_echo;
};

void write_checkpoint(const std::filesystem::path& path, const TrainableModel<float>& model,
                      const std::string& config_echo);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace xcon
