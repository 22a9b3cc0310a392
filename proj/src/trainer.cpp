// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/trainer.hpp"

#include "binary_io.hpp"
#include "random.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

namespace xcon {

std::string to_string(ViewMode mode) {
  return mode == ViewMode::kStoredViews ? "stored_views" : "feature_jitter";
}

ViewMode parse_view_mode(const std::string& text) {
  if (text == "stored_views") return ViewMode::kStoredViews;
  if (text == "feature_jitter") return ViewMode::kFeatureJitter;
  throw Error("unknown view mode '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(tau > 0.0)) throw Error("tau must be > 0");
  if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must lie in [0, 1]");
  if (alpha < 0.0) throw Error("alpha must be >= 0");
  if (K < 1) throw Error("K must be >= 1");
  if (coarse_batch < 2) throw Error("coarse_batch must be >= 2");
  if (fine_batch < 2) throw Error("fine_batch must be >= 2");
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (base_lr < 0.0 || momentum < 0.0 || weight_decay < 0.0) throw Error("negative optimizer setting");
  if (jitter_sigma < 0.0 || drop_prob < 0.0 || drop_prob >= 1.0) throw Error("bad jitter setting");
  if (hidden < 1 || projection < 1) throw Error("head widths must be >= 1");
}

double cosine_lr(Index step, Index total_steps, double base_lr) {
  if (total_steps < 1) throw Error("total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw Error("step outside [0, total_steps]");
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

namespace {

std::vector<Index> draw_rows(const std::vector<Index>& pool, Index count, Rng& rng, bool& replaced) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  if (static_cast<Index>(pool.size()) >= count) {
    std::vector<Index> work = pool;
    for (Index i = 0; i < count; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) + uniform_index(rng, work.size() - static_cast<std::size_t>(i));
      std::swap(work[static_cast<std::size_t>(i)], work[j]);
      out.push_back(work[static_cast<std::size_t>(i)]);
    }
    replaced = false;
  } else {
    for (Index i = 0; i < count; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
    replaced = true;
  }
  return out;
}

}  // namespace

BatchIndices sample_batch_indices(const PartitionResult& partition, const TrainConfig& config, Rng& coarse_rng,
                                  Rng& fine_rng, bool with_fine) {
  BatchIndices out;
  const auto n = static_cast<Index>(partition.membership.size());
  std::vector<Index> everyone(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) everyone[i] = i;
  bool replaced = false;
  out.coarse = draw_rows(everyone, std::min(config.coarse_batch, n), coarse_rng, replaced);
  if (!with_fine) return out;
  for (Index k = 0; k < partition.K; ++k) {
    out.fine.push_back(draw_rows(partition.members(k), config.fine_batch, fine_rng, replaced));
    if (replaced) out.resampled.push_back(k);
  }
  return out;
}

ViewPair<float> make_view_pair(const FeatureMatrix& m, const std::vector<int>& labels, const std::vector<Index>& rows,
                               const TrainConfig& config, Rng& rng) {
  const auto b = static_cast<Index>(rows.size());
  const Index d = m.dim();
  ViewPair<float> pair{MatrixF(b, d), MatrixF(b, d), {}};
  pair.labels.reserve(rows.size());
  for (Index r = 0; r < b; ++r) pair.labels.push_back(labels[rows[r]]);

  if (config.view_mode == ViewMode::kStoredViews) {
    if (m.views < 2) throw Error("stored_views mode needs at least 2 views per image");
    for (Index r = 0; r < b; ++r) {
      Index first = 0;
      Index second = 1;
      if (m.views > 2) {
        first = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(m.views)));
        second = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(m.views - 1)));
        if (second >= first) ++second;
      }
      pair.first.row(r) = m.data.row(rows[r] * m.views + first);
      pair.second.row(r) = m.data.row(rows[r] * m.views + second);
    }
    return pair;
  }

  auto jitter = [&](auto out_row, Index source) {
    Vec<double> x = m.data.row(source * m.views).cast<double>().transpose();
    Vec<double> y = x;
    for (Index j = 0; j < d; ++j) {
      y[j] += config.jitter_sigma * standard_normal(rng);
      if (uniform_unit(rng) < config.drop_prob) y[j] = 0.0;
    }
    const double norm = y.norm();
    if (norm >= 1e-12) {
      out_row = (y / norm).cast<float>().transpose();
    } else {
      out_row = (x / std::max(x.norm(), 1e-12)).cast<float>().transpose();
    }
  };
  for (Index r = 0; r < b; ++r) {
    jitter(pair.first.row(r), rows[r]);
    jitter(pair.second.row(r), rows[r]);
  }
  return pair;
}

Index steps_per_epoch(Index rows, const TrainConfig& config) {
  return std::max<Index>(1, (rows + config.coarse_batch - 1) / config.coarse_batch);
}

TrainResult train(const FeatureMatrix& m, const DatasetView& view, const PartitionResult& partition,
                  const TrainConfig& config) {
  config.validate();
  m.validate();
  const Index n = m.rows();
  if (static_cast<Index>(view.size()) != n) throw Error("feature/view row-count mismatch");
  if (static_cast<Index>(partition.membership.size()) != n) throw Error("partition/feature row-count mismatch");
  if (partition.K != config.K) throw Error("partition K does not match config K");
  for (Index k = 0; k < partition.K; ++k) {
    if (partition.sizes[k] < 2) throw Error("sub-dataset " + std::to_string(k) + " has fewer than 2 rows");
  }
  if (n < 2) throw Error("training needs at least 2 rows");

  Rng init_rng = make_rng(config.seed, stream::kModelInit);
  TrainResult result;
  result.model = init_model<float>({m.dim(), config.hidden, config.projection, config.K}, init_rng);
  TrainableModel<float> momentum = result.model.zeros_like();
  TrainableModel<float> grads = result.model.zeros_like();

  Rng coarse_rng = make_rng(config.seed, stream::kCoarseSampler);
  Rng fine_rng = make_rng(config.seed, stream::kFineSampler);
  const std::vector<int> labels = view.training_labels();
  const ObjectiveWeights weights{config.tau, config.lambda, config.alpha, config.fine_path};
  const Index total_steps = config.epochs * steps_per_epoch(n, config);
  bool warned = false;

  for (Index step = 0; step < total_steps; ++step) {
    const double lr = cosine_lr(step, total_steps, config.base_lr);
    const BatchIndices idx = sample_batch_indices(partition, config, coarse_rng, fine_rng, config.fine_path);
    if (!idx.resampled.empty() && !warned) {
      std::clog << "xcon: sub-datasets smaller than fine_batch are sampled with replacement\n";
      warned = true;
    }
    StepBatch<float> batch;
    batch.coarse = make_view_pair(m, labels, idx.coarse, config, coarse_rng);
    for (const auto& rows : idx.fine) batch.fine.push_back(make_view_pair(m, labels, rows, config, fine_rng));

    grads.visit([](auto& p) { p.setZero(); });
    const ObjectiveValue<float> v = total_loss(result.model, batch, weights, grads);
    if (!std::isfinite(v.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (coarse=" << v.coarse << ", fine=" << v.fine << ")";
      throw Error(msg.str());
    }
    result.trace.push_back({step, lr, v.coarse, v.fine, v.total});

    const auto mu = static_cast<float>(config.momentum);
    const auto wd = static_cast<float>(config.weight_decay);
    const auto rate = static_cast<float>(lr);
    zip_parameters(
        [&](auto& p, auto& buf, auto& g) {
          buf = mu * buf + g + wd * p;
          p -= rate * buf;
        },
        result.model, momentum, grads);
    bool finite = true;
    result.model.visit([&](const auto& p) { finite = finite && p.allFinite(); });
    if (!finite) throw Error("non-finite parameter after step " + std::to_string(step));
  }
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "step,lr,L_coarse,L_fine,L_total\n" << std::setprecision(9);
  for (const auto& r : trace) out << r.step << ',' << r.lr << ',' << r.coarse << ',' << r.fine << ',' << r.total << '\n';
}

MatrixF embed_features(const TrainableModel<float>& model, const MatrixF& features) {
  return l2_normalize_rows<float>(adapt(model, features));
}

namespace {

void write_tensor(std::ostream& out, const std::string& name, const float* data, Index rows, Index cols) {
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(rows));
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(cols));
  io::write_floats(out, data, static_cast<std::size_t>(rows * cols));
}

std::vector<std::string> tensor_names(Index heads) {
  std::vector<std::string> names{"adapter.weight", "adapter.bias"};
  for (Index h = 0; h < heads; ++h) {
    for (int l = 0; l < 3; ++l) {
      const std::string base = "head" + std::to_string(h) + ".layer" + std::to_string(l);
      names.push_back(base + ".weight");
      names.push_back(base + ".bias");
    }
  }
  return names;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const TrainableModel<float>& model,
                      const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_echo.size()));
  out.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.heads.size()));
  const auto names = tensor_names(static_cast<Index>(model.heads.size()));
  std::size_t t = 0;
  model.visit([&](const auto& p) {
    const Index cols = p.ColsAtCompileTime == 1 ? 1 : p.cols();
    write_tensor(out, names[t++], p.data(), p.rows(), cols);
  });
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || !std::equal(magic, magic + 8, kCheckpointMagic)) throw Error("bad magic");
  if (io::read_le<std::uint32_t>(in) != kCheckpointVersion) throw Error("version mismatch");
  Checkpoint ckpt;
  ckpt.config_echo.resize(io::read_le<std::uint32_t>(in));
  in.read(ckpt.config_echo.data(), static_cast<std::streamsize>(ckpt.config_echo.size()));
  const auto heads = io::read_le<std::uint32_t>(in);
  if (heads < 1) throw Error("checkpoint has no heads");

  auto read_tensor = [&](const std::string& expected, auto& tensor) {
    std::string name(io::read_le<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != expected) throw Error("checkpoint tensor '" + name + "' where '" + expected + "' expected");
    const auto rows = static_cast<Index>(io::read_le<std::uint64_t>(in));
    const auto cols = static_cast<Index>(io::read_le<std::uint64_t>(in));
    if constexpr (std::decay_t<decltype(tensor)>::ColsAtCompileTime == 1) {
      if (cols != 1) throw Error("bias tensor with more than one column");
      tensor.resize(rows);
    } else {
      tensor.resize(rows, cols);
    }
    io::read_floats(in, tensor.data(), static_cast<std::size_t>(rows * cols));
    if (!tensor.allFinite()) throw Error("non-finite value in checkpoint");
  };
  ckpt.model.heads.resize(heads);
  const auto names = tensor_names(heads);
  std::size_t t = 0;
  ckpt.model.visit([&](auto& p) { read_tensor(names[t++], p); });
  return ckpt;
}

}  // namespace xcon
