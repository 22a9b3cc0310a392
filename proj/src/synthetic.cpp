// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/synthetic.hpp"

#include "random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace xcon {

bool GeneratorSpec::nuisance_dominant() const {
  return background_scale > class_scale && class_scale > noise_sigma && noise_sigma > 0.0;
}

void GeneratorSpec::validate() const {
  if (class_count() < 2) throw Error("class count must be >= 2");
  if (n_backgrounds < 1 || n_fine_classes < 1 || samples_per_class < 1 || d < 1 || views < 1) {
    throw Error("generator counts must be >= 1");
  }
  if (background_scale < 0.0 || class_scale < 0.0 || noise_sigma < 0.0 || view_sigma < 0.0) {
    throw Error("generator scales must be >= 0");
  }
  if (class_rank < 0 || class_rank > d) throw Error("class_rank must lie in [0, d]");
  if (seen_fraction <= 0.0 || seen_fraction > 1.0) throw Error("seen_fraction must lie in (0, 1]");
  if (labeled_fraction <= 0.0 || labeled_fraction > 1.0) throw Error("labeled_fraction must lie in (0, 1]");
}

namespace {

Vec<double> random_unit(Rng& rng, Index d) {
  Vec<double> v(d);
  do {
    for (Index j = 0; j < d; ++j) v[j] = standard_normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

constexpr std::uint64_t kSampleStreamBase = std::uint64_t{1} << 32;

}  // namespace

SyntheticData generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, stream::kGenerator);
  const Index d = spec.d;
  const Index rank = spec.class_rank == 0 ? d : spec.class_rank;

  std::vector<Vec<double>> backgrounds;
  for (Index b = 0; b < spec.n_backgrounds; ++b) backgrounds.push_back(spec.background_scale * random_unit(rng, d));

  // Orthonormal basis of the class-offset subspace.
  MatrixD basis(d, rank);
  for (Index r = 0; r < rank; ++r) basis.col(r) = random_unit(rng, d);
  basis = Eigen::HouseholderQR<MatrixD>(basis).householderQ() * MatrixD::Identity(d, rank);

  std::vector<Vec<double>> offsets;
  for (Index c = 0; c < spec.class_count(); ++c) offsets.push_back(spec.class_scale * (basis * random_unit(rng, rank)));

  const Index seen_per_background = static_cast<Index>(std::lround(spec.seen_fraction * spec.n_fine_classes));
  const Index labeled_per_class = static_cast<Index>(std::lround(spec.labeled_fraction * spec.samples_per_class));

  const Index n = spec.class_count() * spec.samples_per_class;
  std::vector<MatrixF> views(static_cast<std::size_t>(spec.views), MatrixF(n, d));
  std::vector<std::string> ids;
  std::vector<std::optional<int>> labels;
  std::vector<bool> labeled;
  SyntheticData out;

  Index row = 0;
  for (Index b = 0; b < spec.n_backgrounds; ++b) {
    for (Index f = 0; f < spec.n_fine_classes; ++f) {
      const int cls = static_cast<int>(b * spec.n_fine_classes + f);
      const bool seen = f < seen_per_background;
      // Which images of this class carry their label.
      std::vector<Index> order(static_cast<std::size_t>(spec.samples_per_class));
      for (Index i = 0; i < spec.samples_per_class; ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      std::vector<bool> gets_label(order.size(), false);
      if (seen) {
        for (Index i = 0; i < labeled_per_class; ++i) gets_label[order[i]] = true;
      }

      for (Index i = 0; i < spec.samples_per_class; ++i, ++row) {
        Rng sample_rng = make_rng(spec.seed, kSampleStreamBase + static_cast<std::uint64_t>(row));
        Vec<double> base = backgrounds[b] + offsets[cls];
        for (Index j = 0; j < d; ++j) base[j] += spec.noise_sigma * standard_normal(sample_rng);
        for (Index v = 0; v < spec.views; ++v) {
          Vec<double> x = base;
          for (Index j = 0; j < d; ++j) x[j] += spec.view_sigma * standard_normal(sample_rng);
          const double norm = x.norm();
          if (norm < 1e-12) throw Error("generated zero vector; increase noise_sigma");
          views[v].row(row) = (x / norm).cast<float>().transpose();
        }
        char id[32];
        std::snprintf(id, sizeof(id), "img%06ld", static_cast<long>(row));
        ids.emplace_back(id);
        labels.emplace_back(cls);
        labeled.push_back(gets_label[i]);
        out.background.push_back(static_cast<int>(b));
      }
    }
  }

  out.features = FeatureMatrix::from_views(views);
  out.features.normalized = true;
  out.view = DatasetView::make(std::move(ids), std::move(labels), std::move(labeled));
  return out;
}

void write_synthetic(const std::filesystem::path& prefix, const SyntheticData& data) {
  save_features(prefix, data.features, data.view);
  std::ofstream out(prefix.string() + ".factors");
  if (!out) throw Error("cannot write factors file");
  for (std::size_t i = 0; i < data.view.size(); ++i) {
    out << data.view.ids[i] << '\t' << *data.view.labels[i] << '\t' << (data.view.labeled[i] ? 'L' : 'U') << '\t'
        << data.background[i] << '\n';
  }
}

}  // namespace xcon
