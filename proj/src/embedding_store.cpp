// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/embedding_store.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace xcon {

MatrixF FeatureMatrix::view(Index v) const {
  if (v < 0 || v >= views) throw Error("view index out of range");
  MatrixF out(rows(), dim());
  for (Index i = 0; i < rows(); ++i) out.row(i) = data.row(i * views + v);
  return out;
}

void FeatureMatrix::validate() const {
  if (views < 1) throw Error("views must be >= 1");
  if (data.rows() == 0 || data.cols() == 0) throw Error("empty matrix");
  if (data.rows() % views != 0) throw Error("row count is not a multiple of the view count");
  if (!data.allFinite()) throw Error("non-finite value");
  if (normalized) {
    for (Index r = 0; r < data.rows(); ++r) {
      if (std::abs(data.row(r).cast<double>().norm() - 1.0) > 1e-5) {
        throw Error("row " + std::to_string(r) + " flagged normalized but norm != 1");
      }
    }
  }
}

FeatureMatrix FeatureMatrix::from_views(const std::vector<MatrixF>& views) {
  if (views.empty()) throw Error("no views");
  const Index n = views.front().rows();
  const Index d = views.front().cols();
  FeatureMatrix m;
  m.views = static_cast<Index>(views.size());
  m.data.resize(n * m.views, d);
  for (Index v = 0; v < m.views; ++v) {
    if (views[v].rows() != n || views[v].cols() != d) throw Error("view shape mismatch");
    for (Index i = 0; i < n; ++i) m.data.row(i * m.views + v) = views[v].row(i);
  }
  return m;
}

std::size_t DatasetView::labeled_count() const {
  return static_cast<std::size_t>(std::count(labeled.begin(), labeled.end(), true));
}

std::set<int> DatasetView::known_classes() const {
  std::set<int> out;
  for (const auto& l : labels) {
    if (l) out.insert(*l);
  }
  return out;
}

std::vector<int> DatasetView::training_labels() const {
  std::vector<int> out(size(), kNoLabel);
  for (std::size_t i = 0; i < size(); ++i) {
    if (labeled[i]) out[i] = *labels[i];
  }
  return out;
}

std::vector<int> DatasetView::truth_labels() const {
  std::vector<int> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!labels[i]) throw Error("row '" + ids[i] + "' has no ground-truth label");
    out[i] = *labels[i];
  }
  return out;
}

void DatasetView::validate() const {
  if (labels.size() != ids.size() || labeled.size() != ids.size()) {
    throw Error("dataset view columns have different lengths");
  }
  std::unordered_set<std::string> seen_ids;
  std::set<int> labeled_classes;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!seen_ids.insert(ids[i]).second) throw Error("duplicate id '" + ids[i] + "'");
    if (labels[i] && *labels[i] < 0) throw Error("negative label on row '" + ids[i] + "'");
    if (labeled[i]) {
      if (!labels[i]) throw Error("labeled row '" + ids[i] + "' has no label");
      labeled_classes.insert(*labels[i]);
    }
  }
  if (labeled_classes != seen_classes) throw Error("seen classes do not match labeled rows");
}

DatasetView DatasetView::make(std::vector<std::string> ids, std::vector<std::optional<int>> labels,
                              std::vector<bool> labeled) {
  DatasetView view{std::move(ids), std::move(labels), std::move(labeled), {}};
  if (view.labeled.size() == view.labels.size()) {
    for (std::size_t i = 0; i < view.labeled.size(); ++i) {
      if (view.labeled[i] && view.labels[i]) view.seen_classes.insert(*view.labels[i]);
    }
  }
  view.validate();
  return view;
}

namespace {
std::size_t count_true(const std::vector<bool>& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
}
}  // namespace

std::size_t SubsetMasks::count_all() const { return count_true(all); }
std::size_t SubsetMasks::count_old() const { return count_true(old); }
std::size_t SubsetMasks::count_new() const { return count_true(novel); }

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  io::write_le<std::uint32_t>(out, kFeatureVersion);
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.views));
  io::write_floats(out, m.data.data(), static_cast<std::size_t>(m.data.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || !std::equal(magic, magic + 8, kFeatureMagic)) {
    throw Error("bad magic in '" + path.string() + "'");
  }
  const auto version = io::read_le<std::uint32_t>(in);
  if (version != kFeatureVersion) throw Error("version mismatch: " + std::to_string(version));
  const auto n = io::read_le<std::uint64_t>(in);
  const auto d = io::read_le<std::uint32_t>(in);
  const auto views = io::read_le<std::uint32_t>(in);
  if (n == 0) throw Error("empty matrix (n = 0)");
  if (d == 0) throw Error("empty matrix (d = 0)");
  if (views == 0) throw Error("views must be >= 1");

  const auto header = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::end);
  const auto available = static_cast<std::uint64_t>(in.tellg()) - header;
  const std::uint64_t values = n * views * d;
  if (values / n / views != d || available < values * sizeof(float)) throw Error("truncated payload");
  in.seekg(static_cast<std::streamoff>(header));

  FeatureMatrix m;
  m.views = views;
  m.data.resize(static_cast<Index>(n * views), static_cast<Index>(d));
  io::read_floats(in, m.data.data(), static_cast<std::size_t>(values));
  if (!m.data.allFinite()) throw Error("non-finite value in '" + path.string() + "'");
  return m;
}

void write_metadata(const std::filesystem::path& path, const DatasetView& view) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < view.size(); ++i) {
    out << view.ids[i] << '\t';
    if (view.labels[i]) {
      out << *view.labels[i];
    } else {
      out << '-';
    }
    out << '\t' << (view.labeled[i] ? 'L' : 'U') << '\n';
  }
}

DatasetView read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<std::string> ids;
  std::vector<std::optional<int>> labels;
  std::vector<bool> labeled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 3) throw Error("metadata line " + std::to_string(line_no) + ": expected 3 fields");
    ids.push_back(fields[0]);
    if (fields[1] == "-") {
      labels.emplace_back();
    } else {
      try {
        std::size_t used = 0;
        labels.emplace_back(std::stoi(fields[1], &used));
        if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
      } catch (const std::exception&) {
        throw Error("metadata line " + std::to_string(line_no) + ": bad label '" + fields[1] + "'");
      }
    }
    if (fields[2] != "L" && fields[2] != "U") {
      throw Error("metadata line " + std::to_string(line_no) + ": flag must be L or U");
    }
    labeled.push_back(fields[2] == "L");
  }
  return DatasetView::make(std::move(ids), std::move(labels), std::move(labeled));
}

std::filesystem::path feature_bin_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + ".bin");
}

std::filesystem::path feature_meta_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + ".meta");
}

void save_features(const std::filesystem::path& prefix, const FeatureMatrix& m, const DatasetView& view) {
  if (static_cast<std::size_t>(m.rows()) != view.size()) throw Error("metadata/matrix row-count mismatch");
  write_feature_file(feature_bin_path(prefix), m);
  write_metadata(feature_meta_path(prefix), view);
}

LoadedFeatures load_features(const std::filesystem::path& prefix,
                             const std::optional<std::filesystem::path>& meta) {
  LoadedFeatures out;
  out.features = read_feature_file(feature_bin_path(prefix));
  out.view = read_metadata(meta.value_or(feature_meta_path(prefix)));
  if (static_cast<std::size_t>(out.features.rows()) != out.view.size()) {
    throw Error("metadata/matrix row-count mismatch: " + std::to_string(out.view.size()) + " vs " +
                std::to_string(out.features.rows()));
  }
  bool unit = true;
  for (Index r = 0; r < out.features.data.rows() && unit; ++r) {
    unit = std::abs(out.features.data.row(r).cast<double>().norm() - 1.0) <= 1e-5;
  }
  out.features.normalized = unit;
  return out;
}

FeatureMatrix l2_normalize(const FeatureMatrix& m) {
  if (!m.data.allFinite()) throw Error("non-finite value");
  FeatureMatrix out = m;
  for (Index r = 0; r < out.data.rows(); ++r) {
    const double norm = out.data.row(r).cast<double>().norm();
    if (!(norm >= 1e-12)) throw Error("zero vector at row " + std::to_string(r));
    out.data.row(r) = (out.data.row(r).cast<double>() / norm).cast<float>();
  }
  out.normalized = true;
  return out;
}

SubsetMasks build_subset_masks(const DatasetView& view) {
  SubsetMasks masks;
  const std::size_t n = view.size();
  masks.all.assign(n, false);
  masks.old.assign(n, false);
  masks.novel.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (view.labeled[i]) continue;
    if (!view.labels[i]) throw Error("unlabeled row '" + view.ids[i] + "' has no ground truth");
    masks.all[i] = true;
    if (view.seen_classes.contains(*view.labels[i])) {
      masks.old[i] = true;
    } else {
      masks.novel[i] = true;
    }
  }
  return masks;
}

}  // namespace xcon
