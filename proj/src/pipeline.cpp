// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/pipeline.hpp"

#include "xcon/clustering.hpp"
#include "xcon/parallel.hpp"
#include "xcon/partition.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace xcon {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) throw Error("bad number for '" + key + "': " + text);
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) throw Error("bad integer for '" + key + "': " + text);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error("bad boolean for '" + key + "': " + text);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string RunConfig::echo() const {
  std::ostringstream text;
  auto kv = [&](const std::string& k, const std::string& v) { text << k << '=' << v << '\n'; };
  kv("features", features.string());
  if (meta) kv("meta", meta->string());
  kv("out", this->out.string());
  kv("dataset", dataset);
  kv("seed", std::to_string(seed));
  kv("threads", std::to_string(threads));
  kv("tau", format_double(train.tau));
  kv("lambda", format_double(train.lambda));
  kv("alpha", format_double(train.alpha));
  kv("k-partitions", std::to_string(train.K));
  kv("epochs", std::to_string(train.epochs));
  kv("base-lr", format_double(train.base_lr));
  kv("coarse-batch", std::to_string(train.coarse_batch));
  kv("fine-batch", std::to_string(train.fine_batch));
  kv("view-mode", to_string(train.view_mode));
  kv("momentum", format_double(train.momentum));
  kv("weight-decay", format_double(train.weight_decay));
  kv("jitter-sigma", format_double(train.jitter_sigma));
  kv("drop-prob", format_double(train.drop_prob));
  kv("hidden", std::to_string(train.hidden));
  kv("projection", std::to_string(train.projection));
  kv("fine-path", train.fine_path ? "true" : "false");
  if (num_classes) kv("num-classes", std::to_string(*num_classes));
  kv("estimate-k", estimate_k ? "true" : "false");
  if (k_min) kv("k-min", std::to_string(*k_min));
  if (k_max) kv("k-max", std::to_string(*k_max));
  kv("kmeans-max-iter", std::to_string(kmeans_max_iter));
  kv("kmeans-tol", format_double(kmeans_tol));
  kv("kmeans-n-init", std::to_string(kmeans_n_init));
  text << "# partition_seed=" << stage_seed(seed, Stage::kPartition) << '\n'
      << "# train_seed=" << stage_seed(seed, Stage::kTrain) << '\n'
      << "# assign_seed=" << stage_seed(seed, Stage::kAssign) << '\n'
      << "# estimate_seed=" << stage_seed(seed, Stage::kEstimate) << '\n';
  return text.str();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  static const std::unordered_map<std::string, std::function<void(RunConfig&, const std::string&)>> setters = {
      {"features", [](RunConfig& c, const std::string& v) { c.features = v; }},
      {"meta", [](RunConfig& c, const std::string& v) { c.meta = v; }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
      {"dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int("seed", v)); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.threads = static_cast<int>(parse_int("threads", v)); }},
      {"tau", [](RunConfig& c, const std::string& v) { c.train.tau = parse_double("tau", v); }},
      {"lambda", [](RunConfig& c, const std::string& v) { c.train.lambda = parse_double("lambda", v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.train.alpha = parse_double("alpha", v); }},
      {"k-partitions", [](RunConfig& c, const std::string& v) { c.train.K = parse_int("k-partitions", v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_int("epochs", v); }},
      {"base-lr", [](RunConfig& c, const std::string& v) { c.train.base_lr = parse_double("base-lr", v); }},
      {"coarse-batch", [](RunConfig& c, const std::string& v) { c.train.coarse_batch = parse_int("coarse-batch", v); }},
      {"fine-batch", [](RunConfig& c, const std::string& v) { c.train.fine_batch = parse_int("fine-batch", v); }},
      {"view-mode", [](RunConfig& c, const std::string& v) { c.train.view_mode = parse_view_mode(v); }},
      {"momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = parse_double("momentum", v); }},
      {"weight-decay", [](RunConfig& c, const std::string& v) { c.train.weight_decay = parse_double("weight-decay", v); }},
      {"jitter-sigma", [](RunConfig& c, const std::string& v) { c.train.jitter_sigma = parse_double("jitter-sigma", v); }},
      {"drop-prob", [](RunConfig& c, const std::string& v) { c.train.drop_prob = parse_double("drop-prob", v); }},
      {"hidden", [](RunConfig& c, const std::string& v) { c.train.hidden = parse_int("hidden", v); }},
      {"projection", [](RunConfig& c, const std::string& v) { c.train.projection = parse_int("projection", v); }},
      {"fine-path", [](RunConfig& c, const std::string& v) { c.train.fine_path = parse_bool("fine-path", v); }},
      {"num-classes", [](RunConfig& c, const std::string& v) { c.num_classes = parse_int("num-classes", v); }},
      {"estimate-k", [](RunConfig& c, const std::string& v) { c.estimate_k = parse_bool("estimate-k", v); }},
      {"k-min", [](RunConfig& c, const std::string& v) { c.k_min = parse_int("k-min", v); }},
      {"k-max", [](RunConfig& c, const std::string& v) { c.k_max = parse_int("k-max", v); }},
      {"kmeans-max-iter", [](RunConfig& c, const std::string& v) { c.kmeans_max_iter = parse_int("kmeans-max-iter", v); }},
      {"kmeans-tol", [](RunConfig& c, const std::string& v) { c.kmeans_tol = parse_double("kmeans-tol", v); }},
      {"kmeans-n-init", [](RunConfig& c, const std::string& v) { c.kmeans_n_init = parse_int("kmeans-n-init", v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error("unknown config key '" + key + "'");
  it->second(*this, value);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::uint64_t stage_seed(std::uint64_t root, Stage stage) {
  // splitmix64 finalizer
  std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(stage) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

FeatureMatrix prepare_features(const FeatureMatrix& m) { return m.normalized ? m : l2_normalize(m); }

void write_assignments(const std::filesystem::path& path, const DatasetView& view, const std::vector<int>& assignment) {
  if (assignment.size() != view.size()) throw Error("assignment/view row-count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < view.size(); ++i) out << view.ids[i] << '\t' << assignment[i] << '\n';
}

std::vector<int> read_assignments(const std::filesystem::path& path, const DatasetView& view) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < view.size(); ++i) row_of[view.ids[i]] = i;
  std::vector<int> out(view.size(), -1);
  std::vector<bool> filled(view.size(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("assignment line without tab");
    const auto it = row_of.find(line.substr(0, tab));
    if (it == row_of.end()) throw Error("assignment names unknown id '" + line.substr(0, tab) + "'");
    out[it->second] = static_cast<int>(parse_int("cluster", line.substr(tab + 1)));
    filled[it->second] = true;
  }
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!filled[i]) throw Error("assignment file misses id '" + view.ids[i] + "'");
  }
  return out;
}

MatrixD pca_2d(const MatrixF& x) {
  const MatrixD centred = x.cast<double>().rowwise() - x.cast<double>().colwise().mean();
  const MatrixD cov = centred.transpose() * centred / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  Eigen::SelfAdjointEigenSolver<MatrixD> solver(cov);
  const Index d = x.cols();
  const Index comps = std::min<Index>(2, d);
  MatrixD axes = MatrixD::Zero(d, 2);
  for (Index c = 0; c < comps; ++c) {
    Vec<double> axis = solver.eigenvectors().col(d - 1 - c);
    Index peak = 0;
    axis.cwiseAbs().maxCoeff(&peak);
    if (axis[peak] < 0) axis = -axis;
    axes.col(c) = axis;
  }
  return centred * axes;
}

void write_pca_csv(const std::filesystem::path& path, const DatasetView& view, const MatrixF& embeddings,
                   const std::vector<int>& assignment) {
  const MatrixD proj = pca_2d(embeddings);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "id,pc1,pc2,cluster,label\n" << std::setprecision(9);
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto r = static_cast<Index>(i);
    out << view.ids[i] << ',' << proj(r, 0) << ',' << proj(r, 1) << ',' << assignment[i] << ',';
    if (view.labels[i]) out << *view.labels[i];
    out << '\n';
  }
}

bool has_full_truth(const DatasetView& view) {
  for (const auto& l : view.labels) {
    if (!l) return false;
  }
  return true;
}

Index truth_class_count(const DatasetView& view) {
  if (!has_full_truth(view)) throw Error("class count unknown: ground truth missing; pass num-classes or estimate-k");
  return static_cast<Index>(view.known_classes().size());
}

namespace {

template <typename F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

KSearchOptions estimate_options(const RunConfig& config, const DatasetView& view) {
  KSearchOptions opt;
  opt.k_min = config.k_min.value_or(static_cast<Index>(view.seen_classes.size()));
  opt.k_max = config.k_max;
  opt.seed = stage_seed(config.seed, Stage::kEstimate);
  opt.n_init = config.kmeans_n_init;
  return opt;
}

PipelineResult run_pipeline(const RunConfig& config) {
  std::filesystem::create_directories(config.out);
  const auto error_path = config.out / "error.txt";
  std::filesystem::remove(error_path);
  try {
    set_num_threads(config.threads);
    write_text(config.out / "config.txt", config.echo());

    const LoadedFeatures loaded = stage("load", [&] { return load_features(config.features, config.meta); });
    const FeatureMatrix features = stage("normalize", [&] { return prepare_features(loaded.features); });
    const DatasetView& view = loaded.view;

    const PartitionResult partition = stage("partition", [&] {
      auto p = partition_dataset(features, config.train.K, stage_seed(config.seed, Stage::kPartition));
      write_partition(config.out / "partition.tsv", p, view);
      write_text(config.out / "partition_report.txt", format_partition_report(partition_report(p, view)));
      return p;
    });

    const TrainResult trained = stage("train", [&] {
      TrainConfig tc = config.train;
      tc.seed = stage_seed(config.seed, Stage::kTrain);
      auto r = train(features, view, partition, tc);
      write_checkpoint(config.out / "model.ckpt", r.model, config.echo());
      write_trace_csv(config.out / "trace.csv", r.trace);
      return r;
    });

    const MatrixF embeddings = stage("embed", [&] { return embed_features(trained.model, features.view(0)); });

    PipelineResult result;
    result.num_classes = stage("class-count", [&]() -> Index {
      if (config.estimate_k) {
        result.k_search = estimate_num_classes(embeddings, view, estimate_options(config, view));
        write_k_scores_csv(config.out / "k_scores.csv", *result.k_search);
        return result.k_search->k_hat;
      }
      return config.num_classes ? *config.num_classes : truth_class_count(view);
    });

    const ClusterModel clusters = stage("assign", [&] {
      KMeansOptions opt{stage_seed(config.seed, Stage::kAssign), config.kmeans_max_iter, config.kmeans_tol,
                        config.kmeans_n_init};
      auto model = semi_supervised_kmeans(embeddings, view, result.num_classes, opt);
      write_assignments(config.out / "assignments.tsv", view, model.assignment);
      write_pca_csv(config.out / "pca.csv", view, embeddings, model.assignment);
      return model;
    });
    result.assignment = clusters.assignment;

    if (has_full_truth(view)) {
      result.report = stage("eval", [&] {
        auto report = clustering_accuracy(clusters.assignment, view.truth_labels(), build_subset_masks(view));
        std::ostringstream text;
        text << "num_classes=" << result.num_classes << '\n' << format_report(report);
        write_text(config.out / "report.txt", text.str());
        write_text(config.out / "report.csv",
                   report_csv_header() + "\n" + report_csv_row(config.dataset, config.seed, report) + "\n");
        return report;
      });
    }
    return result;
  } catch (const std::exception& e) {
    write_text(error_path, std::string(e.what()) + "\n");
    throw;
  }
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "alpha") return SweepAxis::kAlpha;
  if (text == "lambda") return SweepAxis::kLambda;
  if (text == "K" || text == "k") return SweepAxis::kPartitions;
  throw Error("unknown sweep axis '" + text + "' (expected alpha, lambda or K)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kAlpha:
      return "alpha";
    case SweepAxis::kLambda:
      return "lambda";
    case SweepAxis::kPartitions:
      return "K";
  }
  return "?";
}

std::vector<SweepRow> run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds) {
  if (values.empty() || seeds.empty()) throw Error("sweep needs at least one value and one seed");
  std::vector<SweepRow> rows;
  for (double value : values) {
    SweepRow row;
    row.value = value;
    for (std::uint64_t seed : seeds) {
      RunConfig cell = base;
      cell.seed = seed;
      switch (axis) {
        case SweepAxis::kAlpha:
          cell.train.alpha = value;
          break;
        case SweepAxis::kLambda:
          cell.train.lambda = value;
          break;
        case SweepAxis::kPartitions:
          cell.train.K = static_cast<Index>(value);
          break;
      }
      cell.out = base.out / (to_string(axis) + "-" + format_double(value)) / ("seed-" + std::to_string(seed));
      try {
        const PipelineResult r = run_pipeline(cell);
        if (!r.report) throw Error("no ground truth to score");
        row.acc_all += r.report->acc_all;
        row.acc_old += r.report->acc_old;
        row.acc_new += r.report->acc_new;
        ++row.runs;
      } catch (const std::exception&) {
        ++row.failed;
      }
    }
    if (row.runs > 0) {
      row.acc_all /= static_cast<double>(row.runs);
      row.acc_old /= static_cast<double>(row.runs);
      row.acc_new /= static_cast<double>(row.runs);
    }
    rows.push_back(row);
  }

  std::filesystem::create_directories(base.out);
  std::ofstream out(base.out / "sweep.csv");
  out << to_string(axis) << ",runs,failed,acc_all,acc_old,acc_new\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << format_double(r.value) << ',' << r.runs << ',' << r.failed << ',';
    if (r.runs > 0) {
      out << r.acc_all << ',' << r.acc_old << ',' << r.acc_new << '\n';
    } else {
      out << "failed,failed,failed\n";
    }
  }
  return rows;
}

}  // namespace xcon
