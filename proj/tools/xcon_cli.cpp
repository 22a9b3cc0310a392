// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line runner: gen-synth, partition, train, assign, eval,
// estimate-k, run, sweep.

#include "xcon/clustering.hpp"
#include "xcon/estimation.hpp"
#include "xcon/evaluation.hpp"
#include "xcon/parallel.hpp"
#include "xcon/partition.hpp"
#include "xcon/pipeline.hpp"
#include "xcon/synthetic.hpp"
#include "xcon/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace xcon;

// Flags that map 1:1 onto RunConfig keys.
const std::vector<std::string> kGlobalKeys = {"features", "meta", "out", "seed", "threads", "dataset"};
const std::vector<std::string> kTrainKeys = {"tau",          "lambda",       "alpha",    "k-partitions", "epochs",
                                             "base-lr",      "coarse-batch", "fine-batch", "view-mode",  "momentum",
                                             "weight-decay", "jitter-sigma", "drop-prob", "hidden",      "projection",
                                             "fine-path"};
const std::vector<std::string> kAssignKeys = {"num-classes", "estimate-k", "k-min", "k-max", "kmeans-max-iter",
                                              "kmeans-tol",  "kmeans-n-init"};

struct Flags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App& app, const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
      if (key == "estimate-k") {
        options[key] = app.add_flag_callback("--estimate-k", [this] { values["estimate-k"] = "true"; },
                                             "Estimate the class count instead of using ground truth");
      } else {
        options[key] = app.add_option("--" + key, values[key]);
      }
    }
  }

  void apply(RunConfig& config) const {
    for (const auto& [key, option] : options) {
      if (option->count() > 0) config.set(key, values.at(key));
    }
  }
};

// --config is read before the other flags so that flags override it.
RunConfig initial_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return RunConfig::load(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return RunConfig::load(arg.substr(9));
  }
  return {};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::filesystem::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw Error("--out is required");
  std::filesystem::create_directories(c.out);
  return c.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xcon: generalized category discovery on precomputed embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file; flags override it");

  RunConfig config;
  try {
    config = initial_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  std::map<std::string, Flags> flags;
  auto sub = [&](const std::string& name, const std::string& help, std::vector<std::vector<std::string>> groups) {
    CLI::App* s = app.add_subcommand(name, help);
    for (const auto& g : groups) flags[name].add(*s, g);
    return s;
  };

  // gen-synth
  GeneratorSpec gen;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic feature/metadata/factors set");
  gen_cmd->add_option("--out", gen_out, "Output prefix")->required();
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--backgrounds", gen.n_backgrounds);
  gen_cmd->add_option("--fine-classes", gen.n_fine_classes);
  gen_cmd->add_option("--samples-per-class", gen.samples_per_class);
  gen_cmd->add_option("--dim", gen.d);
  gen_cmd->add_option("--background-scale", gen.background_scale);
  gen_cmd->add_option("--class-scale", gen.class_scale);
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma);
  gen_cmd->add_option("--class-rank", gen.class_rank);
  gen_cmd->add_option("--views", gen.views);
  gen_cmd->add_option("--view-sigma", gen.view_sigma);
  gen_cmd->add_option("--seen-fraction", gen.seen_fraction);
  gen_cmd->add_option("--labeled-fraction", gen.labeled_fraction);

  CLI::App* part_cmd = sub("partition", "Split the dataset into K expert sub-datasets", {kGlobalKeys, {"k-partitions"}});

  std::string partition_file;
  CLI::App* train_cmd = sub("train", "Train adapter and projection heads", {kGlobalKeys, kTrainKeys});
  train_cmd->add_option("--partition", partition_file, "Reuse a partition file instead of recomputing it");

  std::string checkpoint_file;
  CLI::App* assign_cmd = sub("assign", "Semi-supervised k-means in the trained adapter space", {kGlobalKeys, kAssignKeys});
  assign_cmd->add_option("--checkpoint", checkpoint_file, "Model checkpoint (omit to cluster raw features)");

  std::string assignments_file;
  CLI::App* eval_cmd = sub("eval", "Hungarian-matched accuracy on All/Old/New", {kGlobalKeys});
  eval_cmd->add_option("--assignments", assignments_file, "id<TAB>cluster file")->required();

  CLI::App* estimate_cmd = sub("estimate-k", "Estimate the number of classes", {kGlobalKeys, {"k-min", "k-max", "kmeans-n-init"}});
  estimate_cmd->add_option("--checkpoint", checkpoint_file, "Estimate in the trained adapter space");

  CLI::App* run_cmd = sub("run", "Full pipeline", {kGlobalKeys, kTrainKeys, kAssignKeys});

  std::string axis_text;
  std::string values_text;
  std::string seeds_text = "0";
  CLI::App* sweep_cmd = sub("sweep", "Ablation sweep over alpha, lambda or K", {kGlobalKeys, kTrainKeys, kAssignKeys});
  sweep_cmd->add_option("--axis", axis_text, "alpha | lambda | K")->required();
  sweep_cmd->add_option("--values", values_text, "Comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "Comma-separated root seeds");

  CLI11_PARSE(app, argc, argv);

  std::filesystem::path error_dir;
  try {
    for (auto& [name, f] : flags) {
      if (app.got_subcommand(name)) f.apply(config);
    }
    set_num_threads(config.threads);
    if (!config.out.empty() && !gen_cmd->parsed() && !run_cmd->parsed() && !sweep_cmd->parsed()) {
      error_dir = require_out(config);
      std::filesystem::remove(error_dir / "error.txt");
    }

    if (gen_cmd->parsed()) {
      const SyntheticData data = generate(gen);
      write_synthetic(gen_out, data);
      std::cout << "wrote " << gen_out << ".bin/.meta/.factors: n=" << data.features.rows()
                << " d=" << data.features.dim() << " views=" << data.features.views
                << " classes=" << gen.class_count() << " seen=" << data.view.seen_classes.size() << '\n';
      return 0;
    }

    if (run_cmd->parsed()) {
      require_out(config);
      const PipelineResult r = run_pipeline(config);
      std::cout << "num_classes=" << r.num_classes << '\n';
      if (r.report) std::cout << format_report(*r.report);
      return 0;
    }

    if (sweep_cmd->parsed()) {
      require_out(config);
      std::vector<double> values;
      for (const auto& v : split_list(values_text)) values.push_back(std::stod(v));
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(seeds_text)) seeds.push_back(std::stoull(s));
      const SweepAxis axis = parse_sweep_axis(axis_text);
      const auto rows = run_sweep(config, axis, values, seeds);
      std::ifstream csv(config.out / "sweep.csv");
      std::cout << csv.rdbuf();
      for (const auto& r : rows) {
        if (r.failed) return 2;
      }
      return 0;
    }

    if (config.features.empty()) throw Error("--features is required");
    const LoadedFeatures loaded = load_features(config.features, config.meta);
    const FeatureMatrix features = prepare_features(loaded.features);
    const DatasetView& view = loaded.view;

    if (part_cmd->parsed()) {
      const auto out = require_out(config);
      const PartitionResult p =
          partition_dataset(features, config.train.K, stage_seed(config.seed, Stage::kPartition));
      write_partition(out / "partition.tsv", p, view);
      const std::string report = format_partition_report(partition_report(p, view));
      write_text(out / "partition_report.txt", report);
      std::cout << report;
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto out = require_out(config);
      write_text(out / "config.txt", config.echo());
      const PartitionResult p = partition_file.empty()
                                    ? partition_dataset(features, config.train.K,
                                                        stage_seed(config.seed, Stage::kPartition))
                                    : read_partition(partition_file, view);
      if (partition_file.empty()) write_partition(out / "partition.tsv", p, view);
      TrainConfig tc = config.train;
      tc.K = p.K;
      tc.seed = stage_seed(config.seed, Stage::kTrain);
      const TrainResult r = train(features, view, p, tc);
      write_checkpoint(out / "model.ckpt", r.model, config.echo());
      write_trace_csv(out / "trace.csv", r.trace);
      std::cout << "steps=" << r.trace.size() << " first_loss=" << r.trace.front().total
                << " last_loss=" << r.trace.back().total << '\n';
      return 0;
    }

    const MatrixF space = checkpoint_file.empty()
                              ? features.view(0)
                              : embed_features(read_checkpoint(checkpoint_file).model, features.view(0));

    if (estimate_cmd->parsed()) {
      const KSearchResult r = estimate_num_classes(space, view, estimate_options(config, view));
      if (!config.out.empty()) write_k_scores_csv(require_out(config) / "k_scores.csv", r);
      std::cout << "k,probe_acc\n";
      for (const auto& s : r.scores) std::cout << s.k << ',' << s.probe_acc << '\n';
      std::cout << "k_hat=" << r.k_hat << '\n';
      return 0;
    }

    if (assign_cmd->parsed()) {
      const auto out = require_out(config);
      Index k = 0;
      if (config.estimate_k) {
        const KSearchResult r = estimate_num_classes(space, view, estimate_options(config, view));
        write_k_scores_csv(out / "k_scores.csv", r);
        k = r.k_hat;
      } else {
        k = config.num_classes ? *config.num_classes : truth_class_count(view);
      }
      const ClusterModel model = semi_supervised_kmeans(
          space, view, k,
          KMeansOptions{stage_seed(config.seed, Stage::kAssign), config.kmeans_max_iter, config.kmeans_tol,
                        config.kmeans_n_init});
      write_assignments(out / "assignments.tsv", view, model.assignment);
      write_pca_csv(out / "pca.csv", view, space, model.assignment);
      std::cout << "k=" << k << " iterations=" << model.iterations << " inertia=" << model.inertia << '\n';
      return 0;
    }

    if (eval_cmd->parsed()) {
      const std::vector<int> pred = read_assignments(assignments_file, view);
      const EvalReport report = clustering_accuracy(pred, view.truth_labels(), build_subset_masks(view));
      std::cout << format_report(report);
      if (!config.out.empty()) {
        const auto out = require_out(config);
        write_text(out / "report.txt", format_report(report));
        write_text(out / "report.csv", report_csv_header() + "\n" + report_csv_row(config.dataset, config.seed, report) + "\n");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!error_dir.empty()) write_text(error_dir / "error.txt", std::string(e.what()) + "\n");
    return 1;
  }
  return 0;
}
