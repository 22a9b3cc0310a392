// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include "xcon/clustering.hpp"
#include "xcon/contrastive.hpp"
#include "xcon/estimation.hpp"
#include "xcon/evaluation.hpp"
#include "xcon/model.hpp"
#include "xcon/pipeline.hpp"
#include "xcon/synthetic.hpp"
#include "xcon/trainer.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <string>

using namespace xcon;
using namespace xcon::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

template <typename F>
void criterion(const std::string& name, double time_limit_s, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit_s > 0 && seconds > time_limit_s) {
    o.pass = false;
    o.detail += " (over time limit)";
  }
  if (!o.pass) ++g_failures;
  std::printf("%s %-24s %s [%.1fs", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds);
  if (time_limit_s > 0) std::printf(" / limit %.0fs", time_limit_s);
  std::printf("]\n");
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome hungarian_oracle() {
  int mismatches = 0;
  int total = 0;
  for (Index size = 2; size <= 6; ++size) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(1000 * static_cast<std::uint64_t>(size) + seed);
      MatrixD cost(size, size);
      for (Index i = 0; i < cost.size(); ++i) cost.data()[i] = static_cast<double>(rng() % 1000);
      ++total;
      if (hungarian(cost).cost != brute_force_assignment(cost)) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%d/%d matrices equal brute force exactly", total - mismatches, total)};
}

SubsetMasks all_unlabeled(const std::vector<int>& truth, const std::set<int>& seen) {
  SubsetMasks m;
  for (int t : truth) {
    m.all.push_back(true);
    m.old.push_back(seen.contains(t));
    m.novel.push_back(!seen.contains(t));
  }
  return m;
}

Outcome accuracy_checks() {
  std::vector<std::string> failures;
  std::mt19937_64 rng(7);

  const std::vector<int> truth{0, 1, 2, 2, 1, 0, 3};
  if (clustering_accuracy(truth, truth, all_unlabeled(truth, {})).acc_all != 1.0) failures.push_back("perfect");

  std::vector<int> t(80);
  std::vector<int> p(80);
  for (auto& v : t) v = static_cast<int>(rng() % 6);
  for (auto& v : p) v = static_cast<int>(rng() % 7);
  const auto masks = all_unlabeled(t, {0, 1, 2});
  const auto base = clustering_accuracy(p, t, masks);
  int relabel_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> q;
    for (int v : p) q.push_back(perm[v]);
    const auto r = clustering_accuracy(q, t, masks);
    if (r.acc_all != base.acc_all || r.acc_old != base.acc_old || r.acc_new != base.acc_new) ++relabel_bad;
  }
  if (relabel_bad) failures.push_back(fmt("%d relabelings changed acc", relabel_bad));

  const std::vector<int> wt{0, 1, 1, 2};
  if (clustering_accuracy({0, 0, 1, 2}, wt, all_unlabeled(wt, {})).acc_all != 0.75) failures.push_back("worked example");

  int decomposition_bad = 0;
  for (int c = 0; c < 20; ++c) {
    std::vector<int> tt(30 + static_cast<std::size_t>(rng() % 50));
    std::vector<int> pp(tt.size());
    for (auto& v : tt) v = static_cast<int>(rng() % 8);
    for (auto& v : pp) v = static_cast<int>(rng() % 9);
    const auto r = clustering_accuracy(pp, tt, all_unlabeled(tt, {0, 1, 2, 3}));
    const bool counts = r.n_all == r.n_old + r.n_new && r.matched_all == r.matched_old + r.matched_new;
    const double lhs = static_cast<double>(r.n_all) * r.acc_all;
    const double rhs = static_cast<double>(r.n_old) * r.acc_old + static_cast<double>(r.n_new) * r.acc_new;
    if (!counts || std::abs(lhs - rhs) > 1e-12) ++decomposition_bad;
  }
  if (decomposition_bad) failures.push_back(fmt("%d decomposition cases off", decomposition_bad));

  std::string detail = "perfect=1, 50 relabelings exact, example=0.75, 20 decompositions exact on matched counts";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " " + f + ";";
  }
  return {failures.empty(), detail};
}

Outcome kmeans_properties() {
  int increases = 0;
  int unpinned = 0;
  int degenerate_bad = 0;
  for (std::uint64_t run = 0; run < 50; ++run) {
    std::mt19937_64 rng(run);
    const MatrixF x = random_matrix(200, 5, rng).cast<float>();
    auto monotone = [&](const ClusterModel& m) {
      for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
        if (m.inertia_trace[i] > m.inertia_trace[i - 1]) ++increases;
      }
    };
    monotone(kmeans(x, 5, {.seed = run}));

    std::vector<std::string> ids;
    std::vector<std::optional<int>> labels;
    std::vector<bool> labeled;
    for (int i = 0; i < 200; ++i) {
      ids.push_back(std::to_string(i));
      labels.emplace_back(i % 6);
      labeled.push_back(i % 6 < 3 && rng() % 3 == 0);
    }
    const auto view = DatasetView::make(ids, labels, labeled);
    const auto ss = semi_supervised_kmeans(x, view, 6, {.seed = run});
    monotone(ss);
    const auto bound = ss.bound_classes;
    for (int i = 0; i < 200; ++i) {
      if (!labeled[i]) continue;
      const auto c = static_cast<std::size_t>(ss.assignment[i]);
      if (c >= bound.size() || bound[c] != *labels[i]) ++unpinned;
    }

    const auto full = DatasetView::make(ids, labels, std::vector<bool>(200, true));
    const auto fm = semi_supervised_kmeans(x, full, 6, {.seed = run});
    for (int i = 0; i < 200; ++i) {
      if (fm.bound_classes[static_cast<std::size_t>(fm.assignment[i])] != *labels[i]) {
        ++degenerate_bad;
        break;
      }
    }
  }
  const bool pass = increases == 0 && unpinned == 0 && degenerate_bad == 0;
  return {pass, fmt("50 runs: inertia increases=%d, unpinned labeled rows=%d, fully-labeled mismatches=%d", increases,
                    unpinned, degenerate_bad)};
}

// Worst relative error of analytic gradients against central differences
// (eps = 1e-4, double precision) over one random configuration.
double audit_configuration(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](Index lo, Index hi) { return lo + static_cast<Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  const Index b = pick(2, 6);
  const Index d = pick(3, 6);
  const Index hidden = pick(4, 8);
  const Index p = pick(2, 5);
  const Index experts = pick(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double tau = 0.1 + 0.9 * unit(rng);
  const double lambda = unit(rng);
  const double alpha = unit(rng);
  double worst = 0.0;

  // unsupervised term
  MatrixD z = random_unit_rows(b, p, rng);
  MatrixD z_hat = random_unit_rows(b, p, rng);
  const auto u = unsup_contrastive_loss<double>(z, z_hat, tau);
  auto fu = [&] { return unsup_contrastive_loss<double>(z, z_hat, tau).loss; };
  worst = std::max(worst, max_relative_error(u.grad.z, finite_difference(fu, z)));
  worst = std::max(worst, max_relative_error(u.grad.z_hat, finite_difference(fu, z_hat)));

  // supervised term
  MatrixD e = random_unit_rows(2 * b, p, rng);
  std::vector<int> labels(static_cast<std::size_t>(2 * b));
  for (auto& l : labels) l = static_cast<int>(rng() % 3);
  labels[1] = labels[0];
  const auto s = sup_contrastive_loss<double>(e, labels, tau);
  auto fs = [&] { return sup_contrastive_loss<double>(e, labels, tau).loss; };
  worst = std::max(worst, max_relative_error(s.grad, finite_difference(fs, e)));

  // head forward / backward
  auto model = init_model<double>({d, hidden, p, experts}, rng);
  model.adapter.weight += random_matrix(d, d, rng, 0.1);
  MatrixD x = random_matrix(b, d, rng);
  const MatrixD w = random_matrix(b, p, rng);
  auto fh = [&] { return forward_head(model, 0, x).z.cwiseProduct(w).sum(); };
  auto hg = model.zeros_like();
  const MatrixD dx = backward_head(model, forward_head(model, 0, x), w, hg);
  worst = std::max(worst, max_relative_error(dx, finite_difference(fh, x)));

  // joint objective over every parameter
  StepBatch<double> step;
  auto pair = [&](Index rows) {
    ViewPair<double> vp{random_matrix(rows, d, rng), random_matrix(rows, d, rng), {}};
    for (Index i = 0; i < rows; ++i) vp.labels.push_back(i % 3 == 2 ? kNoLabel : static_cast<int>(i % 2));
    return vp;
  };
  step.coarse = pair(b + 2);
  for (Index k = 0; k < experts; ++k) step.fine.push_back(pair(b));
  const ObjectiveWeights weights{tau, lambda, alpha, true};
  auto grads = model.zeros_like();
  total_loss(model, step, weights, grads);
  std::vector<MatrixD> analytic;
  grads.visit([&](const auto& g) { analytic.emplace_back(Eigen::Map<const Vec<double>>(g.data(), g.size())); });
  auto ft = [&] {
    auto scratch = model.zeros_like();
    return total_loss(model, step, weights, scratch).total;
  };
  std::size_t t = 0;
  model.visit([&](auto& param) {
    Eigen::Map<Vec<double>> flat(param.data(), param.size());
    worst = std::max(worst, max_relative_error(analytic[t++], finite_difference(ft, flat)));
  });
  return worst;
}

Outcome gradient_audit() {
  double worst = 0.0;
  for (std::uint64_t c = 0; c < 20; ++c) worst = std::max(worst, audit_configuration(500 + c));
  return {worst < 1e-4, fmt("max relative error %.2e over 20 configurations (limit 1e-4)", worst)};
}

Outcome loss_unit_values() {
  MatrixD same(2, 2);
  same << 1, 0, 1, 0;
  const double l3 = unsup_contrastive_loss<double>(same, same, 1.0).loss;
  MatrixD orth(2, 2);
  orth << 1, 0, 0, 1;
  const double lo = unsup_contrastive_loss<double>(orth, orth, 1.0).loss;
  const double oracle = std::log((std::exp(1.0) + 2.0) / std::exp(1.0));
  MatrixD pair(2, 3);
  pair << 0, 0, 1, 0, 0, 1;
  const double lp = sup_contrastive_loss<double>(pair, std::vector<int>{2, 2}, 1.0).loss;
  const bool pass = std::abs(l3 - std::log(3.0)) < 1e-6 && std::abs(lo - oracle) < 1e-4 && std::abs(lo - 0.5514) < 1e-4 &&
                    std::abs(lp) < 1e-9;
  return {pass, fmt("identical=%.7f (ln3 %.7f), orthogonal=%.6f (oracle %.6f), lone positive=%.1e", l3, std::log(3.0),
                    lo, oracle, lp)};
}

// ---------------------------------------------------------------------------
// Synthetic ablation benchmark

RunConfig benchmark_config(const std::filesystem::path& features, const std::filesystem::path& out,
                           std::uint64_t seed) {
  RunConfig c;
  c.features = features;
  c.out = out;
  c.seed = seed;
  c.train.K = 2;
  c.train.alpha = 0.1;
  c.train.lambda = 0.35;
  c.train.epochs = 300;
  c.train.hidden = 128;
  c.train.projection = 32;
  c.kmeans_n_init = 10;
  return c;
}

struct BenchmarkResults {
  std::vector<double> full;
  std::vector<double> coarse_only;
  std::vector<double> no_supervised;
  double seconds_full = 0.0;
  double seconds_coarse = 0.0;
};

BenchmarkResults run_benchmark(const std::filesystem::path& root) {
  BenchmarkResults r;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data_prefix = root / ("data-" + std::to_string(seed));
    write_synthetic(data_prefix, generate(GeneratorSpec{.seed = seed}));
    auto timed = [&](RunConfig c, double& clock) {
      const auto start = std::chrono::steady_clock::now();
      const double acc = run_pipeline(c).report.value().acc_all;
      clock += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return acc;
    };
    RunConfig full = benchmark_config(data_prefix, root / ("full-" + std::to_string(seed)), seed);
    RunConfig coarse = full;
    coarse.train.alpha = 0.0;
    coarse.out = root / ("coarse-" + std::to_string(seed));
    RunConfig unsup = full;
    unsup.train.lambda = 0.0;
    unsup.out = root / ("lambda0-" + std::to_string(seed));
    double ignored = 0.0;
    r.full.push_back(timed(full, r.seconds_full));
    r.coarse_only.push_back(timed(coarse, r.seconds_coarse));
    r.no_supervised.push_back(timed(unsup, ignored));
    std::printf("     benchmark seed %llu: full=%.4f alpha0=%.4f lambda0=%.4f\n", static_cast<unsigned long long>(seed),
                r.full.back(), r.coarse_only.back(), r.no_supervised.back());
    std::fflush(stdout);
  }
  return r;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// ---------------------------------------------------------------------------

Outcome class_count_estimation() {
  int hits = 0;
  std::string ks;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Index d = 8;
    const Index per_class = 40;
    MatrixD centres = random_matrix(5, d, rng);
    MatrixF x(5 * per_class, d);
    std::vector<std::string> ids;
    std::vector<std::optional<int>> labels;
    std::vector<bool> labeled;
    for (Index i = 0; i < x.rows(); ++i) {
      const auto cls = static_cast<int>(i / per_class);
      x.row(i) = (centres.row(cls) + random_matrix(1, d, rng, 0.1)).cast<float>();
      ids.push_back(std::to_string(i));
      labels.emplace_back(cls);
      labeled.push_back(cls < 3 && i % 2 == 0);
    }
    const auto view = DatasetView::make(ids, labels, labeled);
    const auto r = estimate_num_classes(x, view, {.k_min = 3, .k_max = 10, .seed = seed});
    hits += std::abs(r.k_hat - 5) <= 1;
    ks += (ks.empty() ? "" : ",") + std::to_string(r.k_hat);
  }
  return {hits >= 4, fmt("k_hat=[%s], %d/5 within 5+-1 (need 4)", ks.c_str(), hits)};
}

Outcome end_to_end_determinism(const std::filesystem::path& root) {
  write_synthetic(root / "det-data", generate(GeneratorSpec{.samples_per_class = 25, .seed = 11}));
  RunConfig first = benchmark_config(root / "det-data", root / "det-a", 11);
  first.train.epochs = 20;
  first.threads = 2;
  const auto a = run_pipeline(first);
  RunConfig replay = RunConfig::load(first.out / "config.txt");
  replay.out = root / "det-b";
  const auto b = run_pipeline(replay);
  const auto& ra = a.report.value();
  const auto& rb = b.report.value();
  const bool same = ra.acc_all == rb.acc_all && ra.acc_old == rb.acc_old && ra.acc_new == rb.acc_new &&
                    ra.matched_all == rb.matched_all && ra.permutation == rb.permutation &&
                    ra.contingency == rb.contingency && a.assignment == b.assignment &&
                    format_report(ra) == format_report(rb);
  return {same, fmt("replayed report %s (acc_all=%.17g)", same ? "bitwise identical" : "differs", ra.acc_all)};
}

}  // namespace

int main() {
  const auto root = std::filesystem::temp_directory_path() / "xcon_acceptance";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);

  criterion("hungarian-brute-force", 10, hungarian_oracle);
  criterion("acc-correctness", 0, accuracy_checks);
  criterion("kmeans-properties", 0, kmeans_properties);
  criterion("gradient-audit", 60, gradient_audit);
  criterion("loss-unit-values", 0, loss_unit_values);

  BenchmarkResults bench;
  bool bench_ok = true;
  std::string bench_error;
  try {
    bench = run_benchmark(root);
  } catch (const std::exception& e) {
    bench_ok = false;
    bench_error = e.what();
  }
  criterion("fine-objective-gain", 300, [&]() -> Outcome {
    if (!bench_ok) return {false, "benchmark failed: " + bench_error};
    const double gain = mean(bench.full) - mean(bench.coarse_only);
    const bool in_time = bench.seconds_full + bench.seconds_coarse <= 300.0;
    return {gain >= 0.03 && in_time, fmt("mean acc_all full=%.4f alpha0=%.4f gain=%+.4f (need >= +0.03; %.0fs of runs)",
                              mean(bench.full), mean(bench.coarse_only), gain, bench.seconds_full + bench.seconds_coarse)};
  });
  criterion("supervised-term-gain", 0, [&]() -> Outcome {
    if (!bench_ok) return {false, "benchmark failed: " + bench_error};
    const double gain = mean(bench.full) - mean(bench.no_supervised);
    return {gain >= 0.05, fmt("mean acc_all lambda0.35=%.4f lambda0=%.4f gain=%+.4f (need >= +0.05)", mean(bench.full),
                              mean(bench.no_supervised), gain)};
  });
  criterion("k-estimation", 120, class_count_estimation);
  criterion("determinism", 0, [&] { return end_to_end_determinism(root); });

  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
