// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#include "xcon/model.hpp"
#include "xcon/trainer.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace xcon;
using namespace xcon::testing;

namespace {

ViewPair<double> random_pair(std::mt19937_64& rng, Index b, Index d, std::vector<int> labels) {
  return {random_matrix(b, d, rng), random_matrix(b, d, rng), std::move(labels)};
}

StepBatch<double> random_step(std::mt19937_64& rng, Index d, Index experts) {
  StepBatch<double> s;
  s.coarse = random_pair(rng, 6, d, {0, 1, kNoLabel, 0, 1, kNoLabel});
  for (Index k = 0; k < experts; ++k) s.fine.push_back(random_pair(rng, 4, d, {0, kNoLabel, 0, kNoLabel}));
  return s;
}

// Central differences of total_loss against every parameter; returns the
// worst relative error.
double audit(TrainableModel<double>& model, const StepBatch<double>& step, const ObjectiveWeights& w) {
  auto grads = model.zeros_like();
  total_loss(model, step, w, grads);
  double worst = 0.0;
  auto f = [&] {
    auto scratch = model.zeros_like();
    return total_loss(model, step, w, scratch).total;
  };
  std::vector<MatrixD> analytic;
  grads.visit([&](const auto& g) { analytic.emplace_back(Eigen::Map<const Vec<double>>(g.data(), g.size())); });
  std::size_t t = 0;
  model.visit([&](auto& p) {
    Eigen::Map<Vec<double>> flat(p.data(), p.size());
    const MatrixD numeric = finite_difference(f, flat);
    worst = std::max(worst, max_relative_error(analytic[t++], numeric));
  });
  return worst;
}

}  // namespace

TEST_CASE("initial model: identity adapter and bounded heads") {
  std::mt19937_64 rng(1);
  const auto m = init_model<double>({5, 7, 3, 2}, rng);
  CHECK(m.adapter.weight.isIdentity());
  CHECK(m.adapter.bias.isZero());
  CHECK(m.experts() == 2);
  CHECK(m.heads[0].layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
  CHECK(m.heads[0].layers[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(7.0));
  CHECK_THROWS_AS(init_model<double>({0, 7, 3, 0}, rng), Error);
}

TEST_CASE("head output rows have unit norm") {
  std::mt19937_64 rng(2);
  const auto m = init_model<double>({4, 6, 3, 0}, rng);
  const auto f = forward_head(m, 0, random_matrix(5, 4, rng));
  CHECK((f.z.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_WITH_AS(forward_head(m, 0, random_matrix(5, 3, rng)), doctest::Contains("input dimension"), Error);
  CHECK_THROWS_AS(forward_head(m, 1, random_matrix(5, 4, rng)), Error);
}

TEST_CASE("head backward matches finite differences including the input") {
  std::mt19937_64 rng(3);
  auto m = init_model<double>({4, 6, 3, 0}, rng);
  m.adapter.weight += random_matrix(4, 4, rng, 0.2);
  MatrixD x = random_matrix(5, 4, rng);
  const MatrixD w = random_matrix(5, 3, rng);
  auto f = [&] { return forward_head(m, 0, x).z.cwiseProduct(w).sum(); };
  auto grads = m.zeros_like();
  const MatrixD dx = backward_head(m, forward_head(m, 0, x), w, grads);
  CHECK(max_relative_error(dx, finite_difference(f, x)) < 1e-4);
  CHECK(max_relative_error(grads.adapter.weight, finite_difference(f, m.adapter.weight)) < 1e-4);
  CHECK(max_relative_error(grads.heads[0].layers[1].weight, finite_difference(f, m.heads[0].layers[1].weight)) < 1e-4);
}

TEST_CASE("joint objective gradient audit") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const Index experts = 1 + static_cast<Index>(seed % 3);
    auto m = init_model<double>({4, 6, 3, experts}, rng);
    m.adapter.weight += random_matrix(4, 4, rng, 0.1);
    const auto step = random_step(rng, 4, experts);
    const ObjectiveWeights w{0.2 + 0.1 * static_cast<double>(seed), 0.35, 0.1 * static_cast<double>(seed + 1), true};
    CAPTURE(seed);
    CHECK(audit(m, step, w) < 1e-4);
  }
}

TEST_CASE("alpha zero leaves expert heads without gradient") {
  std::mt19937_64 rng(4);
  const auto m = init_model<double>({4, 6, 3, 2}, rng);
  const auto step = random_step(rng, 4, 2);
  auto grads = m.zeros_like();
  const auto v = total_loss(m, step, {0.1, 0.35, 0.0, true}, grads);
  CHECK(v.total == v.coarse);
  CHECK(grads.heads[1].layers[0].weight.isZero());
  CHECK(grads.heads[2].layers[2].bias.isZero());

  auto coarse_only = m.zeros_like();
  total_loss(m, step, {0.1, 0.35, 0.0, false}, coarse_only);
  CHECK(coarse_only.adapter.weight == grads.adapter.weight);
}

TEST_CASE("adapter gradient is the sum of both paths") {
  std::mt19937_64 rng(5);
  const auto m = init_model<double>({4, 6, 3, 2}, rng);
  const auto step = random_step(rng, 4, 2);
  const ObjectiveWeights w{0.3, 0.35, 0.5, true};
  auto all = m.zeros_like();
  total_loss(m, step, w, all);
  auto coarse = m.zeros_like();
  coarse_objective(m, step.coarse, w, coarse);
  auto fine = m.zeros_like();
  fine_objective(m, step.fine, w, fine, 0.5);
  CHECK((all.adapter.weight - coarse.adapter.weight - fine.adapter.weight).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(coarse.heads[1].layers[0].weight.isZero());
  CHECK(fine.heads[0].layers[0].weight.isZero());
}

TEST_CASE("float and double forward agree") {
  std::mt19937_64 rng(6);
  const auto m = init_model<double>({8, 16, 4, 0}, rng);
  const MatrixD x = random_matrix(3, 8, rng);
  const MatrixD zd = forward_head(m, 0, x).z;
  const MatrixF zf = forward_head(m.cast<float>(), 0, MatrixF(x.cast<float>())).z;
  CHECK((zf.cast<double>() - zd).cwiseAbs().maxCoeff() < 1e-5);
}
