// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xcon/core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <tuple>
#include <vector>

namespace xcon {

/// y = x * weight^T + bias, applied row-wise. `weight` is out x in.
template <typename Scalar>
struct Affine {
  Mat<Scalar> weight;
  Vec<Scalar> bias;

  Mat<Scalar> apply(const Mat<Scalar>& x) const {
    Mat<Scalar> y = x * weight.transpose();
    y.rowwise() += bias.transpose();
    return y;
  }

  template <typename T>
  Affine<T> cast() const {
    return {weight.template cast<T>(), bias.template cast<T>()};
  }
};

/// Three affine layers with GELU after the first two; output is L2-normalized.
template <typename Scalar>
struct ProjectionHead {
  std::array<Affine<Scalar>, 3> layers;

  template <typename T>
  ProjectionHead<T> cast() const {
    return {{layers[0].template cast<T>(), layers[1].template cast<T>(), layers[2].template cast<T>()}};
  }
};

/// Shared linear adapter followed by K+1 heads. Head 0 is the coarse head,
/// heads 1..K are the expert heads.
template <typename Scalar>
struct TrainableModel {
  Affine<Scalar> adapter;
  std::vector<ProjectionHead<Scalar>> heads;

  Index input_dim() const { return adapter.weight.cols(); }
  Index experts() const { return static_cast<Index>(heads.size()) - 1; }

  template <typename T>
  TrainableModel<T> cast() const {
    TrainableModel<T> out{adapter.template cast<T>(), {}};
    for (const auto& h : heads) out.heads.push_back(h.template cast<T>());
    return out;
  }

  /// Same shapes, all parameters zero (gradient / momentum buffers).
  TrainableModel zeros_like() const {
    TrainableModel out = *this;
    out.visit([](auto& p) { p.setZero(); });
    return out;
  }

  /// Calls f on every parameter tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f(adapter.weight);
    f(adapter.bias);
    for (auto& h : heads) {
      for (auto& l : h.layers) {
        f(l.weight);
        f(l.bias);
      }
    }
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<TrainableModel*>(this)->visit([&](const auto& p) { f(p); });
  }
};

/// Visits matching tensors of several same-shaped models in lockstep, as
/// flat vectors.
template <typename F, typename Scalar, typename... Rest>
void zip_parameters(F&& f, TrainableModel<Scalar>& first, Rest&... rest) {
  auto flatten = [](auto& model) {
    std::vector<Eigen::Map<Vec<Scalar>>> out;
    model.visit([&](auto& p) { out.emplace_back(p.data(), p.size()); });
    return out;
  };
  auto lead = flatten(first);
  auto others = std::make_tuple(flatten(rest)...);
  std::apply([&](const auto&... o) {
    if (((o.size() != lead.size()) || ...)) throw Error("model structures differ");
  }, others);
  for (std::size_t t = 0; t < lead.size(); ++t) {
    std::apply([&](auto&... o) { f(lead[t], o[t]...); }, others);
  }
}

struct ModelShape {
  Index input_dim = 0;
  Index hidden = 2048;
  Index projection = 128;
  Index experts = 0;
};

namespace detail {

template <typename Scalar>
Affine<Scalar> uniform_affine(Index out, Index in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  auto draw = [&] { return static_cast<Scalar>((static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * bound); };
  Affine<Scalar> a{Mat<Scalar>(out, in), Vec<Scalar>(out)};
  for (Index i = 0; i < a.weight.size(); ++i) a.weight.data()[i] = draw();
  for (Index i = 0; i < a.bias.size(); ++i) a.bias[i] = draw();
  return a;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  return cdf + x * pdf;
}

}  // namespace detail

/// Adapter starts at identity with zero bias; head parameters are drawn
/// uniformly in +-1/sqrt(fan_in).
template <typename Scalar>
TrainableModel<Scalar> init_model(const ModelShape& shape, std::mt19937_64& rng) {
  if (shape.input_dim < 1 || shape.hidden < 1 || shape.projection < 1 || shape.experts < 0) {
    throw Error("invalid model shape");
  }
  TrainableModel<Scalar> m;
  m.adapter.weight = Mat<Scalar>::Identity(shape.input_dim, shape.input_dim);
  m.adapter.bias = Vec<Scalar>::Zero(shape.input_dim);
  for (Index h = 0; h <= shape.experts; ++h) {
    ProjectionHead<Scalar> head;
    head.layers[0] = detail::uniform_affine<Scalar>(shape.hidden, shape.input_dim, rng);
    head.layers[1] = detail::uniform_affine<Scalar>(shape.hidden, shape.hidden, rng);
    head.layers[2] = detail::uniform_affine<Scalar>(shape.projection, shape.hidden, rng);
    m.heads.push_back(std::move(head));
  }
  return m;
}

/// Intermediates kept by forward_head for the backward pass.
template <typename Scalar>
struct HeadForward {
  Index head = 0;
  Mat<Scalar> input;
  Mat<Scalar> adapted;
  Mat<Scalar> pre1, act1, pre2, act2;
  Vec<Scalar> norms;
  /// Unit-norm embeddings.
  Mat<Scalar> z;
};

template <typename Scalar>
Mat<Scalar> adapt(const TrainableModel<Scalar>& model, const Mat<Scalar>& v) {
  if (v.cols() != model.input_dim()) throw Error("input dimension does not match adapter");
  return model.adapter.apply(v);
}

template <typename Scalar>
HeadForward<Scalar> forward_head(const TrainableModel<Scalar>& model, Index head, const Mat<Scalar>& v) {
  if (head < 0 || head >= static_cast<Index>(model.heads.size())) throw Error("head index out of range");
  if (!v.allFinite()) throw Error("non-finite input");
  const auto& layers = model.heads[head].layers;
  HeadForward<Scalar> f;
  f.head = head;
  f.input = v;
  f.adapted = adapt(model, v);
  f.pre1 = layers[0].apply(f.adapted);
  f.act1 = f.pre1.unaryExpr([](Scalar x) { return detail::gelu(x); });
  f.pre2 = layers[1].apply(f.act1);
  f.act2 = f.pre2.unaryExpr([](Scalar x) { return detail::gelu(x); });
  const Mat<Scalar> out = layers[2].apply(f.act2);
  f.norms = out.rowwise().norm();
  for (Index i = 0; i < f.norms.size(); ++i) {
    if (!(f.norms[i] >= Scalar(1e-12))) throw Error("collapsed embedding at row " + std::to_string(i));
  }
  f.z = out.array().colwise() / f.norms.array();
  return f;
}

namespace detail {
template <typename Scalar>
void accumulate_affine(Affine<Scalar>& grad, const Mat<Scalar>& d_out, const Mat<Scalar>& in) {
  grad.weight.noalias() += d_out.transpose() * in;
  grad.bias += d_out.colwise().sum().transpose();
}
}  // namespace detail

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/dz. Returns
/// d(loss)/d(input).
template <typename Scalar>
Mat<Scalar> backward_head(const TrainableModel<Scalar>& model, const HeadForward<Scalar>& f,
                          const Mat<Scalar>& d_z, TrainableModel<Scalar>& grads) {
  const auto& layers = model.heads[f.head].layers;
  auto& g = grads.heads[f.head].layers;

  // z = o / |o|  =>  do = (dz - z * <z, dz>) / |o|
  const Vec<Scalar> radial = (f.z.array() * d_z.array()).rowwise().sum();
  Mat<Scalar> d_out = (d_z - (f.z.array().colwise() * radial.array()).matrix());
  d_out = d_out.array().colwise() / f.norms.array();

  detail::accumulate_affine(g[2], d_out, f.act2);
  Mat<Scalar> d_act2 = d_out * layers[2].weight;
  Mat<Scalar> d_pre2 = d_act2.cwiseProduct(f.pre2.unaryExpr([](Scalar x) { return detail::gelu_grad(x); }));

  detail::accumulate_affine(g[1], d_pre2, f.act1);
  Mat<Scalar> d_act1 = d_pre2 * layers[1].weight;
  Mat<Scalar> d_pre1 = d_act1.cwiseProduct(f.pre1.unaryExpr([](Scalar x) { return detail::gelu_grad(x); }));

  detail::accumulate_affine(g[0], d_pre1, f.adapted);
  Mat<Scalar> d_adapted = d_pre1 * layers[0].weight;

  detail::accumulate_affine(grads.adapter, d_adapted, f.input);
  return d_adapted * model.adapter.weight;
}

}  // namespace xcon
