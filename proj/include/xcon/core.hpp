// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace xcon {

using Index = Eigen::Index;

// Row-major dense matrix: one sample per row, matching the on-disk layout.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Mat<float>;
using MatrixD = Mat<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Class label value meaning "unknown" in dense label vectors.
inline constexpr int kNoLabel = -1;

}  // namespace xcon
