// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace vsa {

using Index = Eigen::Index;

namespace detail {

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Multiply-accumulate instrumentation. Attention kernels add the tile count
// and MAC count they actually execute; the ratio sparse/dense is the achieved
// density.
struct MacCounter {
  std::uint64_t tiles = 0;
  std::uint64_t macs = 0;
};

// Dense rank-4 array [batch, heads, seq, head_dim], contiguous row-major.
// Each (batch, head) pair maps onto an Eigen [seq, head_dim] matrix view, so
// all per-head math stays expression-based.
template <typename Scalar>
class AttnTensor {
  static_assert(std::is_floating_point_v<Scalar>, "AttnTensor requires float or double");

 public:
  using Matrix = MatrixX<Scalar>;
  using Map = Eigen::Map<Matrix>;
  using ConstMap = Eigen::Map<const Matrix>;

  AttnTensor() = default;

  AttnTensor(Index batch, Index heads, Index seq, Index dim)
      : b_(batch), h_(heads), s_(seq), d_(dim) {
    detail::require(batch >= 1 && heads >= 1 && seq >= 1 && dim >= 1,
                    "AttnTensor: all dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(batch) * heads * seq * dim, Scalar(0));
  }

  static AttnTensor randn(Index batch, Index heads, Index seq, Index dim,
                          std::mt19937_64& rng, double stddev = 1.0) {
    AttnTensor t(batch, heads, seq, dim);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.data_) x = static_cast<Scalar>(dist(rng));
    return t;
  }

  Index batch() const { return b_; }
  Index heads() const { return h_; }
  Index seq() const { return s_; }
  Index dim() const { return d_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  // [seq, head_dim] view of one (batch, head) slice.
  Map slice(Index b, Index h) {
    return Map(data_.data() + slice_offset(b, h), s_, d_);
  }
  ConstMap slice(Index b, Index h) const {
    return ConstMap(data_.data() + slice_offset(b, h), s_, d_);
  }

  Eigen::Map<ArrayX<Scalar>> flat() {
    return Eigen::Map<ArrayX<Scalar>>(data_.data(), size());
  }
  Eigen::Map<const ArrayX<Scalar>> flat() const {
    return Eigen::Map<const ArrayX<Scalar>>(data_.data(), size());
  }

  bool same_shape(const AttnTensor& o) const {
    return b_ == o.b_ && h_ == o.h_ && s_ == o.s_ && d_ == o.d_;
  }

  bool all_finite() const { return flat().isFinite().all(); }

  void set_zero() { flat().setZero(); }

  AttnTensor batch_slice(Index b) const {
    AttnTensor out(1, h_, s_, d_);
    for (Index h = 0; h < h_; ++h) out.slice(0, h) = slice(b, h);
    return out;
  }

  template <typename T>
  AttnTensor<T> cast() const {
    AttnTensor<T> out(b_, h_, s_, d_);
    for (Index i = 0; i < size(); ++i) out.data()[i] = static_cast<T>(data_[i]);
    return out;
  }

 private:
  Index slice_offset(Index b, Index h) const {
    detail::require(b >= 0 && b < b_ && h >= 0 && h < h_, "AttnTensor: slice index out of range");
    return (b * h_ + h) * s_ * d_;
  }

  Index b_ = 0, h_ = 0, s_ = 0, d_ = 0;
  std::vector<Scalar> data_;
};

// Gaussian-filled weight matrix, for parameter init.
template <typename Scalar>
MatrixX<Scalar> randn_matrix(Index rows, Index cols, std::mt19937_64& rng, double stddev = 1.0) {
  MatrixX<Scalar> m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(dist(rng));
  return m;
}

}  // namespace vsa
