// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>

#include "vsa/parallel.hpp"
#include "vsa/tensor.hpp"

namespace vsa {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Boolean attention mask, true = attend. Holds either one [seq, seq] matrix
// shared by every head or one matrix per head. A row with no allowed key is
// rejected by the attention ops.
class DenseMask {
 public:
  DenseMask() = default;
  explicit DenseMask(Index seq, Index heads = 1) : seq_(seq), per_head_(heads) {
    detail::require(seq >= 1 && heads >= 1, "DenseMask: seq and heads must be >= 1");
    for (auto& m : per_head_) m = BoolMatrix::Constant(seq, seq, false);
  }

  static DenseMask all_true(Index seq) {
    DenseMask m(seq);
    m.per_head_[0].setConstant(true);
    return m;
  }

  Index seq() const { return seq_; }
  Index mask_heads() const { return static_cast<Index>(per_head_.size()); }

  BoolMatrix& head(Index h) { return per_head_.at(static_cast<std::size_t>(h)); }
  const BoolMatrix& for_head(Index h) const {
    return per_head_.size() == 1 ? per_head_[0] : per_head_.at(static_cast<std::size_t>(h));
  }

  bool every_row_nonempty() const {
    for (const auto& m : per_head_)
      for (Index i = 0; i < m.rows(); ++i)
        if (!m.row(i).any()) return false;
    return true;
  }

 private:
  Index seq_ = 0;
  std::vector<BoolMatrix> per_head_;
};

// Row statistics saved by a softmax forward pass, [batch*heads, seq].
// row_lse includes the subtracted maximum, so probabilities recompute as
// exp(score - row_lse).
template <typename Scalar>
struct SoftmaxStats {
  MatrixX<Scalar> row_max;
  MatrixX<Scalar> row_lse;
};

template <typename Scalar>
struct DenseResult {
  AttnTensor<Scalar> out;
  SoftmaxStats<Scalar> stats;
};

template <typename Scalar>
struct AttnGrads {
  AttnTensor<Scalar> dq, dk, dv;
};

namespace detail {

template <typename Scalar>
void check_qkv(const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
               const AttnTensor<Scalar>& v) {
  require(q.size() > 0, "attention: empty tensors");
  require(q.same_shape(k) && q.same_shape(v), "attention: Q, K, V must share one shape");
}

template <typename Scalar>
void check_mask(const DenseMask* mask, const AttnTensor<Scalar>& q) {
  if (!mask) return;
  require(mask->seq() == q.seq(), "attention: mask size does not match sequence length");
  require(mask->mask_heads() == 1 || mask->mask_heads() == q.heads(),
          "attention: mask head count must be 1 or match heads");
  require(mask->every_row_nonempty(), "attention: fully masked query row");
}

}  // namespace detail

// Full softmax attention, O = softmax(Q K^T / sqrt(d) + M) V, with per-row
// max subtraction. Row blocks of the score matrix are materialized one at a
// time so long sequences stay within memory. Saved statistics are enough to
// recompute probabilities in the backward pass.
template <typename Scalar>
DenseResult<Scalar> dense_forward(const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
                                  const AttnTensor<Scalar>& v, const DenseMask* mask = nullptr,
                                  MacCounter* counter = nullptr) {
  detail::check_qkv(q, k, v);
  detail::require(q.all_finite() && k.all_finite() && v.all_finite(),
                  "dense_forward: non-finite input");
  detail::check_mask(mask, q);

  const Index batch = q.batch(), heads = q.heads(), seq = q.seq(), dim = q.dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
  constexpr Index kRowBlock = 128;

  DenseResult<Scalar> res;
  res.out = AttnTensor<Scalar>(batch, heads, seq, dim);
  res.stats.row_max.resize(batch * heads, seq);
  res.stats.row_lse.resize(batch * heads, seq);

  if (counter) {
    const auto rows = static_cast<std::uint64_t>(batch) * heads * seq;
    counter->tiles += static_cast<std::uint64_t>(batch) * heads *
                      ((seq + kRowBlock - 1) / kRowBlock) * ((seq + kRowBlock - 1) / kRowBlock);
    counter->macs += rows * seq * dim * 2;  // QK^T and PV
  }

  parallel_for(batch * heads, [&](Index bh) {
    const Index b = bh / heads, h = bh % heads;
    auto qm = q.slice(b, h);
    auto km = k.slice(b, h);
    auto vm = v.slice(b, h);
    auto om = res.out.slice(b, h);
    const BoolMatrix* m = mask ? &mask->for_head(h) : nullptr;

    MatrixX<Scalar> s;
    for (Index r0 = 0; r0 < seq; r0 += kRowBlock) {
      const Index nr = std::min(kRowBlock, seq - r0);
      s.noalias() = qm.middleRows(r0, nr) * km.transpose();
      s *= scale;
      if (m) {
        for (Index i = 0; i < nr; ++i)
          for (Index j = 0; j < seq; ++j)
            if (!(*m)(r0 + i, j)) s(i, j) = -std::numeric_limits<Scalar>::infinity();
      }
      const VectorX<Scalar> rmax = s.rowwise().maxCoeff();
      s = (s.colwise() - rmax).array().exp().matrix();
      const VectorX<Scalar> rsum = s.rowwise().sum();
      om.middleRows(r0, nr).noalias() = s * vm;
      om.middleRows(r0, nr).array().colwise() /= rsum.array();
      res.stats.row_max.row(bh).segment(r0, nr) = rmax.transpose();
      res.stats.row_lse.row(bh).segment(r0, nr) =
          (rmax.array() + rsum.array().log()).transpose();
    }
  });
  return res;
}

// Gradients of masked softmax attention given upstream dO and the forward's
// saved row statistics: dV = A^T dO, dS = A .* (dO V^T - rowsum(A .* dO V^T)),
// dQ = dS K / sqrt(d), dK = dS^T Q / sqrt(d). Probabilities are recomputed
// from row_lse rather than stored. Row blocks accumulate in ascending order,
// independent of thread count.
template <typename Scalar>
AttnGrads<Scalar> dense_backward(const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
                                 const AttnTensor<Scalar>& v, const DenseMask* mask,
                                 const AttnTensor<Scalar>& dout,
                                 const SoftmaxStats<Scalar>& stats) {
  detail::check_qkv(q, k, v);
  detail::require(dout.same_shape(q), "dense_backward: dO shape mismatch");
  detail::check_mask(mask, q);
  const Index batch = q.batch(), heads = q.heads(), seq = q.seq(), dim = q.dim();
  detail::require(stats.row_lse.rows() == batch * heads && stats.row_lse.cols() == seq,
                  "dense_backward: saved statistics do not match shapes");
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
  constexpr Index kRowBlock = 128;

  AttnGrads<Scalar> g;
  g.dq = AttnTensor<Scalar>(batch, heads, seq, dim);
  g.dk = AttnTensor<Scalar>(batch, heads, seq, dim);
  g.dv = AttnTensor<Scalar>(batch, heads, seq, dim);

  parallel_for(batch * heads, [&](Index bh) {
    const Index b = bh / heads, h = bh % heads;
    auto qm = q.slice(b, h);
    auto km = k.slice(b, h);
    auto vm = v.slice(b, h);
    auto dom = dout.slice(b, h);
    auto dqm = g.dq.slice(b, h);
    auto dkm = g.dk.slice(b, h);
    auto dvm = g.dv.slice(b, h);
    const BoolMatrix* m = mask ? &mask->for_head(h) : nullptr;

    MatrixX<Scalar> p, dp;
    for (Index r0 = 0; r0 < seq; r0 += kRowBlock) {
      const Index nr = std::min(kRowBlock, seq - r0);
      p.noalias() = qm.middleRows(r0, nr) * km.transpose();
      p *= scale;
      if (m) {
        for (Index i = 0; i < nr; ++i)
          for (Index j = 0; j < seq; ++j)
            if (!(*m)(r0 + i, j)) p(i, j) = -std::numeric_limits<Scalar>::infinity();
      }
      p = (p.colwise() - stats.row_lse.row(bh).segment(r0, nr).transpose())
              .array()
              .exp()
              .matrix();
      dp.noalias() = dom.middleRows(r0, nr) * vm.transpose();
      const VectorX<Scalar> delta = (p.array() * dp.array()).rowwise().sum();
      // reuse dp as dS
      dp = (p.array() * (dp.colwise() - delta).array()).matrix() * scale;
      dqm.middleRows(r0, nr).noalias() = dp * km;
      dkm.noalias() += dp.transpose() * qm.middleRows(r0, nr);
      dvm.noalias() += p.transpose() * dom.middleRows(r0, nr);
    }
  });
  return g;
}

// Attention probability matrix [batch, heads, seq, seq], row-stochastic.
// Materializes the full matrix; intended for diagnostics and oracle tests at
// small sequence lengths.
template <typename Scalar>
AttnTensor<Scalar> dense_probs(const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
                               const DenseMask* mask = nullptr) {
  detail::require(q.same_shape(k), "dense_probs: Q and K must share one shape");
  detail::check_mask(mask, q);
  const Index batch = q.batch(), heads = q.heads(), seq = q.seq(), dim = q.dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));

  AttnTensor<Scalar> probs(batch, heads, seq, seq);
  parallel_for(batch * heads, [&](Index bh) {
    const Index b = bh / heads, h = bh % heads;
    auto pm = probs.slice(b, h);
    pm.noalias() = q.slice(b, h) * k.slice(b, h).transpose();
    pm *= scale;
    if (mask) {
      const auto& mm = mask->for_head(h);
      for (Index i = 0; i < seq; ++i)
        for (Index j = 0; j < seq; ++j)
          if (!mm(i, j)) pm(i, j) = -std::numeric_limits<Scalar>::infinity();
    }
    const VectorX<Scalar> rmax = pm.rowwise().maxCoeff();
    pm = (pm.colwise() - rmax).array().exp().matrix();
    const VectorX<Scalar> rsum = pm.rowwise().sum();
    pm.array().colwise() /= rsum.array();
  });
  return probs;
}

}  // namespace vsa
