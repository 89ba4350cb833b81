// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vsa/dense.hpp"
#include "vsa/layout.hpp"
#include "vsa/selection.hpp"

namespace vsa {

// Streaming-softmax state saved by fine_forward: per query token, the running
// maximum and log-sum-exp over its selected key set. Enough to recompute any
// tile's probabilities in the backward pass without storing attention.
template <typename Scalar>
using FineSaved = SoftmaxStats<Scalar>;

template <typename Scalar>
struct FineResult {
  AttnTensor<Scalar> out;
  FineSaved<Scalar> saved;
};

namespace detail {

template <typename Scalar>
void check_fine_inputs(const TileLayout& layout, const AttnTensor<Scalar>& q,
                       const AttnTensor<Scalar>& k, const AttnTensor<Scalar>& v,
                       const BlockSelection& sel) {
  check_qkv(q, k, v);
  require(q.seq() == layout.seq_len, "fine stage: sequence length does not match layout");
  require(sel.batch() == q.batch() && sel.heads() == q.heads() &&
              sel.num_cubes() == layout.num_cubes,
          "fine stage: selection does not match shapes");
  sel.validate();
}

}  // namespace detail

// Block-sparse attention over the selected key cubes. Equals dense attention
// under the broadcast mask of `sel`, but never materializes an L x L score
// matrix: each query block streams over its selected B x B tiles with a
// running max and rescaled accumulator. Tiles are visited in ascending key
// cube order; each output row is written by exactly one worker.
template <typename Scalar>
FineResult<Scalar> fine_forward(const TileLayout& layout, const AttnTensor<Scalar>& q,
                                const AttnTensor<Scalar>& k, const AttnTensor<Scalar>& v,
                                const BlockSelection& sel, MacCounter* counter = nullptr) {
  detail::check_fine_inputs(layout, q, k, v, sel);

  const Index batch = q.batch(), heads = q.heads(), dim = q.dim();
  const Index b = layout.cube_size, nc = layout.num_cubes;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();

  FineResult<Scalar> res;
  res.out = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  res.saved.row_max.resize(batch * heads, layout.seq_len);
  res.saved.row_lse.resize(batch * heads, layout.seq_len);

  if (counter) {
    counter->tiles += static_cast<std::uint64_t>(batch) * heads * nc * sel.k();
    counter->macs += static_cast<std::uint64_t>(batch) * heads * nc * sel.k() *
                     (2ull * b * b * dim);  // QK^T and PV per tile
  }

  parallel_for(batch * heads * nc, [&](Index work) {
    const Index bh = work / nc, qc = work % nc;
    const Index bb = bh / heads, hh = bh % heads;
    auto qm = q.slice(bb, hh);
    auto km = k.slice(bb, hh);
    auto vm = v.slice(bb, hh);
    const auto qb = qm.middleRows(qc * b, b);

    VectorX<Scalar> run_max = VectorX<Scalar>::Constant(b, neg_inf);
    VectorX<Scalar> run_sum = VectorX<Scalar>::Zero(b);
    MatrixX<Scalar> acc = MatrixX<Scalar>::Zero(b, dim);
    MatrixX<Scalar> s(b, b);

    for (std::int32_t kc : sel.row(bb, hh, qc)) {
      s.noalias() = qb * km.middleRows(kc * b, b).transpose();
      s *= scale;
      const VectorX<Scalar> tile_max = s.rowwise().maxCoeff();
      const VectorX<Scalar> new_max = run_max.cwiseMax(tile_max);
      const ArrayX<Scalar> rescale = (run_max - new_max).array().exp();
      s = (s.colwise() - new_max).array().exp().matrix();
      run_sum = run_sum.cwiseProduct(rescale.matrix()) + s.rowwise().sum();
      acc.array().colwise() *= rescale;
      acc.noalias() += s * vm.middleRows(kc * b, b);
      run_max = new_max;
    }

    auto out = res.out.slice(bb, hh).middleRows(qc * b, b);
    out = acc;
    out.array().colwise() /= run_sum.array();
    res.saved.row_max.row(bh).segment(qc * b, b) = run_max.transpose();
    res.saved.row_lse.row(bh).segment(qc * b, b) =
        (run_max.array() + run_sum.array().log()).transpose();
  });
  return res;
}

// Gradients of fine_forward, identical to dense_backward under the broadcast
// mask. Per-tile probabilities recompute from the saved log-sum-exp; nothing
// quadratic is stored. dQ parallelizes over query blocks; dK/dV run a second
// transposed pass over key blocks, each accumulating its query blocks in
// ascending order, so results are deterministic for any worker count.
// Key cubes never selected by any query receive exactly zero gradient.
template <typename Scalar>
AttnGrads<Scalar> fine_backward(const TileLayout& layout, const AttnTensor<Scalar>& q,
                                const AttnTensor<Scalar>& k, const AttnTensor<Scalar>& v,
                                const BlockSelection& sel, const AttnTensor<Scalar>& dout,
                                const FineSaved<Scalar>& saved) {
  detail::check_fine_inputs(layout, q, k, v, sel);
  detail::require(dout.same_shape(q), "fine_backward: dO shape mismatch");
  const Index batch = q.batch(), heads = q.heads(), dim = q.dim();
  detail::require(saved.row_lse.rows() == batch * heads && saved.row_lse.cols() == q.seq(),
                  "fine_backward: saved statistics do not match shapes");

  const Index b = layout.cube_size, nc = layout.num_cubes;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));

  AttnGrads<Scalar> g;
  g.dq = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  g.dk = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  g.dv = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);

  // delta_i = sum_j A_ij dP_ij, needed by every tile of row i
  MatrixX<Scalar> delta(batch * heads, layout.seq_len);

  parallel_for(batch * heads * nc, [&](Index work) {
    const Index bh = work / nc, qc = work % nc;
    const Index bb = bh / heads, hh = bh % heads;
    auto qm = q.slice(bb, hh);
    auto km = k.slice(bb, hh);
    auto vm = v.slice(bb, hh);
    auto dom = dout.slice(bb, hh);
    const auto qb = qm.middleRows(qc * b, b);
    const auto dob = dom.middleRows(qc * b, b);
    const auto lse = saved.row_lse.row(bh).segment(qc * b, b).transpose();

    MatrixX<Scalar> p(b, b), dp(b, b);
    VectorX<Scalar> dl = VectorX<Scalar>::Zero(b);
    for (std::int32_t kc : sel.row(bb, hh, qc)) {
      p.noalias() = qb * km.middleRows(kc * b, b).transpose();
      p *= scale;
      p = (p.colwise() - lse).array().exp().matrix();
      dp.noalias() = dob * vm.middleRows(kc * b, b).transpose();
      dl += (p.array() * dp.array()).rowwise().sum().matrix();
    }
    delta.row(bh).segment(qc * b, b) = dl.transpose();

    MatrixX<Scalar> dqb = MatrixX<Scalar>::Zero(b, dim);
    for (std::int32_t kc : sel.row(bb, hh, qc)) {
      p.noalias() = qb * km.middleRows(kc * b, b).transpose();
      p *= scale;
      p = (p.colwise() - lse).array().exp().matrix();
      dp.noalias() = dob * vm.middleRows(kc * b, b).transpose();
      dp = (p.array() * (dp.colwise() - dl).array()).matrix() * scale;
      dqb.noalias() += dp * km.middleRows(kc * b, b);
    }
    g.dq.slice(bb, hh).middleRows(qc * b, b) = dqb;
  });

  // reverse map per (batch, head): key cube -> query cubes selecting it
  std::vector<std::vector<std::int32_t>> rev(static_cast<std::size_t>(batch * heads * nc));
  for (Index bh = 0; bh < batch * heads; ++bh) {
    const Index bb = bh / heads, hh = bh % heads;
    for (Index qc = 0; qc < nc; ++qc)
      for (std::int32_t kc : sel.row(bb, hh, qc))
        rev[static_cast<std::size_t>(bh * nc + kc)].push_back(static_cast<std::int32_t>(qc));
  }

  parallel_for(batch * heads * nc, [&](Index work) {
    const Index bh = work / nc, kc = work % nc;
    const Index bb = bh / heads, hh = bh % heads;
    const auto& qlist = rev[static_cast<std::size_t>(work)];
    if (qlist.empty()) return;
    auto qm = q.slice(bb, hh);
    auto km = k.slice(bb, hh);
    auto vm = v.slice(bb, hh);
    auto dom = dout.slice(bb, hh);
    const auto kb = km.middleRows(kc * b, b);
    const auto vb = vm.middleRows(kc * b, b);

    MatrixX<Scalar> dkb = MatrixX<Scalar>::Zero(b, dim);
    MatrixX<Scalar> dvb = MatrixX<Scalar>::Zero(b, dim);
    MatrixX<Scalar> p(b, b), dp(b, b);
    for (std::int32_t qc : qlist) {
      const auto qb = qm.middleRows(qc * b, b);
      const auto dob = dom.middleRows(qc * b, b);
      const auto lse = saved.row_lse.row(bh).segment(qc * b, b).transpose();
      const auto dl = delta.row(bh).segment(qc * b, b).transpose();
      p.noalias() = qb * kb.transpose();
      p *= scale;
      p = (p.colwise() - lse).array().exp().matrix();
      dvb.noalias() += p.transpose() * dob;
      dp.noalias() = dob * vb.transpose();
      dp = (p.array() * (dp.colwise() - dl).array()).matrix() * scale;
      dkb.noalias() += dp.transpose() * qb;
    }
    g.dk.slice(bb, hh).middleRows(kc * b, b) = dkb;
    g.dv.slice(bb, hh).middleRows(kc * b, b) = dvb;
  });
  return g;
}

}  // namespace vsa
