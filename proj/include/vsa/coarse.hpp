// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <numeric>

#include "vsa/dense.hpp"
#include "vsa/layout.hpp"
#include "vsa/selection.hpp"

namespace vsa {

enum class PoolMode { kMean, kMax };

// Everything the coarse pass produces, retained for the backward pass:
// pooled projections, the cube-level probability matrix, the token-level
// broadcast output, and the top-k selection feeding the fine stage.
template <typename Scalar>
struct CoarseArtifacts {
  AttnTensor<Scalar> qc, kc, vc;  // [batch, heads, num_cubes, head_dim]
  AttnTensor<Scalar> ac;          // [batch, heads, num_cubes, num_cubes], row-stochastic
  AttnTensor<Scalar> oc;          // [batch, heads, seq, head_dim], constant per query cube
  BlockSelection sel;
  PoolMode pool = PoolMode::kMean;
};

// Top-k indices of one score row, values descending with ties broken toward
// the lower index; the result is reported ascending. Invariant under any
// strictly increasing per-row transform of the scores.
template <typename Scalar>
void topk_row(const Scalar* values, Index n, Index k, std::int32_t* out) {
  assert(k >= 1 && k <= n);
  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [values](std::int32_t a, std::int32_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  std::sort(order.begin(), order.begin() + k);
  std::copy(order.begin(), order.begin() + k, out);
}

// Cube-level pooling of a tile-ordered tensor: pooled row c aggregates the
// cube_size tokens of cube c. The input being tile-ordered is the caller's
// contract; raster-ordered input is not detectable here.
template <typename Scalar>
AttnTensor<Scalar> pool_cubes(const TileLayout& layout, const AttnTensor<Scalar>& x,
                              PoolMode mode) {
  detail::require(x.seq() == layout.seq_len, "pool_cubes: sequence length does not match layout");
  const Index b = layout.cube_size;
  AttnTensor<Scalar> pooled(x.batch(), x.heads(), layout.num_cubes, x.dim());
  parallel_for(x.batch() * x.heads(), [&](Index bh) {
    const Index bb = bh / x.heads(), hh = bh % x.heads();
    auto src = x.slice(bb, hh);
    auto dst = pooled.slice(bb, hh);
    for (Index c = 0; c < layout.num_cubes; ++c) {
      if (mode == PoolMode::kMean)
        dst.row(c) = src.middleRows(c * b, b).colwise().mean();
      else
        dst.row(c) = src.middleRows(c * b, b).colwise().maxCoeff();
    }
  });
  return pooled;
}

// The coarse pass: pool Q/K/V to cube level, run cube-to-cube softmax
// attention, broadcast the cube outputs back to all tokens of each query
// cube, and take the per-row top-k as the block selection. Probabilities,
// output, and indices come out of one traversal of the cube rows.
template <typename Scalar>
CoarseArtifacts<Scalar> coarse_forward_select(const TileLayout& layout,
                                              const AttnTensor<Scalar>& q,
                                              const AttnTensor<Scalar>& k,
                                              const AttnTensor<Scalar>& v, Index top_k,
                                              PoolMode mode = PoolMode::kMean) {
  detail::check_qkv(q, k, v);
  detail::require(q.seq() == layout.seq_len, "coarse_forward_select: shape/layout mismatch");
  detail::require(top_k >= 1 && top_k <= layout.num_cubes,
                  "coarse_forward_select: k must be in [1, num_cubes]");

  const Index batch = q.batch(), heads = q.heads(), dim = q.dim();
  const Index nc = layout.num_cubes, b = layout.cube_size;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));

  CoarseArtifacts<Scalar> art;
  art.pool = mode;
  art.qc = pool_cubes(layout, q, mode);
  art.kc = pool_cubes(layout, k, mode);
  art.vc = pool_cubes(layout, v, mode);
  art.ac = AttnTensor<Scalar>(batch, heads, nc, nc);
  art.oc = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  art.sel = BlockSelection(batch, heads, nc, top_k);

  parallel_for(batch * heads, [&](Index bh) {
    const Index bb = bh / heads, hh = bh % heads;
    auto qc = art.qc.slice(bb, hh);
    auto kc = art.kc.slice(bb, hh);
    auto vc = art.vc.slice(bb, hh);
    auto ac = art.ac.slice(bb, hh);
    auto oc = art.oc.slice(bb, hh);

    ac.noalias() = qc * kc.transpose();
    ac *= scale;
    for (Index i = 0; i < nc; ++i) {
      const Scalar m = ac.row(i).maxCoeff();
      ac.row(i) = (ac.row(i).array() - m).exp();
      ac.row(i) /= ac.row(i).sum();
      topk_row(ac.row(i).data(), nc, top_k, art.sel.row(bb, hh, i).data());
      oc.middleRows(i * b, b) = (ac.row(i) * vc).replicate(b, 1);
    }
  });
#ifndef NDEBUG
  art.sel.validate();
#endif
  return art;
}

// Token-level gradient contributions of the coarse path alone. The broadcast
// backward sums the token gradient over each query cube; cube-level attention
// backward matches dense_backward; pooling backward distributes by 1/B for
// mean and routes to the argmax token (first occurrence on value ties) for
// max. The top-k selection carries no gradient.
template <typename Scalar>
AttnGrads<Scalar> coarse_backward(const CoarseArtifacts<Scalar>& art, const TileLayout& layout,
                                  const AttnTensor<Scalar>& doc_token,
                                  const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
                                  const AttnTensor<Scalar>& v) {
  detail::check_qkv(q, k, v);
  detail::require(doc_token.same_shape(q), "coarse_backward: dOc shape mismatch");
  detail::require(art.ac.size() > 0 && art.ac.seq() == layout.num_cubes,
                  "coarse_backward: artifacts do not match layout");

  const Index batch = q.batch(), heads = q.heads(), dim = q.dim();
  const Index nc = layout.num_cubes, b = layout.cube_size;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));

  AttnGrads<Scalar> g;
  g.dq = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  g.dk = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);
  g.dv = AttnTensor<Scalar>(batch, heads, layout.seq_len, dim);

  parallel_for(batch * heads, [&](Index bh) {
    const Index bb = bh / heads, hh = bh % heads;
    auto ac = art.ac.slice(bb, hh);
    auto qc = art.qc.slice(bb, hh);
    auto kc = art.kc.slice(bb, hh);
    auto vc = art.vc.slice(bb, hh);
    auto dtok = doc_token.slice(bb, hh);

    // broadcast backward: cube-level dOc

    MatrixX<Scalar> doc(nc, dim);
    for (Index c = 0; c < nc; ++c) doc.row(c) = dtok.middleRows(c * b, b).colwise().sum();

    // cube-level attention backward
    MatrixX<Scalar> dvc = ac.transpose() * doc;
    MatrixX<Scalar> dp = doc * vc.transpose();
    const VectorX<Scalar> delta = (ac.array() * dp.array()).rowwise().sum();
    const MatrixX<Scalar> ds = (ac.array() * (dp.colwise() - delta).array()).matrix() * scale;
    MatrixX<Scalar> dqc = ds * kc;
    MatrixX<Scalar> dkc = ds.transpose() * qc;

    // pooling backward to token level
    auto unpool = [&](const MatrixX<Scalar>& dcube, typename AttnTensor<Scalar>::ConstMap src,
                      typename AttnTensor<Scalar>::Map dst) {
      if (art.pool == PoolMode::kMean) {
        for (Index c = 0; c < nc; ++c)
          dst.middleRows(c * b, b) = (dcube.row(c) / static_cast<Scalar>(b)).replicate(b, 1);
      } else {
        for (Index c = 0; c < nc; ++c)
          for (Index j = 0; j < dim; ++j) {
            Index argmax = 0;
            src.col(j).segment(c * b, b).maxCoeff(&argmax);
            dst(c * b + argmax, j) += dcube(c, j);
          }
      }
    };
    unpool(dqc, q.slice(bb, hh), g.dq.slice(bb, hh));
    unpool(dkc, k.slice(bb, hh), g.dk.slice(bb, hh));
    unpool(dvc, v.slice(bb, hh), g.dv.slice(bb, hh));
  });
  return g;
}

}  // namespace vsa
