// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vsa/coarse.hpp"
#include "vsa/fine.hpp"

namespace vsa {

enum class GateActivation { kIdentity, kSigmoid };

// Gate projection weights plus operator configuration. The projection maps
// hidden states [model_dim] to 2*heads*head_dim gate channels; the first half
// gates the coarse output, the second half the fine output. In adaptation
// mode the fine gate is fixed to one and only the coarse half trains, which
// together with k = num_cubes reproduces full attention at initialization.
template <typename Scalar>
struct VsaParams {
  MatrixX<Scalar> gate_weight;       // [model_dim, 2*heads*head_dim]
  RowVectorX<Scalar> gate_bias;      // empty or [2*heads*head_dim]
  Index top_k = 1;
  PoolMode pool = PoolMode::kMean;
  GateActivation activation = GateActivation::kIdentity;
  bool adaptation = false;

  static VsaParams random_init(Index model_dim, Index heads, Index head_dim, Index top_k,
                               std::mt19937_64& rng) {
    VsaParams p;
    p.gate_weight = randn_matrix<Scalar>(model_dim, 2 * heads * head_dim, rng,
                                         1.0 / std::sqrt(static_cast<double>(model_dim)));
    p.top_k = top_k;
    return p;
  }

  // Zero coarse-gate weights, fine gate fixed to one, k = all cubes.
  static VsaParams adaptation_init(Index model_dim, Index heads, Index head_dim,
                                   Index num_cubes) {
    VsaParams p;
    p.gate_weight = MatrixX<Scalar>::Zero(model_dim, 2 * heads * head_dim);
    p.top_k = num_cubes;
    p.adaptation = true;
    return p;
  }

  void check(Index model_dim, Index heads, Index head_dim) const {
    detail::require(gate_weight.rows() == model_dim &&
                        gate_weight.cols() == 2 * heads * head_dim,
                    "VsaParams: gate projection must map model_dim -> 2*heads*head_dim");
    detail::require(gate_bias.size() == 0 || gate_bias.size() == gate_weight.cols(),
                    "VsaParams: gate bias size mismatch");
    detail::require(top_k >= 1, "VsaParams: k must be >= 1");
  }
};

// Forward artifacts retained for the backward pass.
template <typename Scalar>
struct VsaOutput {
  AttnTensor<Scalar> out;              // [batch, heads, seq, head_dim]
  CoarseArtifacts<Scalar> coarse;
  FineResult<Scalar> fine;             // fine output + streaming stats
  AttnTensor<Scalar> gate_coarse;      // post-activation gates
  AttnTensor<Scalar> gate_fine;
  BlockSelection fine_sel;             // selection the fine stage actually used
};

template <typename Scalar>
struct VsaGrads {
  AttnTensor<Scalar> dq, dk, dv;
  AttnTensor<Scalar> dhidden;          // [batch, 1, seq, model_dim]
  MatrixX<Scalar> dgate_weight;
  RowVectorX<Scalar> dgate_bias;
};

namespace detail {

template <typename Scalar>
void check_hidden(const AttnTensor<Scalar>& hidden, const AttnTensor<Scalar>& q) {
  require(hidden.heads() == 1, "vsa: hidden states are [batch, 1, seq, model_dim]");
  require(hidden.batch() == q.batch() && hidden.seq() == q.seq(),
          "vsa: hidden states do not match Q/K/V shapes");
}

}  // namespace detail

// The combined operator: gate projection, coarse stage (output + top-k
// selection), fine stage restricted to the selection, and the gated sum
// O = Oc .* Gc + Of .* Gf. Q/K/V and hidden states are tile-ordered.
// `sel_override` substitutes a fixed selection for the fine stage (baseline
// controls); the coarse stage still produces its own top-k.
template <typename Scalar>
VsaOutput<Scalar> vsa_forward(const TileLayout& layout, const AttnTensor<Scalar>& hidden,
                              const AttnTensor<Scalar>& q, const AttnTensor<Scalar>& k,
                              const AttnTensor<Scalar>& v, const VsaParams<Scalar>& params,
                              const BlockSelection* sel_override = nullptr) {
  detail::check_qkv(q, k, v);
  detail::check_hidden(hidden, q);
  const Index batch = q.batch(), heads = q.heads(), seq = q.seq(), dim = q.dim();
  params.check(hidden.dim(), heads, dim);

  VsaOutput<Scalar> res;
  res.gate_coarse = AttnTensor<Scalar>(batch, heads, seq, dim);
  res.gate_fine = AttnTensor<Scalar>(batch, heads, seq, dim);
  for (Index b = 0; b < batch; ++b) {
    MatrixX<Scalar> z = hidden.slice(b, 0) * params.gate_weight;  // [seq, 2*heads*dim]
    if (params.gate_bias.size() > 0) z.rowwise() += params.gate_bias;
    if (params.activation == GateActivation::kSigmoid)
      z = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
    for (Index h = 0; h < heads; ++h) {
      res.gate_coarse.slice(b, h) = z.middleCols(h * dim, dim);
      res.gate_fine.slice(b, h) = z.middleCols((heads + h) * dim, dim);
    }
  }
  if (params.adaptation) res.gate_fine.flat().setConstant(Scalar(1));

  res.coarse = coarse_forward_select(layout, q, k, v, params.top_k, params.pool);
  res.fine_sel = sel_override ? *sel_override : res.coarse.sel;
  res.fine = fine_forward(layout, q, k, v, res.fine_sel);

  res.out = AttnTensor<Scalar>(batch, heads, seq, dim);
  res.out.flat() = res.coarse.oc.flat() * res.gate_coarse.flat() +
                   res.fine.out.flat() * res.gate_fine.flat();
  return res;
}

// Joint backward: splits dO into the two gated paths, differentiates gates
// back through the activation and projection, and sums the coarse-path and
// fine-path Q/K/V contributions. The top-k selection is a constant index set;
// no gradient flows through it. In adaptation mode the fine gate is fixed, so
// only the coarse half of the projection receives gradient.
template <typename Scalar>
VsaGrads<Scalar> vsa_backward(const TileLayout& layout, const VsaOutput<Scalar>& fwd,
                              const AttnTensor<Scalar>& hidden, const AttnTensor<Scalar>& q,
                              const AttnTensor<Scalar>& k, const AttnTensor<Scalar>& v,
                              const VsaParams<Scalar>& params, const AttnTensor<Scalar>& dout) {
  detail::check_qkv(q, k, v);
  detail::check_hidden(hidden, q);
  detail::require(dout.same_shape(q), "vsa_backward: dO shape mismatch");
  detail::require(fwd.out.same_shape(q) && fwd.coarse.oc.same_shape(q) && !fwd.fine_sel.empty(),
                  "vsa_backward: missing or mismatched forward artifacts");
  const Index batch = q.batch(), heads = q.heads(), seq = q.seq(), dim = q.dim();
  params.check(hidden.dim(), heads, dim);

  // path split
  AttnTensor<Scalar> doc(batch, heads, seq, dim), dof(batch, heads, seq, dim);
  doc.flat() = dout.flat() * fwd.gate_coarse.flat();
  dof.flat() = dout.flat() * fwd.gate_fine.flat();

  // gate gradients (fine half is fixed in adaptation mode)
  AttnTensor<Scalar> dgc(batch, heads, seq, dim), dgf(batch, heads, seq, dim);
  dgc.flat() = dout.flat() * fwd.coarse.oc.flat();
  if (!params.adaptation) dgf.flat() = dout.flat() * fwd.fine.out.flat();

  VsaGrads<Scalar> g;
  g.dhidden = AttnTensor<Scalar>(batch, 1, seq, hidden.dim());
  g.dgate_weight = MatrixX<Scalar>::Zero(params.gate_weight.rows(), params.gate_weight.cols());
  if (params.gate_bias.size() > 0) g.dgate_bias = RowVectorX<Scalar>::Zero(params.gate_bias.size());

  MatrixX<Scalar> dz(seq, 2 * heads * dim);
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      dz.middleCols(h * dim, dim) = dgc.slice(b, h);
      dz.middleCols((heads + h) * dim, dim) = dgf.slice(b, h);
    }
    if (params.activation == GateActivation::kSigmoid) {
      for (Index h = 0; h < heads; ++h) {
        auto gc = fwd.gate_coarse.slice(b, h);
        dz.middleCols(h * dim, dim).array() *= gc.array() * (Scalar(1) - gc.array());
        if (!params.adaptation) {
          auto gf = fwd.gate_fine.slice(b, h);
          dz.middleCols((heads + h) * dim, dim).array() *= gf.array() * (Scalar(1) - gf.array());
        }
      }
    }
    g.dhidden.slice(b, 0).noalias() = dz * params.gate_weight.transpose();
    g.dgate_weight.noalias() += hidden.slice(b, 0).transpose() * dz;
    if (params.gate_bias.size() > 0) g.dgate_bias += dz.colwise().sum();
  }

  const AttnGrads<Scalar> cg = coarse_backward(fwd.coarse, layout, doc, q, k, v);
  const AttnGrads<Scalar> fg =
      fine_backward(layout, q, k, v, fwd.fine_sel, dof, fwd.fine.saved);

  g.dq = AttnTensor<Scalar>(batch, heads, seq, dim);
  g.dk = AttnTensor<Scalar>(batch, heads, seq, dim);
  g.dv = AttnTensor<Scalar>(batch, heads, seq, dim);
  g.dq.flat() = cg.dq.flat() + fg.dq.flat();
  g.dk.flat() = cg.dk.flat() + fg.dk.flat();
  g.dv.flat() = cg.dv.flat() + fg.dv.flat();
  return g;
}

}  // namespace vsa
