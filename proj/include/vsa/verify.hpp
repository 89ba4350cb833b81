// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vsa/gradcheck.hpp"
#include "vsa/vsa.hpp"

namespace vsa {

struct CheckLine {
  std::string name;
  double value = 0;   // measured error
  double tol = 0;
  bool pass = false;
};

struct SuiteReport {
  std::vector<CheckLine> lines;
  bool all_pass() const {
    for (const auto& l : lines)
      if (!l.pass) return false;
    return true;
  }
  void add(std::string name, double value, double tol) {
    lines.push_back({std::move(name), value, tol, value < tol});
  }
};

struct OracleSuiteOptions {
  Index cases = 100;
  Index max_batch = 2;
  Index max_heads = 4;
  Index max_seq = 1024;
  Index max_dim = 32;
  std::uint64_t seed = 2024;
  bool double_precision = false;
  bool inject_fault = false;  // corrupts one selection; the suite must then fail
};

namespace detail {

inline TileLayout random_layout(std::mt19937_64& rng, Index max_seq) {
  auto pick = [&](std::initializer_list<Index> xs) {
    std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
    return *(xs.begin() + d(rng));
  };
  for (;;) {
    const Index ct = pick({1, 2, 4}), ch = pick({1, 2, 4}), cw = pick({1, 2, 4});
    const Index nt = pick({1, 2, 3, 4}), nh = pick({1, 2, 3, 4}), nw = pick({1, 2, 4, 8});
    TileLayout layout(ct * nt, ch * nh, cw * nw, ct, ch, cw);
    if (layout.seq_len <= max_seq && layout.num_cubes >= 2) return layout;
  }
}

template <typename Scalar>
double fine_vs_dense_case(const TileLayout& layout, Index batch, Index heads, Index dim,
                          Index top_k, bool full_selection, bool inject_fault,
                          std::mt19937_64& rng) {
  AttnTensor<Scalar> q = AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng);
  AttnTensor<Scalar> k = AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng);
  AttnTensor<Scalar> v = AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng);

  BlockSelection sel = full_selection
                           ? BlockSelection::all_cubes(batch, heads, layout.num_cubes)
                           : random_selection(batch, heads, layout.num_cubes, top_k, rng);
  const FineResult<Scalar> fine = fine_forward(layout, q, k, v, sel);

  if (inject_fault && !full_selection) {
    // deliberately mismatch the reference mask: rotate one row's first entry
    auto row = sel.row(0, 0, 0);
    row[0] = static_cast<std::int32_t>((row[0] + 1) % layout.num_cubes);
    std::sort(row.begin(), row.end());
  }

  double worst = 0;
  for (Index b = 0; b < batch; ++b) {
    const DenseMask mask = selection_to_mask(layout, sel, b);
    const AttnTensor<Scalar> qb = q.batch_slice(b), kb = k.batch_slice(b), vb = v.batch_slice(b);
    const DenseResult<Scalar> dense =
        full_selection ? dense_forward(qb, kb, vb) : dense_forward(qb, kb, vb, &mask);
    for (Index h = 0; h < heads; ++h) {
      const double diff =
          (dense.out.slice(0, h).template cast<double>() -
           fine.out.slice(b, h).template cast<double>())
              .cwiseAbs()
              .maxCoeff();
      worst = std::max(worst, diff);
    }
  }
  return worst;
}

}  // namespace detail

// Fine-stage oracle equivalence: full selection against unmasked dense
// attention, and random selections against dense attention under the
// broadcast mask. One line per sub-check with the worst error across cases.
inline SuiteReport run_oracle_suite(const OracleSuiteOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  const double tol = opt.double_precision ? 1e-10 : 1e-5;

  double worst_full = 0, worst_sparse = 0;
  for (Index c = 0; c < opt.cases; ++c) {
    const TileLayout layout = detail::random_layout(rng, opt.max_seq);
    std::uniform_int_distribution<Index> bd(1, opt.max_batch), hd(1, opt.max_heads);
    auto pick_dim = [&] {
      std::uniform_int_distribution<int> d(0, 2);
      const Index dims[3] = {std::min<Index>(8, opt.max_dim), std::min<Index>(16, opt.max_dim),
                             opt.max_dim};
      return dims[d(rng)];
    };
    const Index batch = bd(rng), heads = hd(rng), dim = pick_dim();
    std::uniform_int_distribution<Index> kd(1, layout.num_cubes);
    const Index top_k = kd(rng);

    const bool full = (c % 2 == 0);
    const bool fault = opt.inject_fault && c == 1;
    const double diff = opt.double_precision
                            ? detail::fine_vs_dense_case<double>(layout, batch, heads, dim, top_k,
                                                                 full, fault, rng)
                            : detail::fine_vs_dense_case<float>(layout, batch, heads, dim, top_k,
                                                                full, fault, rng);
    (full ? worst_full : worst_sparse) = std::max(full ? worst_full : worst_sparse, diff);
  }

  SuiteReport rep;
  const char* prec = opt.double_precision ? "f64" : "f32";
  rep.add(std::string("fine_forward(full selection) vs dense_forward [") + prec + "]",
          worst_full, tol);
  rep.add(std::string("fine_forward(random selection) vs masked dense [") + prec + "]",
          worst_sparse, tol);
  return rep;
}

struct GradcheckSuiteOptions {
  Index cases = 4;
  double step = 1e-5;
  double tol = 1e-5;
  std::uint64_t seed = 7;
};

// End-to-end finite-difference check of vsa_backward on small layouts: every
// gradient surface (Q, K, V, hidden, gate weights) against central
// differences of the loss |O|^2 / 2, double precision. Cases whose top-k
// margin is too small are re-drawn so the differentiation region is stable.
inline SuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  SuiteReport rep;

  struct Shape {
    Index t, h, w, ct, ch, cw, batch, heads, dim, model_dim, top_k;
  };
  const Shape shapes[] = {
      {4, 4, 4, 2, 2, 2, 1, 2, 8, 16, 3},
      {2, 4, 4, 2, 2, 2, 2, 1, 4, 9, 2},
      {4, 4, 2, 2, 1, 2, 1, 2, 4, 12, 5},
      {2, 2, 2, 2, 2, 2, 2, 2, 8, 16, 1},  // single cube: coarse path is a mean
  };

  for (Index c = 0; c < opt.cases; ++c) {
    const Shape& s = shapes[c % (sizeof(shapes) / sizeof(shapes[0]))];
    const TileLayout layout(s.t, s.h, s.w, s.ct, s.ch, s.cw);
    const Index top_k = std::min(s.top_k, layout.num_cubes);

    AttnTensor<double> q, k, v, hidden;
    VsaParams<double> params;
    for (int attempt = 0; attempt < 16; ++attempt) {
      q = AttnTensor<double>::randn(s.batch, s.heads, layout.seq_len, s.dim, rng);
      k = AttnTensor<double>::randn(s.batch, s.heads, layout.seq_len, s.dim, rng);
      v = AttnTensor<double>::randn(s.batch, s.heads, layout.seq_len, s.dim, rng);
      hidden = AttnTensor<double>::randn(s.batch, 1, layout.seq_len, s.model_dim, rng);
      params = VsaParams<double>::random_init(s.model_dim, s.heads, s.dim, top_k, rng);
      params.gate_bias = randn_matrix<double>(1, 2 * s.heads * s.dim, rng, 0.3);

      if (top_k == layout.num_cubes) break;
      // stability margin between the k-th and (k+1)-th coarse probability
      const auto art = coarse_forward_select(layout, q, k, v, top_k);
      double margin = 1.0;
      for (Index b = 0; b < s.batch; ++b)
        for (Index h = 0; h < s.heads; ++h)
          for (Index i = 0; i < layout.num_cubes; ++i) {
            VectorX<double> row = art.ac.slice(b, h).row(i).transpose();
            std::sort(row.data(), row.data() + row.size(), std::greater<>());
            margin = std::min(margin, row[top_k - 1] - row[top_k]);
          }
      if (margin > 1e-3) break;
    }

    const auto loss = [&] {
      const VsaOutput<double> out = vsa_forward(layout, hidden, q, k, v, params);
      return 0.5 * static_cast<double>(out.out.flat().square().sum());
    };

    const VsaOutput<double> out = vsa_forward(layout, hidden, q, k, v, params);
    AttnTensor<double> dout(s.batch, s.heads, layout.seq_len, s.dim);
    dout.flat() = out.out.flat();
    const VsaGrads<double> g = vsa_backward(layout, out, hidden, q, k, v, params, dout);

    auto check_buffer = [&](const char* what, double* data, const double* analytic, Index n) {
      const std::vector<double> fd = fd_gradient(data, n, opt.step, loss);
      rep.add("gradcheck case " + std::to_string(c) + ": d" + what,
              max_rel_err(analytic, fd.data(), n), opt.tol);
    };
    check_buffer("Q", q.data(), g.dq.data(), q.size());
    check_buffer("K", k.data(), g.dk.data(), k.size());
    check_buffer("V", v.data(), g.dv.data(), v.size());
    check_buffer("hidden", hidden.data(), g.dhidden.data(), hidden.size());
    check_buffer("Wg", params.gate_weight.data(), g.dgate_weight.data(),
                 params.gate_weight.size());
    check_buffer("gate_bias", params.gate_bias.data(), g.dgate_bias.data(),
                 params.gate_bias.size());
  }
  return rep;
}

}  // namespace vsa
