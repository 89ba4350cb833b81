// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"
#include "vsa/gradcheck.hpp"
#include "vsa/verify.hpp"
#include "vsa/vsa.hpp"

using namespace vsa;

namespace {

template <typename Scalar>
struct Problem {
  TileLayout layout;
  AttnTensor<Scalar> hidden, q, k, v;
};

template <typename Scalar>
Problem<Scalar> make_problem(Index batch, Index heads, Index dim, Index model_dim,
                             std::uint64_t seed) {
  const TileLayout layout(4, 4, 4, 2, 2, 2);
  std::mt19937_64 rng(seed);
  return {layout, AttnTensor<Scalar>::randn(batch, 1, layout.seq_len, model_dim, rng),
          AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng),
          AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng),
          AttnTensor<Scalar>::randn(batch, heads, layout.seq_len, dim, rng)};
}

}  // namespace

TEST_CASE("adaptation mode with k = num_cubes equals dense attention, both directions") {
  auto p = make_problem<float>(2, 2, 8, 12, 71);
  const auto params = VsaParams<float>::adaptation_init(12, 2, 8, p.layout.num_cubes);
  const auto out = vsa_forward(p.layout, p.hidden, p.q, p.k, p.v, params);

  const auto dense = dense_forward(p.q, p.k, p.v);
  CHECK((out.out.flat() - dense.out.flat()).abs().maxCoeff() < 1e-5);

  std::mt19937_64 rng(72);
  const auto dout = AttnTensor<float>::randn(2, 2, p.layout.seq_len, 8, rng);
  const auto g = vsa_backward(p.layout, out, p.hidden, p.q, p.k, p.v, params, dout);
  const auto dg = dense_backward(p.q, p.k, p.v, nullptr, dout, dense.stats);
  CHECK((g.dq.flat() - dg.dq.flat()).abs().maxCoeff() < 1e-5);
  CHECK((g.dk.flat() - dg.dk.flat()).abs().maxCoeff() < 1e-5);
  CHECK((g.dv.flat() - dg.dv.flat()).abs().maxCoeff() < 1e-5);

  // only the coarse half of the gate projection trains
  const Index half = 2 * 8;
  CHECK(g.dgate_weight.leftCols(half).cwiseAbs().maxCoeff() > 0);
  CHECK(g.dgate_weight.rightCols(half).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero fine-gate weights with unit coarse gate reduce to the coarse output") {
  auto p = make_problem<double>(1, 2, 8, 10, 73);
  VsaParams<double> params;
  params.gate_weight = MatrixX<double>::Zero(10, 2 * 2 * 8);
  params.gate_bias = RowVectorX<double>::Zero(2 * 2 * 8);
  params.gate_bias.head(2 * 8).setConstant(1.0);  // Gc = 1, Gf = 0
  params.top_k = 3;
  const auto out = vsa_forward(p.layout, p.hidden, p.q, p.k, p.v, params);
  CHECK((out.out.flat() - out.coarse.oc.flat()).abs().maxCoeff() == 0.0);
}

TEST_CASE("single-cube layout: fine stage is dense, coarse is the value mean") {
  const TileLayout layout(2, 2, 2, 2, 2, 2);
  std::mt19937_64 rng(74);
  const Index dim = 4, md = 6;
  const auto hidden = AttnTensor<double>::randn(1, 1, layout.seq_len, md, rng);
  const auto q = AttnTensor<double>::randn(1, 1, layout.seq_len, dim, rng);
  const auto k = AttnTensor<double>::randn(1, 1, layout.seq_len, dim, rng);
  const auto v = AttnTensor<double>::randn(1, 1, layout.seq_len, dim, rng);
  auto params = VsaParams<double>::random_init(md, 1, dim, 1, rng);

  const auto out = vsa_forward(layout, hidden, q, k, v, params);
  const auto dense = dense_forward(q, k, v);
  const RowVectorX<double> vmean = v.slice(0, 0).colwise().mean();

  AttnTensor<double> expected(1, 1, layout.seq_len, dim);
  for (Index i = 0; i < layout.seq_len; ++i)
    expected.slice(0, 0).row(i) =
        out.gate_coarse.slice(0, 0).row(i).cwiseProduct(vmean) +
        out.gate_fine.slice(0, 0).row(i).cwiseProduct(dense.out.slice(0, 0).row(i));
  CHECK((out.out.flat() - expected.flat()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("zero upstream gradient zeroes every output gradient") {
  auto p = make_problem<double>(1, 2, 4, 8, 75);
  std::mt19937_64 rng(76);
  auto params = VsaParams<double>::random_init(8, 2, 4, 3, rng);
  params.gate_bias = randn_matrix<double>(1, 2 * 2 * 4, rng);
  const auto out = vsa_forward(p.layout, p.hidden, p.q, p.k, p.v, params);
  AttnTensor<double> zero(1, 2, p.layout.seq_len, 4);
  const auto g = vsa_backward(p.layout, out, p.hidden, p.q, p.k, p.v, params, zero);
  CHECK(g.dq.flat().abs().maxCoeff() == 0.0);
  CHECK(g.dk.flat().abs().maxCoeff() == 0.0);
  CHECK(g.dv.flat().abs().maxCoeff() == 0.0);
  CHECK(g.dhidden.flat().abs().maxCoeff() == 0.0);
  CHECK(g.dgate_weight.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.dgate_bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("missing forward artifacts are rejected") {
  auto p = make_problem<double>(1, 1, 4, 6, 77);
  std::mt19937_64 rng(78);
  const auto params = VsaParams<double>::random_init(6, 1, 4, 2, rng);
  VsaOutput<double> empty;
  AttnTensor<double> dout(1, 1, p.layout.seq_len, 4);
  CHECK_THROWS_AS(vsa_backward(p.layout, empty, p.hidden, p.q, p.k, p.v, params, dout),
                  std::invalid_argument);
}

TEST_CASE("output is invariant to batch permutation") {
  auto p = make_problem<double>(3, 2, 4, 8, 79);
  std::mt19937_64 rng(80);
  const auto params = VsaParams<double>::random_init(8, 2, 4, 2, rng);
  const auto out = vsa_forward(p.layout, p.hidden, p.q, p.k, p.v, params);

  const Index order[3] = {2, 0, 1};
  Problem<double> shuffled{p.layout, AttnTensor<double>(3, 1, p.layout.seq_len, 8),
                           AttnTensor<double>(3, 2, p.layout.seq_len, 4),
                           AttnTensor<double>(3, 2, p.layout.seq_len, 4),
                           AttnTensor<double>(3, 2, p.layout.seq_len, 4)};
  for (Index b = 0; b < 3; ++b) {
    shuffled.hidden.slice(b, 0) = p.hidden.slice(order[b], 0);
    for (Index h = 0; h < 2; ++h) {
      shuffled.q.slice(b, h) = p.q.slice(order[b], h);
      shuffled.k.slice(b, h) = p.k.slice(order[b], h);
      shuffled.v.slice(b, h) = p.v.slice(order[b], h);
    }
  }
  const auto out2 =
      vsa_forward(p.layout, shuffled.hidden, shuffled.q, shuffled.k, shuffled.v, params);
  for (Index b = 0; b < 3; ++b)
    for (Index h = 0; h < 2; ++h)
      CHECK(out2.out.slice(b, h) == out.out.slice(order[b], h));
}

TEST_CASE("sigmoid gates pass the finite-difference check") {
  const TileLayout layout(2, 4, 4, 2, 2, 2);
  std::mt19937_64 rng(81);
  const Index dim = 4, md = 7, heads = 2;
  auto hidden = AttnTensor<double>::randn(1, 1, layout.seq_len, md, rng);
  auto q = AttnTensor<double>::randn(1, heads, layout.seq_len, dim, rng);
  auto k = AttnTensor<double>::randn(1, heads, layout.seq_len, dim, rng);
  auto v = AttnTensor<double>::randn(1, heads, layout.seq_len, dim, rng);
  auto params = VsaParams<double>::random_init(md, heads, dim, layout.num_cubes, rng);
  params.activation = GateActivation::kSigmoid;
  params.gate_bias = randn_matrix<double>(1, 2 * heads * dim, rng, 0.2);

  const auto loss = [&] {
    const auto out = vsa_forward(layout, hidden, q, k, v, params);
    return 0.5 * out.out.flat().square().sum();
  };
  const auto out = vsa_forward(layout, hidden, q, k, v, params);
  AttnTensor<double> dout(1, heads, layout.seq_len, dim);
  dout.flat() = out.out.flat();
  const auto g = vsa_backward(layout, out, hidden, q, k, v, params, dout);

  double worst = 0;
  const auto check = [&](double* data, const double* analytic, Index n) {
    const auto fd = fd_gradient(data, n, 1e-5, loss);
    worst = std::max(worst, max_rel_err(analytic, fd.data(), n));
  };
  check(hidden.data(), g.dhidden.data(), hidden.size());
  check(params.gate_weight.data(), g.dgate_weight.data(), params.gate_weight.size());
  check(params.gate_bias.data(), g.dgate_bias.data(), params.gate_bias.size());
  CHECK(worst < 1e-6);
}

TEST_CASE("end-to-end gradcheck suite passes at 1e-5") {
  GradcheckSuiteOptions opt;
  opt.cases = 2;  // the full sweep runs in the acceptance suite
  const SuiteReport rep = run_gradcheck_suite(opt);
  for (const auto& line : rep.lines) {
    INFO(line.name, " err=", line.value);
    CHECK(line.pass);
  }
}

TEST_CASE("gradient conservation through mean pooling in the full operator") {
  auto p = make_problem<double>(1, 1, 4, 6, 82);
  std::mt19937_64 rng(83);
  const auto params = VsaParams<double>::random_init(6, 1, 4, 2, rng);
  const auto out = vsa_forward(p.layout, p.hidden, p.q, p.k, p.v, params);
  const auto dout = AttnTensor<double>::randn(1, 1, p.layout.seq_len, 4, rng);

  // coarse-path dV conservation: per-cube token sums equal Ac^T dOc
  AttnTensor<double> doc(1, 1, p.layout.seq_len, 4);
  doc.flat() = dout.flat() * out.gate_coarse.flat();
  const auto cg = coarse_backward(out.coarse, p.layout, doc, p.q, p.k, p.v);

  const Index b = p.layout.cube_size;
  MatrixX<double> doc_cube(p.layout.num_cubes, 4);
  for (Index c = 0; c < p.layout.num_cubes; ++c)
    doc_cube.row(c) = doc.slice(0, 0).middleRows(c * b, b).colwise().sum();
  const MatrixX<double> dvc = out.coarse.ac.slice(0, 0).transpose() * doc_cube;
  for (Index c = 0; c < p.layout.num_cubes; ++c) {
    const RowVectorX<double> token_sum =
        cg.dv.slice(0, 0).middleRows(c * b, b).colwise().sum();
    CHECK((token_sum - dvc.row(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
}
