// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "vsa/analysis.hpp"
#include "vsa/vsa.hpp"

namespace vsa {

// Synthetic planted-cube retrieval task. Every sample plants `planted_count`
// cubes whose tokens carry a shared key signature; values are i.i.d. noise.
// The target for each query token is the mean value over planted tokens plus
// the token's own value, so low error requires finding the planted cubes and
// retrieving the token itself.
struct PlantedTask {
  TileLayout layout;
  Index planted_count = 4;
  Index heads = 2;
  Index head_dim = 8;
  double signal_scale = 2.0;
  double noise_scale = 0.5;
  std::uint64_t seed = 0;

  // [key signature per head | value per head | constant 1]
  Index model_dim() const { return 2 * heads * head_dim + 1; }

  void check() const {
    detail::require(planted_count >= 1 && planted_count <= layout.num_cubes,
                    "PlantedTask: planted_count must be in [1, num_cubes]");
    detail::require(heads >= 1 && head_dim >= 1, "PlantedTask: bad head config");
  }
};

template <typename Scalar>
struct ToyBatch {
  AttnTensor<Scalar> hidden;  // [batch, 1, seq, model_dim]
  AttnTensor<Scalar> q, k, v; // generator reference tensors [batch, heads, seq, head_dim]
  AttnTensor<Scalar> target;  // [batch, heads, seq, head_dim]
  std::vector<std::vector<std::int32_t>> planted;  // ascending cube ids per sample
};

// Deterministic under (task.seed, seed): the task seed fixes the shared key
// signature, the batch seed fixes planted positions and noise.
template <typename Scalar>
ToyBatch<Scalar> generate_batch(const PlantedTask& task, Index batch_size, std::uint64_t seed) {
  task.check();
  detail::require(batch_size >= 1, "generate_batch: batch_size must be >= 1");
  const Index seq = task.layout.seq_len, nc = task.layout.num_cubes;
  const Index heads = task.heads, dim = task.head_dim, cube = task.layout.cube_size;

  std::mt19937_64 sig_rng(task.seed);
  const MatrixX<Scalar> signature = randn_matrix<Scalar>(heads, dim, sig_rng);  // one row per head

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ToyBatch<Scalar> out;
  out.hidden = AttnTensor<Scalar>(batch_size, 1, seq, task.model_dim());
  out.q = AttnTensor<Scalar>(batch_size, heads, seq, dim);
  out.k = AttnTensor<Scalar>(batch_size, heads, seq, dim);
  out.v = AttnTensor<Scalar>(batch_size, heads, seq, dim);
  out.target = AttnTensor<Scalar>(batch_size, heads, seq, dim);
  out.planted.resize(static_cast<std::size_t>(batch_size));

  std::vector<std::int32_t> pool(static_cast<std::size_t>(nc));
  for (Index b = 0; b < batch_size; ++b) {
    for (Index c = 0; c < nc; ++c) pool[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(c);
    for (Index i = 0; i < task.planted_count; ++i) {
      std::uniform_int_distribution<Index> pick(i, nc - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    auto& planted = out.planted[static_cast<std::size_t>(b)];
    planted.assign(pool.begin(), pool.begin() + task.planted_count);
    std::sort(planted.begin(), planted.end());

    auto hid = out.hidden.slice(b, 0);
    for (Index i = 0; i < seq; ++i) {
      const bool is_planted =
          std::binary_search(planted.begin(), planted.end(), static_cast<std::int32_t>(i / cube));
      for (Index h = 0; h < heads; ++h) {
        for (Index j = 0; j < dim; ++j) {
          Scalar key = static_cast<Scalar>(task.noise_scale * gauss(rng));
          if (is_planted) key += static_cast<Scalar>(task.signal_scale) * signature(h, j);
          out.k.slice(b, h)(i, j) = key;
          hid(i, h * dim + j) = key;
        }
        for (Index j = 0; j < dim; ++j) {
          const Scalar val = static_cast<Scalar>(gauss(rng));
          out.v.slice(b, h)(i, j) = val;
          hid(i, (heads + h) * dim + j) = val;
        }
        // reference query: the shared signature plus a self-retrieval term
        out.q.slice(b, h).row(i) =
            signature.row(h) + Scalar(0.5) * out.k.slice(b, h).row(i);
      }
      hid(i, 2 * heads * dim) = Scalar(1);
    }

    // target: mean of planted-token values plus the token's own value
    for (Index h = 0; h < heads; ++h) {
      RowVectorX<Scalar> planted_mean = RowVectorX<Scalar>::Zero(dim);
      for (std::int32_t c : planted)
        planted_mean += out.v.slice(b, h).middleRows(static_cast<Index>(c) * cube, cube).colwise().sum();
      planted_mean /= static_cast<Scalar>(task.planted_count * cube);
      out.target.slice(b, h) = out.v.slice(b, h).rowwise() + planted_mean;
    }
  }
  return out;
}

enum class SelectionPolicy { kLearned, kFixedRandom, kFixedPattern };

struct OptimizerSettings {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

struct ToyTrainConfig {
  Index batch_size = 4;
  Index steps = 5000;
  Index top_k = 8;
  PoolMode pool = PoolMode::kMean;
  GateActivation activation = GateActivation::kIdentity;
  std::optional<SparsitySchedule> schedule;  // overrides top_k per step when set
  OptimizerSettings optimizer;
  SelectionPolicy policy = SelectionPolicy::kLearned;
  PatternSpec pattern;  // used by kFixedPattern
  std::uint64_t seed = 1;
};

struct TrainStep {
  Index step = 0;
  double loss = 0;
  double recall = 0;
  Index k = 0;
};

// One VSA layer with learnable Wq, Wk, Wv and the gate projection.
template <typename Scalar>
struct ToyModel {
  MatrixX<Scalar> wq, wk, wv;  // [model_dim, heads*head_dim]
  VsaParams<Scalar> params;
};

template <typename Scalar>
struct TrainReport {
  std::vector<TrainStep> steps;
  ToyModel<Scalar> model;
  std::string snapshot_id;
  bool diverged = false;

  double final_loss(Index window = 50) const { return mean_tail(&TrainStep::loss, window); }
  double final_recall(Index window = 50) const { return mean_tail(&TrainStep::recall, window); }

 private:
  double mean_tail(double TrainStep::* field, Index window) const {
    if (steps.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto n = std::min<std::size_t>(steps.size(), static_cast<std::size_t>(window));
    double s = 0;
    for (std::size_t i = steps.size() - n; i < steps.size(); ++i) s += steps[i].*field;
    return s / static_cast<double>(n);
  }
};

namespace detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename Scalar>
struct AdamState {
  MatrixX<Scalar> m, v;
  explicit AdamState(const MatrixX<Scalar>& like)
      : m(MatrixX<Scalar>::Zero(like.rows(), like.cols())),
        v(MatrixX<Scalar>::Zero(like.rows(), like.cols())) {}
};

template <typename Scalar>
void apply_update(MatrixX<Scalar>& w, const MatrixX<Scalar>& grad, AdamState<Scalar>& st,
                  const OptimizerSettings& opt, Index t) {
  if (opt.kind == OptimizerSettings::Kind::kSgd) {
    w -= static_cast<Scalar>(opt.lr) * grad;
    return;
  }
  const auto b1 = static_cast<Scalar>(opt.beta1), b2 = static_cast<Scalar>(opt.beta2);
  st.m = b1 * st.m + (Scalar(1) - b1) * grad;
  st.v = (b2 * st.v.array() + (Scalar(1) - b2) * grad.array().square()).matrix();
  const Scalar bc1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t));
  const Scalar bc2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t));
  w.array() -= static_cast<Scalar>(opt.lr) * (st.m.array() / bc1) /
               ((st.v.array() / bc2).sqrt() + static_cast<Scalar>(opt.eps));
}

// fraction of each sample's planted cubes present in the used selection,
// averaged over (sample, head, query cube)
inline double planted_recall(const BlockSelection& sel,
                             const std::vector<std::vector<std::int32_t>>& planted) {
  double total = 0;
  std::size_t rows = 0;
  for (Index b = 0; b < sel.batch(); ++b) {
    const auto& p = planted[static_cast<std::size_t>(b)];
    for (Index h = 0; h < sel.heads(); ++h)
      for (Index qc = 0; qc < sel.num_cubes(); ++qc) {
        Index hit = 0;
        for (std::int32_t c : p)
          if (sel.contains(b, h, qc, c)) ++hit;
        total += static_cast<double>(hit) / static_cast<double>(p.size());
        ++rows;
      }
  }
  return total / static_cast<double>(rows);
}

}  // namespace detail

// Trains the single-layer model on one generated batch (full-batch steps)
// with the MSE loss |O - target|^2 / n. Honors the sparsity schedule, logs
// loss / planted-cube recall / k per step, and aborts on divergence. All
// gradients come from vsa_backward plus the linear projections' chain rule.
template <typename Scalar>
TrainReport<Scalar> train_toy(const PlantedTask& task, const ToyTrainConfig& cfg) {
  task.check();
  if (cfg.schedule) cfg.schedule->check();
  const Index heads = task.heads, dim = task.head_dim, md = task.model_dim();
  const Index proj_cols = heads * dim;
  const TileLayout& layout = task.layout;

  std::mt19937_64 rng(cfg.seed);
  TrainReport<Scalar> rep;
  rep.model.wq = randn_matrix<Scalar>(md, proj_cols, rng, 1.0 / std::sqrt(double(md)));
  rep.model.wk = randn_matrix<Scalar>(md, proj_cols, rng, 1.0 / std::sqrt(double(md)));
  rep.model.wv = randn_matrix<Scalar>(md, proj_cols, rng, 1.0 / std::sqrt(double(md)));
  rep.model.params.gate_weight = MatrixX<Scalar>::Zero(md, 2 * proj_cols);
  // start as a pass-through: fine gate 1, coarse gate 0, via the constant channel
  rep.model.params.gate_weight.row(md - 1).segment(proj_cols, proj_cols).setConstant(Scalar(1));
  rep.model.params.top_k = cfg.top_k;
  rep.model.params.pool = cfg.pool;
  rep.model.params.activation = cfg.activation;

  const ToyBatch<Scalar> data = generate_batch<Scalar>(task, cfg.batch_size, cfg.seed + 0x9e3779b9ull);

  // fixed controls draw their selection once, before training
  std::optional<BlockSelection> fixed_sel;
  if (cfg.policy == SelectionPolicy::kFixedRandom)
    fixed_sel = random_selection(cfg.batch_size, heads, layout.num_cubes, cfg.top_k, rng);

  detail::AdamState<Scalar> sq(rep.model.wq), sk(rep.model.wk), sv(rep.model.wv),
      sg(rep.model.params.gate_weight);

  AttnTensor<Scalar> q(cfg.batch_size, heads, layout.seq_len, dim);
  AttnTensor<Scalar> k(cfg.batch_size, heads, layout.seq_len, dim);
  AttnTensor<Scalar> v(cfg.batch_size, heads, layout.seq_len, dim);
  const double inv_n = 1.0 / static_cast<double>(q.size());

  MatrixX<Scalar> dwq(md, proj_cols), dwk(md, proj_cols), dwv(md, proj_cols);
  MatrixX<Scalar> packed(layout.seq_len, proj_cols);

  for (Index step = 0; step < cfg.steps; ++step) {
    Index k_step = cfg.schedule ? schedule_k(*cfg.schedule, step) : cfg.top_k;
    k_step = std::clamp<Index>(k_step, 1, layout.num_cubes);
    rep.model.params.top_k = k_step;

    // pattern controls may alternate phases across steps, mirroring the
    // alternating-layer architectures they stand in for
    std::optional<BlockSelection> pattern_sel;
    if (cfg.policy == SelectionPolicy::kFixedPattern) {
      PatternSpec spec = cfg.pattern;
      if (spec.kind == PatternKind::kSpatialTemporal)
        spec.phase = (step % 2 == 0) ? PatternPhase::kSpatial : PatternPhase::kTemporal;
      pattern_sel = broadcast_selection(fixed_pattern_selection(layout, spec),
                                        cfg.batch_size, heads);
    }
    const BlockSelection* sel_override = nullptr;
    if (cfg.policy == SelectionPolicy::kFixedRandom) sel_override = &*fixed_sel;
    if (cfg.policy == SelectionPolicy::kFixedPattern) sel_override = &*pattern_sel;

    for (Index b = 0; b < cfg.batch_size; ++b) {
      auto hid = data.hidden.slice(b, 0);
      packed.noalias() = hid * rep.model.wq;
      for (Index h = 0; h < heads; ++h) q.slice(b, h) = packed.middleCols(h * dim, dim);
      packed.noalias() = hid * rep.model.wk;
      for (Index h = 0; h < heads; ++h) k.slice(b, h) = packed.middleCols(h * dim, dim);
      packed.noalias() = hid * rep.model.wv;
      for (Index h = 0; h < heads; ++h) v.slice(b, h) = packed.middleCols(h * dim, dim);
    }

    VsaOutput<Scalar> out =
        vsa_forward(layout, data.hidden, q, k, v, rep.model.params, sel_override);

    AttnTensor<Scalar> dout(cfg.batch_size, heads, layout.seq_len, dim);
    dout.flat() = out.out.flat() - data.target.flat();
    const double loss = static_cast<double>(dout.flat().square().sum()) * inv_n;
    dout.flat() *= static_cast<Scalar>(2.0 * inv_n);

    rep.steps.push_back({step, loss, detail::planted_recall(out.fine_sel, data.planted), k_step});
    if (!std::isfinite(loss)) {
      rep.diverged = true;
      break;
    }

    VsaGrads<Scalar> g =
        vsa_backward(layout, out, data.hidden, q, k, v, rep.model.params, dout);

    dwq.setZero();
    dwk.setZero();
    dwv.setZero();
    for (Index b = 0; b < cfg.batch_size; ++b) {
      auto hid = data.hidden.slice(b, 0);
      for (Index h = 0; h < heads; ++h) packed.middleCols(h * dim, dim) = g.dq.slice(b, h);
      dwq.noalias() += hid.transpose() * packed;
      for (Index h = 0; h < heads; ++h) packed.middleCols(h * dim, dim) = g.dk.slice(b, h);
      dwk.noalias() += hid.transpose() * packed;
      for (Index h = 0; h < heads; ++h) packed.middleCols(h * dim, dim) = g.dv.slice(b, h);
      dwv.noalias() += hid.transpose() * packed;
    }

    detail::apply_update(rep.model.wq, dwq, sq, cfg.optimizer, step + 1);
    detail::apply_update(rep.model.wk, dwk, sk, cfg.optimizer, step + 1);
    detail::apply_update(rep.model.wv, dwv, sv, cfg.optimizer, step + 1);
    detail::apply_update(rep.model.params.gate_weight, g.dgate_weight, sg, cfg.optimizer,
                         step + 1);
  }

  std::uint64_t hash = detail::fnv1a64(rep.model.wq.data(), sizeof(Scalar) * rep.model.wq.size());
  hash = detail::fnv1a64(rep.model.wk.data(), sizeof(Scalar) * rep.model.wk.size(), hash);
  hash = detail::fnv1a64(rep.model.wv.data(), sizeof(Scalar) * rep.model.wv.size(), hash);
  hash = detail::fnv1a64(rep.model.params.gate_weight.data(),
                         sizeof(Scalar) * rep.model.params.gate_weight.size(), hash);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  rep.snapshot_id = buf;
  return rep;
}

}  // namespace vsa
