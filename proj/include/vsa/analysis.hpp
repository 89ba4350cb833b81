// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vsa/dense.hpp"
#include "vsa/layout.hpp"
#include "vsa/selection.hpp"

namespace vsa {

// Step-decay sparsity schedule: hold k_start for warmup_steps, then drop by
// `decrement` cubes every `interval_steps`, floored at k_target.
struct SparsitySchedule {
  Index k_start = 256;
  Index k_target = 32;
  Index warmup_steps = 50;
  Index interval_steps = 50;
  Index decrement = 10;

  void check() const {
    detail::require(k_start >= k_target && k_target >= 1,
                    "SparsitySchedule: need k_start >= k_target >= 1");
    detail::require(decrement >= 1 && interval_steps >= 1 && warmup_steps >= 0,
                    "SparsitySchedule: decrement and interval must be >= 1");
  }
};

// Attended-cube count at a given step; monotone non-increasing.
Index schedule_k(const SparsitySchedule& sched, Index step);

// Inputs of the FLOP accounting model: 6*N*D for the backbone plus
// 4*D*S*A*H*3.5*layers for attention, with the attention term scaled by the
// density for sparse attention. block_size sets the pooled length S/B of the
// coarse-stage term.
struct FlopsConfig {
  double n_params = 0;     // N
  double n_tokens = 0;     // D
  double seq_len = 0;      // S
  double n_heads = 0;      // A
  double head_dim = 0;     // H
  double n_layers = 0;
  double density = 1.0;    // K*B/L
  double block_size = 64;  // B

  void check() const {
    detail::require(n_params > 0 && n_tokens > 0 && seq_len > 0 && n_heads > 0 &&
                        head_dim > 0 && n_layers > 0 && block_size > 0,
                    "FlopsConfig: all quantities must be positive");
    detail::require(density > 0 && density <= 1.0, "FlopsConfig: density must be in (0, 1]");
  }
};

enum class AttentionMode { kFull, kVsa };

struct FlopsReport {
  double model_flops = 0;
  double attention_flops = 0;
  double coarse_flops = 0;
  double total = 0;
  double density = 1.0;

  std::string to_json() const;  // keys in a stable order
};

FlopsReport compute_flops(const FlopsConfig& cfg, AttentionMode mode);

// Density K*B/L of a block-sparse selection.
inline double sparsity_density(Index k, Index block, Index seq_len) {
  return static_cast<double>(k) * static_cast<double>(block) / static_cast<double>(seq_len);
}

// Fixed-pattern baselines, produced as masks or cube-level selections.
// SpatialTemporal alternates between a spatial phase (same frame) and a
// temporal phase (same spatial location); StridedWindow widens each phase to
// aligned windows of window_t frames / window_s x window_s positions;
// CompressKv attends everything (its pooling lives outside the mask).
enum class PatternKind { kSpatialTemporal, kStridedWindow, kCompressKv };
enum class PatternPhase { kSpatial, kTemporal };

struct PatternSpec {
  PatternKind kind = PatternKind::kSpatialTemporal;
  PatternPhase phase = PatternPhase::kSpatial;
  Index window_s = 8;
  Index window_t = 2;
};

// Token-level connectivity of the pattern, in tile order.
DenseMask fixed_pattern_mask(const TileLayout& layout, const PatternSpec& spec);

// The same connectivity at cube granularity, usable by the fine stage.
// Requires the pattern's windows to be cube-aligned so every row selects the
// same number of cubes.
BlockSelection fixed_pattern_selection(const TileLayout& layout, const PatternSpec& spec);

// Fraction of true attention mass captured by a selection. `probs_cube` holds
// dense attention rows aggregated to cube granularity, [batch, heads, seq,
// num_cubes], each row summing to 1; the result averages the captured mass
// over query tokens, per (batch, head).
template <typename Scalar>
MatrixX<double> selection_accuracy(const TileLayout& layout,
                                   const AttnTensor<Scalar>& probs_cube,
                                   const BlockSelection& sel) {
  detail::require(probs_cube.seq() == layout.seq_len && probs_cube.dim() == layout.num_cubes,
                  "selection_accuracy: probabilities do not match layout");
  detail::require(sel.batch() == probs_cube.batch() && sel.heads() == probs_cube.heads() &&
                      sel.num_cubes() == layout.num_cubes,
                  "selection_accuracy: selection does not match shapes");
  const Index cube = layout.cube_size;
  MatrixX<double> acc(probs_cube.batch(), probs_cube.heads());
  for (Index b = 0; b < probs_cube.batch(); ++b)
    for (Index h = 0; h < probs_cube.heads(); ++h) {
      auto pm = probs_cube.slice(b, h);
      double sum = 0;
      for (Index i = 0; i < layout.seq_len; ++i) {
        double captured = 0;
        for (std::int32_t c : sel.row(b, h, i / cube)) captured += pm(i, c);
        sum += captured;
      }
      acc(b, h) = sum / static_cast<double>(layout.seq_len);
    }
  return acc;
}

// Aggregates token-level attention probabilities [.., seq, seq] (tile order)
// to cube granularity [.., seq, num_cubes].
template <typename Scalar>
AttnTensor<Scalar> aggregate_probs_to_cubes(const TileLayout& layout,
                                            const AttnTensor<Scalar>& probs_token) {
  detail::require(probs_token.seq() == layout.seq_len && probs_token.dim() == layout.seq_len,
                  "aggregate_probs_to_cubes: expected [.., seq, seq] probabilities");
  const Index cube = layout.cube_size;
  AttnTensor<Scalar> out(probs_token.batch(), probs_token.heads(), layout.seq_len,
                         layout.num_cubes);
  for (Index b = 0; b < probs_token.batch(); ++b)
    for (Index h = 0; h < probs_token.heads(); ++h) {
      auto src = probs_token.slice(b, h);
      auto dst = out.slice(b, h);
      for (Index c = 0; c < layout.num_cubes; ++c)
        dst.col(c) = src.middleCols(c * cube, cube).rowwise().sum();
    }
  return out;
}

}  // namespace vsa
