// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"
#include "vsa/analysis.hpp"

using namespace vsa;

TEST_CASE("schedule_k follows the step-decay shape") {
  SparsitySchedule sched;  // 256 -> 32, warmup 50, -10 every 50
  CHECK(schedule_k(sched, 0) == 256);
  CHECK(schedule_k(sched, 49) == 256);
  CHECK(schedule_k(sched, 50) == 256);
  CHECK(schedule_k(sched, 100) == 246);
  CHECK(schedule_k(sched, 149) == 246);
  CHECK(schedule_k(sched, 1000000) == 32);

  SparsitySchedule flat;
  flat.k_start = flat.k_target = 64;
  for (Index s : {0, 10, 500}) CHECK(schedule_k(flat, s) == 64);
}

TEST_CASE("schedule_k is monotone non-increasing and reaches the target") {
  SparsitySchedule sched;
  sched.k_start = 200;
  sched.k_target = 17;
  sched.warmup_steps = 30;
  sched.interval_steps = 20;
  sched.decrement = 7;
  Index prev = sched.k_start;
  bool reached = false;
  for (Index s = 0; s < 2000; ++s) {
    const Index k = schedule_k(sched, s);
    CHECK(k <= prev);
    CHECK(k >= sched.k_target);
    prev = k;
    reached |= (k == sched.k_target);
  }
  CHECK(reached);
  CHECK_THROWS_AS(schedule_k(sched, -1), std::invalid_argument);
}

TEST_CASE("FLOP accounting: model term, density scaling, exact 8x reduction") {
  FlopsConfig cfg;
  cfg.n_params = 1e6;
  cfg.n_tokens = 1e3;
  cfg.seq_len = 16384;
  cfg.n_heads = 12;
  cfg.head_dim = 64;
  cfg.n_layers = 12;
  cfg.block_size = 64;
  cfg.density = sparsity_density(32, 64, 16384);
  CHECK(cfg.density == 0.125);

  const auto full = compute_flops(cfg, AttentionMode::kFull);
  const auto sparse = compute_flops(cfg, AttentionMode::kVsa);
  CHECK(full.model_flops == 6e9);
  CHECK(sparse.model_flops == 6e9);
  CHECK(full.attention_flops / sparse.attention_flops == 8.0);
  CHECK(sparse.attention_flops / full.attention_flops == cfg.density);
  CHECK(sparse.coarse_flops == full.attention_flops / (64.0 * 64.0));
  CHECK(sparse.total == sparse.model_flops + sparse.attention_flops + sparse.coarse_flops);

  const std::string json = sparse.to_json();
  CHECK(json.find("\"model_flops\"") != std::string::npos);
  CHECK(json.find("\"density\": 0.125") != std::string::npos);
}

TEST_CASE("selection accuracy: full coverage, uniform attention, random-selection mean") {
  const TileLayout layout(8, 8, 8, 2, 2, 2);  // 512 tokens, 64 cubes
  const Index k = 8;
  std::mt19937_64 rng(91);

  AttnTensor<double> uniform(1, 1, layout.seq_len, layout.num_cubes);
  uniform.flat().setConstant(1.0 / static_cast<double>(layout.num_cubes));

  const auto all = BlockSelection::all_cubes(1, 1, layout.num_cubes);
  CHECK(selection_accuracy(layout, uniform, all)(0, 0) == 1.0);

  const auto sel = random_selection(1, 1, layout.num_cubes, k, rng);
  CHECK(selection_accuracy(layout, uniform, sel)(0, 0) ==
        static_cast<double>(k) / static_cast<double>(layout.num_cubes));

  // non-uniform rows, selection drawn uniformly: the mean over trials
  // approaches k / num_cubes
  AttnTensor<double> probs(1, 1, layout.seq_len, layout.num_cubes);
  for (Index i = 0; i < layout.seq_len; ++i) {
    RowVectorX<double> row = randn_matrix<double>(1, layout.num_cubes, rng);
    row = (row.array() - row.maxCoeff()).exp();
    probs.slice(0, 0).row(i) = row / row.sum();
  }
  double mean = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const auto s = random_selection(1, 1, layout.num_cubes, k, rng);
    mean += selection_accuracy(layout, probs, s)(0, 0);
  }
  mean /= trials;
  CHECK(std::abs(mean - static_cast<double>(k) / static_cast<double>(layout.num_cubes)) < 0.01);
}

TEST_CASE("aggregating token probabilities to cubes preserves row mass") {
  const TileLayout layout(4, 4, 4, 2, 2, 2);
  std::mt19937_64 rng(92);
  AttnTensor<double> probs(1, 1, layout.seq_len, layout.seq_len);
  for (Index i = 0; i < layout.seq_len; ++i) {
    RowVectorX<double> row = randn_matrix<double>(1, layout.seq_len, rng);
    row = (row.array() - row.maxCoeff()).exp();
    probs.slice(0, 0).row(i) = row / row.sum();
  }
  const auto cube_probs = aggregate_probs_to_cubes(layout, probs);
  CHECK(cube_probs.dim() == layout.num_cubes);
  for (Index i = 0; i < layout.seq_len; ++i)
    CHECK(cube_probs.slice(0, 0).row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

namespace {

struct Coord {
  Index t, h, w;
};

Coord coord_of_tile_pos(const TileLayout& layout, Index pos) {
  const Index raster = layout.raster_of_tile()[pos];
  return {raster / (layout.tokens_h * layout.tokens_w),
          (raster / layout.tokens_w) % layout.tokens_h, raster % layout.tokens_w};
}

}  // namespace

TEST_CASE("fixed patterns: spatial rows, strided windows vs enumeration, degenerate window") {
  const TileLayout layout(4, 4, 4, 2, 2, 2);

  PatternSpec spatial{PatternKind::kSpatialTemporal, PatternPhase::kSpatial, 8, 2};
  const DenseMask sm = fixed_pattern_mask(layout, spatial);
  for (Index i = 0; i < layout.seq_len; ++i)
    CHECK(sm.for_head(0).row(i).cast<int>().sum() == layout.tokens_h * layout.tokens_w);

  PatternSpec temporal{PatternKind::kSpatialTemporal, PatternPhase::kTemporal, 8, 2};
  const DenseMask tm = fixed_pattern_mask(layout, temporal);
  for (Index i = 0; i < layout.seq_len; ++i)
    CHECK(tm.for_head(0).row(i).cast<int>().sum() == layout.tokens_t);

  // strided window, spatial phase, Wt = 2: same-frame plus same temporal
  // window, against an independent coordinate enumeration
  PatternSpec strided{PatternKind::kStridedWindow, PatternPhase::kSpatial, 8, 2};
  const DenseMask wm = fixed_pattern_mask(layout, strided);
  for (Index i = 0; i < layout.seq_len; ++i)
    for (Index j = 0; j < layout.seq_len; ++j) {
      const Coord a = coord_of_tile_pos(layout, i), b = coord_of_tile_pos(layout, j);
      const bool expected = (a.t == b.t) || (a.t / 2 == b.t / 2);
      CHECK(wm.for_head(0)(i, j) == expected);
    }

  // windows covering the whole grid degenerate to the all-true mask
  PatternSpec full{PatternKind::kStridedWindow, PatternPhase::kSpatial, 8, 4};
  const DenseMask fm = fixed_pattern_mask(layout, full);
  CHECK(fm.for_head(0).cast<int>().sum() == layout.seq_len * layout.seq_len);

  const DenseMask cm =
      fixed_pattern_mask(layout, {PatternKind::kCompressKv, PatternPhase::kSpatial, 8, 2});
  CHECK(cm.for_head(0).cast<int>().sum() == layout.seq_len * layout.seq_len);
}

TEST_CASE("cube-level pattern selections are valid and match the phase definition") {
  const TileLayout layout(4, 8, 8, 2, 2, 2);  // cubes: 2 x 4 x 4
  const auto spatial = fixed_pattern_selection(
      layout, {PatternKind::kSpatialTemporal, PatternPhase::kSpatial, 8, 2});
  spatial.validate();
  CHECK(spatial.k() == layout.cubes_h * layout.cubes_w);

  const auto temporal = fixed_pattern_selection(
      layout, {PatternKind::kSpatialTemporal, PatternPhase::kTemporal, 8, 2});
  CHECK(temporal.k() == layout.cubes_t);

  const auto compress =
      fixed_pattern_selection(layout, {PatternKind::kCompressKv, PatternPhase::kSpatial, 8, 2});
  CHECK(compress.k() == layout.num_cubes);

  // cube-misaligned window is rejected
  CHECK_THROWS_AS(fixed_pattern_selection(
                      layout, {PatternKind::kStridedWindow, PatternPhase::kSpatial, 8, 3}),
                  std::invalid_argument);
}
