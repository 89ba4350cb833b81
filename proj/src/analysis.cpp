// SPDX-License-Identifier: Apache-2.0
#include "vsa/analysis.hpp"

#include <sstream>

namespace vsa {

Index schedule_k(const SparsitySchedule& sched, Index step) {
  sched.check();
  detail::require(step >= 0, "schedule_k: step must be >= 0");
  if (step < sched.warmup_steps) return sched.k_start;
  const Index drops = (step - sched.warmup_steps) / sched.interval_steps;
  return std::max(sched.k_target, sched.k_start - sched.decrement * drops);
}

FlopsReport compute_flops(const FlopsConfig& cfg, AttentionMode mode) {
  cfg.check();
  FlopsReport r;
  r.model_flops = 6.0 * cfg.n_params * cfg.n_tokens;
  const double full_attention =
      4.0 * cfg.n_tokens * cfg.seq_len * cfg.n_heads * cfg.head_dim * 3.5 * cfg.n_layers;
  if (mode == AttentionMode::kFull) {
    r.attention_flops = full_attention;
    r.coarse_flops = 0.0;
    r.density = 1.0;
  } else {
    r.attention_flops = full_attention * cfg.density;
    // pooled sequence: both token count and attended length shrink by B
    r.coarse_flops = full_attention / (cfg.block_size * cfg.block_size);
    r.density = cfg.density;
  }
  r.total = r.model_flops + r.attention_flops + r.coarse_flops;
  return r;
}

std::string FlopsReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"model_flops\": " << model_flops << ", \"attention_flops\": " << attention_flops
     << ", \"coarse_flops\": " << coarse_flops << ", \"total\": " << total
     << ", \"density\": " << density << "}";
  return os.str();
}

namespace {

struct TokenCoord {
  Index t, h, w;
};

std::vector<TokenCoord> coords_in_tile_order(const TileLayout& layout) {
  std::vector<TokenCoord> coords(static_cast<std::size_t>(layout.seq_len));
  for (Index t = 0; t < layout.tokens_t; ++t)
    for (Index h = 0; h < layout.tokens_h; ++h)
      for (Index w = 0; w < layout.tokens_w; ++w)
        coords[static_cast<std::size_t>(flatten_index(layout, t, h, w))] = {t, h, w};
  return coords;
}

bool pattern_allows(const PatternSpec& spec, const TokenCoord& a, const TokenCoord& b) {
  switch (spec.kind) {
    case PatternKind::kSpatialTemporal:
      if (spec.phase == PatternPhase::kSpatial) return a.t == b.t;
      return a.h == b.h && a.w == b.w;
    case PatternKind::kStridedWindow:
      // spatial phase: same frame widened to an aligned temporal window;
      // temporal phase: same location widened to an aligned spatial window
      if (spec.phase == PatternPhase::kSpatial)
        return a.t / spec.window_t == b.t / spec.window_t;
      return a.h / spec.window_s == b.h / spec.window_s &&
             a.w / spec.window_s == b.w / spec.window_s;
    case PatternKind::kCompressKv:
      return true;
  }
  return false;
}

void check_windows(const TileLayout& layout, const PatternSpec& spec) {
  if (spec.kind != PatternKind::kStridedWindow) return;
  detail::require(spec.window_t >= 1 && spec.window_s >= 1,
                  "fixed pattern: window sizes must be >= 1");
  (void)layout;
}

}  // namespace

DenseMask fixed_pattern_mask(const TileLayout& layout, const PatternSpec& spec) {
  check_windows(layout, spec);
  const auto coords = coords_in_tile_order(layout);
  DenseMask mask(layout.seq_len);
  auto& m = mask.head(0);
  for (Index i = 0; i < layout.seq_len; ++i)
    for (Index j = 0; j < layout.seq_len; ++j)
      m(i, j) = pattern_allows(spec, coords[static_cast<std::size_t>(i)],
                               coords[static_cast<std::size_t>(j)]);
  return mask;
}

BlockSelection fixed_pattern_selection(const TileLayout& layout, const PatternSpec& spec) {
  check_windows(layout, spec);
  if (spec.kind == PatternKind::kStridedWindow) {
    // cube-aligned windows keep the per-row count constant
    if (spec.phase == PatternPhase::kSpatial)
      detail::require(spec.window_t % layout.cube_t == 0 &&
                          layout.tokens_t % spec.window_t == 0,
                      "fixed pattern: temporal window must be cube-aligned");
    else
      detail::require(spec.window_s % layout.cube_h == 0 && spec.window_s % layout.cube_w == 0 &&
                          layout.tokens_h % spec.window_s == 0 &&
                          layout.tokens_w % spec.window_s == 0,
                      "fixed pattern: spatial window must be cube-aligned");
  }

  // connectivity between cube representatives (cube-aligned patterns make any
  // token of the cube an equivalent representative)
  auto cube_coord = [&](Index c) {
    const Index ct = c / (layout.cubes_h * layout.cubes_w);
    const Index ch = (c / layout.cubes_w) % layout.cubes_h;
    const Index cw = c % layout.cubes_w;
    return TokenCoord{ct * layout.cube_t, ch * layout.cube_h, cw * layout.cube_w};
  };

  // cube-level phase test: same cube-t index for spatial, same (cube-h,
  // cube-w) for temporal
  auto allows = [&](Index qc, Index kc) {
    const TokenCoord a = cube_coord(qc), b = cube_coord(kc);
    if (spec.kind == PatternKind::kSpatialTemporal) {
      if (spec.phase == PatternPhase::kSpatial) return a.t / layout.cube_t == b.t / layout.cube_t;
      return a.h / layout.cube_h == b.h / layout.cube_h &&
             a.w / layout.cube_w == b.w / layout.cube_w;
    }
    return pattern_allows(spec, a, b);
  };

  std::vector<std::vector<std::int32_t>> rows(static_cast<std::size_t>(layout.num_cubes));
  std::size_t row_len = 0;
  for (Index qc = 0; qc < layout.num_cubes; ++qc) {
    for (Index kc = 0; kc < layout.num_cubes; ++kc)
      if (allows(qc, kc)) rows[static_cast<std::size_t>(qc)].push_back(static_cast<std::int32_t>(kc));
    if (qc == 0) row_len = rows[0].size();
    detail::require(rows[static_cast<std::size_t>(qc)].size() == row_len,
                    "fixed pattern: window sizes give uneven selection rows");
  }
  detail::require(row_len >= 1, "fixed pattern: empty selection row");

  BlockSelection sel(1, 1, layout.num_cubes, static_cast<Index>(row_len));
  for (Index qc = 0; qc < layout.num_cubes; ++qc) {
    auto dst = sel.row(0, 0, qc);
    std::copy(rows[static_cast<std::size_t>(qc)].begin(), rows[static_cast<std::size_t>(qc)].end(),
              dst.begin());
  }
  sel.validate();
  return sel;
}

}  // namespace vsa
