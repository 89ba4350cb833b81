// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "vsa/dense.hpp"
#include "vsa/layout.hpp"

namespace vsa {

// Per (batch, head, query cube): an ascending list of exactly k distinct key
// cube indices. This is the block-sparse attention mask in index form; each
// listed entry stands for one cube_size x cube_size tile of the full mask.
class BlockSelection {
 public:
  BlockSelection() = default;
  BlockSelection(Index batch, Index heads, Index num_cubes, Index k);

  // Every cube selected for every row (density 1).
  static BlockSelection all_cubes(Index batch, Index heads, Index num_cubes);

  Index batch() const { return batch_; }
  Index heads() const { return heads_; }
  Index num_cubes() const { return num_cubes_; }
  Index k() const { return k_; }
  bool empty() const { return idx_.empty(); }

  std::span<std::int32_t> row(Index b, Index h, Index qc) {
    return {idx_.data() + row_offset(b, h, qc), static_cast<std::size_t>(k_)};
  }
  std::span<const std::int32_t> row(Index b, Index h, Index qc) const {
    return {idx_.data() + row_offset(b, h, qc), static_cast<std::size_t>(k_)};
  }

  bool contains(Index b, Index h, Index qc, Index cube) const {
    auto r = row(b, h, qc);
    return std::binary_search(r.begin(), r.end(), static_cast<std::int32_t>(cube));
  }

  // Throws if any row is not strictly ascending, has the wrong length, or
  // holds an index outside [0, num_cubes).
  void validate() const;

 private:
  std::size_t row_offset(Index b, Index h, Index qc) const {
    detail::require(b >= 0 && b < batch_ && h >= 0 && h < heads_ && qc >= 0 && qc < num_cubes_,
                    "BlockSelection: row index out of range");
    return static_cast<std::size_t>(((b * heads_ + h) * num_cubes_ + qc) * k_);
  }

  Index batch_ = 0, heads_ = 0, num_cubes_ = 0, k_ = 0;
  std::vector<std::int32_t> idx_;
};

// Token-level mask equivalent of a selection for one batch element: each
// selected (query cube, key cube) pair expands into a cube_size x cube_size
// block of allowed entries. Reference semantics for oracle comparisons.
DenseMask selection_to_mask(const TileLayout& layout, const BlockSelection& sel,
                            Index batch_index);

// Replicates a (1, 1, ...) selection across batch and heads.
BlockSelection broadcast_selection(const BlockSelection& sel, Index batch, Index heads);

// Uniformly random selection: k distinct cubes per row, ascending.
BlockSelection random_selection(Index batch, Index heads, Index num_cubes, Index k,
                                std::mt19937_64& rng);

}  // namespace vsa
