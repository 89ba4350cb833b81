// SPDX-License-Identifier: Apache-2.0
#include "vsa/selection.hpp"

namespace vsa {

BlockSelection::BlockSelection(Index batch, Index heads, Index num_cubes, Index k)
    : batch_(batch), heads_(heads), num_cubes_(num_cubes), k_(k) {
  detail::require(batch >= 1 && heads >= 1 && num_cubes >= 1, "BlockSelection: bad shape");
  detail::require(k >= 1 && k <= num_cubes, "BlockSelection: k must be in [1, num_cubes]");
  idx_.assign(static_cast<std::size_t>(batch) * heads * num_cubes * k, 0);
}

BlockSelection BlockSelection::all_cubes(Index batch, Index heads, Index num_cubes) {
  BlockSelection sel(batch, heads, num_cubes, num_cubes);
  for (Index b = 0; b < batch; ++b)
    for (Index h = 0; h < heads; ++h)
      for (Index qc = 0; qc < num_cubes; ++qc) {
        auto r = sel.row(b, h, qc);
        for (Index c = 0; c < num_cubes; ++c) r[c] = static_cast<std::int32_t>(c);
      }
  return sel;
}

void BlockSelection::validate() const {
  detail::require(!idx_.empty(), "BlockSelection: empty selection");
  for (Index b = 0; b < batch_; ++b)
    for (Index h = 0; h < heads_; ++h)
      for (Index qc = 0; qc < num_cubes_; ++qc) {
        auto r = row(b, h, qc);
        std::int32_t prev = -1;
        for (std::int32_t c : r) {
          detail::require(c >= 0 && c < num_cubes_, "BlockSelection: cube index out of range");
          detail::require(c > prev, "BlockSelection: indices must be strictly ascending");
          prev = c;
        }
      }
}

BlockSelection broadcast_selection(const BlockSelection& sel, Index batch, Index heads) {
  detail::require(sel.batch() == 1 && sel.heads() == 1,
                  "broadcast_selection: source must be a (1, 1, ...) selection");
  BlockSelection out(batch, heads, sel.num_cubes(), sel.k());
  for (Index b = 0; b < batch; ++b)
    for (Index h = 0; h < heads; ++h)
      for (Index qc = 0; qc < sel.num_cubes(); ++qc) {
        auto src = sel.row(0, 0, qc);
        std::copy(src.begin(), src.end(), out.row(b, h, qc).begin());
      }
  return out;
}

BlockSelection random_selection(Index batch, Index heads, Index num_cubes, Index k,
                                std::mt19937_64& rng) {
  BlockSelection sel(batch, heads, num_cubes, k);
  std::vector<std::int32_t> pool(static_cast<std::size_t>(num_cubes));
  for (Index c = 0; c < num_cubes; ++c) pool[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(c);
  for (Index b = 0; b < batch; ++b)
    for (Index h = 0; h < heads; ++h)
      for (Index qc = 0; qc < num_cubes; ++qc) {
        // partial Fisher-Yates, then sort the chosen prefix
        for (Index i = 0; i < k; ++i) {
          std::uniform_int_distribution<Index> pick(i, num_cubes - 1);
          std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        auto r = sel.row(b, h, qc);
        std::copy(pool.begin(), pool.begin() + k, r.begin());
        std::sort(r.begin(), r.end());
      }
  return sel;
}

DenseMask selection_to_mask(const TileLayout& layout, const BlockSelection& sel,
                            Index batch_index) {
  detail::require(sel.num_cubes() == layout.num_cubes,
                  "selection_to_mask: selection does not match layout");
  const Index b = layout.cube_size;
  DenseMask mask(layout.seq_len, sel.heads());
  for (Index h = 0; h < sel.heads(); ++h) {
    auto& m = mask.head(h);
    for (Index qc = 0; qc < layout.num_cubes; ++qc)
      for (std::int32_t kc : sel.row(batch_index, h, qc))
        m.block(qc * b, kc * b, b, b).setConstant(true);
  }
  return mask;
}

}  // namespace vsa
