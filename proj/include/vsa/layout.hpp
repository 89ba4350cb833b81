// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vsa/tensor.hpp"

namespace vsa {

// Cube tiling of a 3D video-latent token grid. Token extents must be integer
// multiples of the cube extents; anything else is rejected at construction.
// The two permutations between raster order (t-major scan of the grid) and
// tile order (all tokens of a cube contiguous) are built once and cached.
class TileLayout {
 public:
  TileLayout(Index tokens_t, Index tokens_h, Index tokens_w,
             Index cube_t, Index cube_h, Index cube_w);

  Index tokens_t = 0, tokens_h = 0, tokens_w = 0;  // token extents per axis
  Index cube_t = 0, cube_h = 0, cube_w = 0;        // cube extents per axis
  Index cubes_t = 0, cubes_h = 0, cubes_w = 0;     // cube counts per axis
  Index cube_size = 0;   // tokens per cube (B); equals the attention tile size
  Index seq_len = 0;     // total tokens (L)
  Index num_cubes = 0;   // seq_len / cube_size

  // tile position of each raster position, and its inverse
  const std::vector<Index>& tile_of_raster() const { return tile_of_raster_; }
  const std::vector<Index>& raster_of_tile() const { return raster_of_tile_; }

 private:
  std::vector<Index> tile_of_raster_;
  std::vector<Index> raster_of_tile_;
};

// Raster scan position, t-major.
Index raster_index(const TileLayout& layout, Index t, Index h, Index w);

// Tile-order position: cube rank * cube_size + offset within the cube.
// Bijective over [0, seq_len). Coordinates outside the grid are an error.
Index flatten_index(const TileLayout& layout, Index t, Index h, Index w);

// Permute the sequence axis from raster order to tile order.
template <typename Scalar>
AttnTensor<Scalar> tile(const TileLayout& layout, const AttnTensor<Scalar>& x) {
  detail::require(x.seq() == layout.seq_len, "tile: sequence length does not match layout");
  const auto& perm = layout.tile_of_raster();
  AttnTensor<Scalar> out(x.batch(), x.heads(), x.seq(), x.dim());
  for (Index b = 0; b < x.batch(); ++b)
    for (Index h = 0; h < x.heads(); ++h) {
      auto src = x.slice(b, h);
      auto dst = out.slice(b, h);
      for (Index r = 0; r < x.seq(); ++r) dst.row(perm[r]) = src.row(r);
    }
  return out;
}

// Inverse permutation of tile().
template <typename Scalar>
AttnTensor<Scalar> untile(const TileLayout& layout, const AttnTensor<Scalar>& x) {
  detail::require(x.seq() == layout.seq_len, "untile: sequence length does not match layout");
  const auto& perm = layout.tile_of_raster();
  AttnTensor<Scalar> out(x.batch(), x.heads(), x.seq(), x.dim());
  for (Index b = 0; b < x.batch(); ++b)
    for (Index h = 0; h < x.heads(); ++h) {
      auto src = x.slice(b, h);
      auto dst = out.slice(b, h);
      for (Index r = 0; r < x.seq(); ++r) dst.row(r) = src.row(perm[r]);
    }
  return out;
}

}  // namespace vsa
