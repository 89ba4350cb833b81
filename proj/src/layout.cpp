// SPDX-License-Identifier: Apache-2.0
#include "vsa/layout.hpp"

namespace vsa {

TileLayout::TileLayout(Index t, Index h, Index w, Index ct, Index ch, Index cw)
    : tokens_t(t), tokens_h(h), tokens_w(w), cube_t(ct), cube_h(ch), cube_w(cw) {
  detail::require(t >= 1 && h >= 1 && w >= 1, "TileLayout: token extents must be >= 1");
  detail::require(ct >= 1 && ch >= 1 && cw >= 1, "TileLayout: cube extents must be >= 1");
  detail::require(t % ct == 0 && h % ch == 0 && w % cw == 0,
                  "TileLayout: token extents must be integer multiples of cube extents");
  cubes_t = t / ct;
  cubes_h = h / ch;
  cubes_w = w / cw;
  cube_size = ct * ch * cw;
  seq_len = t * h * w;
  num_cubes = seq_len / cube_size;

  tile_of_raster_.resize(seq_len);
  raster_of_tile_.resize(seq_len);
  for (Index it = 0; it < t; ++it)
    for (Index ih = 0; ih < h; ++ih)
      for (Index iw = 0; iw < w; ++iw) {
        const Index cube = (it / ct) * cubes_h * cubes_w + (ih / ch) * cubes_w + (iw / cw);
        const Index offset = (it % ct) * ch * cw + (ih % ch) * cw + (iw % cw);
        const Index tile_pos = cube * cube_size + offset;
        const Index raster_pos = (it * h + ih) * w + iw;
        tile_of_raster_[raster_pos] = tile_pos;
        raster_of_tile_[tile_pos] = raster_pos;
      }
}

Index raster_index(const TileLayout& layout, Index t, Index h, Index w) {
  detail::require(t >= 0 && t < layout.tokens_t && h >= 0 && h < layout.tokens_h &&
                      w >= 0 && w < layout.tokens_w,
                  "raster_index: coordinate out of range");
  return (t * layout.tokens_h + h) * layout.tokens_w + w;
}

Index flatten_index(const TileLayout& layout, Index t, Index h, Index w) {
  return layout.tile_of_raster()[raster_index(layout, t, h, w)];
}

}  // namespace vsa
