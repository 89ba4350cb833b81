// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vsa/selection.hpp"

namespace vsa::io {

// Write-to-temp + rename, so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// num_cubes x num_cubes heatmap of one (batch, head) selection: selected
// cells filled. Plain hand-emitted SVG, diffable.
std::string selection_svg(const BlockSelection& sel, Index b, Index h);

// 0/1 matrix CSV of one (batch, head) selection, with a header row of key
// cube ids.
std::string selection_csv(const BlockSelection& sel, Index b, Index h);

}  // namespace vsa::io
