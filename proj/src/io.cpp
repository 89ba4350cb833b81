// SPDX-License-Identifier: Apache-2.0
#include "vsa/io.hpp"

#include <fstream>
#include <sstream>

namespace vsa::io {

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string selection_svg(const BlockSelection& sel, Index b, Index h) {
  const Index nc = sel.num_cubes();
  const int cell = nc <= 64 ? 8 : (nc <= 256 ? 3 : 1);
  const int side = static_cast<int>(nc) * cell;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side
     << "\" viewBox=\"0 0 " << side << " " << side << "\">\n";
  os << "<rect width=\"" << side << "\" height=\"" << side << "\" fill=\"#f4f4f4\"/>\n";
  for (Index qc = 0; qc < nc; ++qc)
    for (std::int32_t kc : sel.row(b, h, qc))
      os << "<rect x=\"" << kc * cell << "\" y=\"" << qc * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"#1f4e8c\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string selection_csv(const BlockSelection& sel, Index b, Index h) {
  const Index nc = sel.num_cubes();
  std::ostringstream os;
  os << "query_cube";
  for (Index c = 0; c < nc; ++c) os << ",k" << c;
  os << "\n";
  for (Index qc = 0; qc < nc; ++qc) {
    os << qc;
    auto row = sel.row(b, h, qc);
    std::size_t next = 0;
    for (Index c = 0; c < nc; ++c) {
      const bool hit = next < row.size() && row[next] == static_cast<std::int32_t>(c);
      if (hit) ++next;
      os << "," << (hit ? 1 : 0);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace vsa::io
