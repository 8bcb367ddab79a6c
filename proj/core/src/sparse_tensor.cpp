#include "fpc/sparse_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fpc/error.hpp"

namespace fpc {

namespace {
std::string coord_str(const Coord& c) {
  return "(" + std::to_string(c.u) + "," + std::to_string(c.v) + "," + std::to_string(c.w) + ")";
}
}  // namespace

SparseVoxelTensor::SparseVoxelTensor(std::vector<Coord> coords, Matrix attrs, Grid grid)
    : coords_(std::move(coords)), attrs_(std::move(attrs)), grid_(grid) {
  if (grid_.l <= 0 || grid_.w <= 0 || grid_.h <= 0)
    throw InvariantError("sparse tensor: grid extents must be positive");
  if (attrs_.rows() != coords_.size())
    throw InvariantError("sparse tensor: " + std::to_string(attrs_.rows()) + " attribute rows for " +
                         std::to_string(coords_.size()) + " coordinates");
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!grid_.contains(coords_[i]))
      throw InvariantError("sparse tensor: coordinate " + coord_str(coords_[i]) + " outside grid");
    if (i > 0 && !(coords_[i - 1] < coords_[i]))
      throw InvariantError("sparse tensor: coordinates not strictly increasing at " +
                           coord_str(coords_[i]));
  }
}

SparseVoxelTensor SparseVoxelTensor::canonicalize(std::vector<Coord> coords, Matrix attrs,
                                                  Grid grid) {
  if (attrs.rows() != coords.size()) throw InvariantError("canonicalize: row count mismatch");
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
  std::vector<Coord> sorted(coords.size());
  Matrix sorted_attrs(attrs.rows(), attrs.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted[i] = coords[order[i]];
    auto src = attrs.row(order[i]);
    std::copy(src.begin(), src.end(), sorted_attrs.row(i).begin());
  }
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] == sorted[i - 1])
      throw InvariantError("sparse tensor: duplicate coordinate " + coord_str(sorted[i]));
  return SparseVoxelTensor(std::move(sorted), std::move(sorted_attrs), grid);
}

SparseVoxelTensor SparseVoxelTensor::with_attrs(Matrix attrs) const {
  if (attrs.rows() != coords_.size()) throw ShapeError("with_attrs: row count mismatch");
  SparseVoxelTensor t;
  t.coords_ = coords_;
  t.attrs_ = std::move(attrs);
  t.grid_ = grid_;
  return t;
}

CoordIndex::CoordIndex(const std::vector<Coord>& coords) {
  map_.reserve(coords.size() * 2);
  for (std::size_t i = 0; i < coords.size(); ++i)
    map_.emplace(coord_key(coords[i]), static_cast<std::int64_t>(i));
}

std::int64_t CoordIndex::find(const Coord& c) const {
  auto it = map_.find(coord_key(c));
  return it == map_.end() ? -1 : it->second;
}

SparseVoxelTensor voxelize(const Matrix& points, std::array<double, 3> voxel_size, Grid grid) {
  for (double s : voxel_size)
    if (!(s > 0.0)) throw ConfigError("voxelize: voxel sizes must be positive");
  if (points.cols() < 3) throw ShapeError("voxelize: points need x, y, z columns");
  const std::size_t c = points.cols() - 3;

  std::map<Coord, std::pair<std::vector<double>, std::size_t>> buckets;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto p = points.row(i);
    const Coord key{static_cast<std::int32_t>(std::floor(p[0] / voxel_size[0])),
                    static_cast<std::int32_t>(std::floor(p[1] / voxel_size[1])),
                    static_cast<std::int32_t>(std::floor(p[2] / voxel_size[2]))};
    if (!grid.contains(key)) throw InvariantError("voxelize: point outside scene extent");
    auto& [sum, count] = buckets[key];
    if (sum.empty()) sum.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) sum[j] += p[3 + j];
    ++count;
  }

  std::vector<Coord> coords;
  Matrix attrs(buckets.size(), c);
  coords.reserve(buckets.size());
  std::size_t row = 0;
  for (const auto& [key, acc] : buckets) {
    coords.push_back(key);
    for (std::size_t j = 0; j < c; ++j) attrs(row, j) = acc.first[j] / static_cast<double>(acc.second);
    ++row;
  }
  return SparseVoxelTensor(std::move(coords), std::move(attrs), grid);
}

void write_tensor_text(std::ostream& os, const SparseVoxelTensor& t) {
  const auto& g = t.grid();
  os << t.size() << ' ' << t.channels() << ' ' << g.l << ' ' << g.w << ' ' << g.h << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& c = t.coords()[i];
    os << c.u << ' ' << c.v << ' ' << c.w;
    for (double a : t.attrs().row(i)) os << ' ' << a;
    os << '\n';
  }
}

SparseVoxelTensor read_tensor_text(std::istream& is) {
  std::size_t n = 0, c = 0;
  Grid g;
  if (!(is >> n >> c >> g.l >> g.w >> g.h)) throw IoError("tensor text: bad header");
  std::vector<Coord> coords(n);
  Matrix attrs(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> coords[i].u >> coords[i].v >> coords[i].w))
      throw IoError("tensor text: truncated at voxel " + std::to_string(i));
    for (std::size_t j = 0; j < c; ++j)
      if (!(is >> attrs(i, j))) throw IoError("tensor text: truncated attributes");
  }
  return SparseVoxelTensor::canonicalize(std::move(coords), std::move(attrs), g);
}

void save_tensor_text(const std::filesystem::path& path, const SparseVoxelTensor& t) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor_text(f, t);
}

SparseVoxelTensor load_tensor_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  return read_tensor_text(f);
}

}  // namespace fpc
