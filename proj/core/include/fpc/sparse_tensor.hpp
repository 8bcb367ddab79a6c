#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "fpc/tensor.hpp"

namespace fpc {

/// Integer voxel coordinate. Ordering is lexicographic with w varying fastest.
struct Coord {
  std::int32_t u = 0;
  std::int32_t v = 0;
  std::int32_t w = 0;

  friend auto operator<=>(const Coord&, const Coord&) = default;
};

/// Voxel extents (L, W, H) of a feature grid.
struct Grid {
  std::int32_t l = 0;
  std::int32_t w = 0;
  std::int32_t h = 0;

  bool contains(const Coord& c) const noexcept {
    return c.u >= 0 && c.v >= 0 && c.w >= 0 && c.u < l && c.v < w && c.w < h;
  }
  std::int64_t volume() const noexcept { return std::int64_t{l} * w * h; }
  std::int32_t max_extent() const noexcept { return std::max({l, w, h}); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Sparse feature point cloud: unique, sorted coordinates plus one attribute
/// row per coordinate. Every constructor path enforces the invariants.
class SparseVoxelTensor {
 public:
  SparseVoxelTensor() = default;

  /// Takes already-canonical data; throws InvariantError when the coordinates
  /// are unsorted, duplicated or outside the grid.
  SparseVoxelTensor(std::vector<Coord> coords, Matrix attrs, Grid grid);

  /// Sorts rows into canonical order first. Duplicates still throw.
  static SparseVoxelTensor canonicalize(std::vector<Coord> coords, Matrix attrs, Grid grid);

  static SparseVoxelTensor empty(Grid grid, std::size_t channels) {
    return SparseVoxelTensor({}, Matrix(0, channels), grid);
  }

  std::size_t size() const noexcept { return coords_.size(); }
  std::size_t channels() const noexcept { return attrs_.cols(); }
  bool empty() const noexcept { return coords_.empty(); }

  const std::vector<Coord>& coords() const noexcept { return coords_; }
  const Matrix& attrs() const noexcept { return attrs_; }
  const Grid& grid() const noexcept { return grid_; }

  /// Same coordinates and grid, new attribute matrix (row count must match).
  SparseVoxelTensor with_attrs(Matrix attrs) const;

  friend bool operator==(const SparseVoxelTensor&, const SparseVoxelTensor&) = default;

 private:
  std::vector<Coord> coords_;
  Matrix attrs_;
  Grid grid_;
};

/// Packs a coordinate into a hash key. Valid for components in [-2^20, 2^20).
constexpr std::uint64_t coord_key(const Coord& c) noexcept {
  constexpr std::int64_t off = 1 << 20;
  return (static_cast<std::uint64_t>(c.u + off) << 42) |
         (static_cast<std::uint64_t>(c.v + off) << 21) | static_cast<std::uint64_t>(c.w + off);
}

/// Coordinate -> row lookup for neighbor gathers.
class CoordIndex {
 public:
  explicit CoordIndex(const std::vector<Coord>& coords);
  /// Row of `c`, or -1 when inactive.
  std::int64_t find(const Coord& c) const;

 private:
  std::unordered_map<std::uint64_t, std::int64_t> map_;
};

/// Buckets points (columns x, y, z, attr...) into voxels of the given size in
/// meters; each occupied voxel carries the mean of its points' attributes.
SparseVoxelTensor voxelize(const Matrix& points, std::array<double, 3> voxel_size, Grid grid);

// Text fixture format: "n c L W H" header, then "u v w a_1 ... a_c" per voxel.
void write_tensor_text(std::ostream& os, const SparseVoxelTensor& t);
SparseVoxelTensor read_tensor_text(std::istream& is);
void save_tensor_text(const std::filesystem::path& path, const SparseVoxelTensor& t);
SparseVoxelTensor load_tensor_text(const std::filesystem::path& path);

}  // namespace fpc
