#pragma once

#include <cstdint>
#include <vector>

#include "fpc/sparse_tensor.hpp"

namespace fpc {

/// Packed bit sequence, most significant bit of each byte first.
struct Bitstream {
  std::vector<std::uint8_t> bytes;

  std::size_t bit_length() const noexcept { return bytes.size() * 8; }
  int bit(std::size_t i) const noexcept { return (bytes[i / 8] >> (7 - i % 8)) & 1; }

  std::vector<std::uint8_t> to_bits() const;
  /// Packs bits; a trailing partial byte is zero-filled.
  static Bitstream from_bits(const std::vector<std::uint8_t>& bits);

  friend bool operator==(const Bitstream&, const Bitstream&) = default;
};

/// Octree depth for a grid: ceil(log2(max extent)).
int octree_depth(const Grid& grid);

/// Lossless occupancy-octree coordinate codec.
///
/// Layout: "FPCO" | L, W, H as u16 | depth u8 | voxel count u32 | occupancy
/// bytes in breadth-first order. Bit i of an occupancy byte (LSB = 0) marks
/// child i = (bu << 2) | (bv << 1) | bw.
Bitstream octree_encode(const std::vector<Coord>& coords, const Grid& grid);

struct OctreeDecoded {
  std::vector<Coord> coords;  // canonical order
  Grid grid;
};

/// Throws DecodeError on any malformed, truncated or inconsistent stream.
OctreeDecoded octree_decode(const Bitstream& bs);

inline constexpr std::size_t kOctreeHeaderBytes = 15;

}  // namespace fpc
