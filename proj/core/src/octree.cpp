#include "fpc/octree.hpp"

#include <algorithm>
#include <cstring>

#include "fpc/error.hpp"

namespace fpc {

std::vector<std::uint8_t> Bitstream::to_bits() const {
  std::vector<std::uint8_t> bits(bit_length());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<std::uint8_t>(bit(i));
  return bits;
}

Bitstream Bitstream::from_bits(const std::vector<std::uint8_t>& bits) {
  Bitstream bs;
  bs.bytes.assign((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & 1) bs.bytes[i / 8] |= static_cast<std::uint8_t>(1u << (7 - i % 8));
  return bs;
}

int octree_depth(const Grid& grid) {
  int depth = 0;
  while ((std::int64_t{1} << depth) < grid.max_extent()) ++depth;
  return depth;
}

namespace {

constexpr char kMagic[4] = {'F', 'P', 'C', 'O'};

std::uint64_t morton(const Coord& c, int depth) {
  std::uint64_t code = 0;
  for (int b = depth - 1; b >= 0; --b) {
    code = (code << 3) | (static_cast<std::uint64_t>((c.u >> b) & 1) << 2) |
           (static_cast<std::uint64_t>((c.v >> b) & 1) << 1) | static_cast<std::uint64_t>((c.w >> b) & 1);
  }
  return code;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw DecodeError("octree: truncated header");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

Bitstream octree_encode(const std::vector<Coord>& coords, const Grid& grid) {
  if (grid.l <= 0 || grid.w <= 0 || grid.h <= 0 || grid.max_extent() > 0xFFFF)
    throw ConfigError("octree: grid extents must lie in [1, 65535]");
  const int depth = octree_depth(grid);

  std::vector<std::pair<std::uint64_t, Coord>> pts;
  pts.reserve(coords.size());
  for (const auto& c : coords) {
    if (!grid.contains(c)) throw InvariantError("octree: coordinate outside grid");
    pts.emplace_back(morton(c, depth), c);
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].first == pts[i - 1].first) throw InvariantError("octree: duplicate coordinates");

  Bitstream bs;
  bs.bytes.assign(kMagic, kMagic + 4);
  put<std::uint16_t>(bs.bytes, static_cast<std::uint16_t>(grid.l));
  put<std::uint16_t>(bs.bytes, static_cast<std::uint16_t>(grid.w));
  put<std::uint16_t>(bs.bytes, static_cast<std::uint16_t>(grid.h));
  put<std::uint8_t>(bs.bytes, static_cast<std::uint8_t>(depth));
  put<std::uint32_t>(bs.bytes, static_cast<std::uint32_t>(pts.size()));
  if (pts.empty() || depth == 0) return bs;

  // Nodes of one level are contiguous Morton ranges; children of a node are
  // contiguous sub-ranges ordered by child index.
  std::vector<std::pair<std::size_t, std::size_t>> level{{0, pts.size()}};
  for (int l = 0; l < depth; ++l) {
    const int shift = 3 * (depth - 1 - l);
    std::vector<std::pair<std::size_t, std::size_t>> next;
    next.reserve(level.size() * 2);
    for (auto [b, e] : level) {
      std::uint8_t occupancy = 0;
      std::size_t i = b;
      while (i < e) {
        const auto child = static_cast<unsigned>((pts[i].first >> shift) & 7u);
        std::size_t j = i;
        while (j < e && ((pts[j].first >> shift) & 7u) == child) ++j;
        occupancy |= static_cast<std::uint8_t>(1u << child);
        next.emplace_back(i, j);
        i = j;
      }
      bs.bytes.push_back(occupancy);
    }
    level = std::move(next);
  }
  return bs;
}

OctreeDecoded octree_decode(const Bitstream& bs) {
  const auto& in = bs.bytes;
  std::size_t pos = 0;
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) throw DecodeError("octree: bad magic");
  pos = 4;
  OctreeDecoded out;
  out.grid.l = get<std::uint16_t>(in, pos);
  out.grid.w = get<std::uint16_t>(in, pos);
  out.grid.h = get<std::uint16_t>(in, pos);
  const int depth = get<std::uint8_t>(in, pos);
  const auto count = get<std::uint32_t>(in, pos);
  if (out.grid.l == 0 || out.grid.w == 0 || out.grid.h == 0) throw DecodeError("octree: zero grid extent");
  if (depth != octree_depth(out.grid)) throw DecodeError("octree: depth inconsistent with grid");

  if (count == 0 || depth == 0) {
    if (count > 1) throw DecodeError("octree: depth-0 tree holds at most one voxel");
    if (pos != in.size()) throw DecodeError("octree: trailing bytes");
    if (count == 1) out.coords.push_back({0, 0, 0});
    return out;
  }

  std::vector<Coord> level{{0, 0, 0}};
  for (int l = 0; l < depth; ++l) {
    if (in.size() - pos < level.size()) throw DecodeError("octree: occupancy stream truncated");
    if (level.size() > count) throw DecodeError("octree: node count exceeds voxel count");
    std::vector<Coord> next;
    next.reserve(level.size() * 2);
    for (const auto& node : level) {
      const std::uint8_t occ = in[pos++];
      if (occ == 0) throw DecodeError("octree: empty occupancy byte");
      for (int child = 0; child < 8; ++child)
        if (occ & (1u << child))
          next.push_back({2 * node.u + ((child >> 2) & 1), 2 * node.v + ((child >> 1) & 1),
                          2 * node.w + (child & 1)});
    }
    level = std::move(next);
  }
  if (pos != in.size()) throw DecodeError("octree: trailing bytes");
  if (level.size() != count) throw DecodeError("octree: voxel count mismatch");
  for (const auto& c : level)
    if (!out.grid.contains(c)) throw DecodeError("octree: voxel outside grid");
  std::sort(level.begin(), level.end());
  out.coords = std::move(level);
  return out;
}

}  // namespace fpc
