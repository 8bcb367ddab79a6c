#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpc/channel.hpp"
#include "fpc/ldpc.hpp"
#include "fpc/octree.hpp"

namespace fpc {

/// Source codec for the coordinate set. The built-in implementation is the
/// occupancy octree; an external binary can be plugged in instead.
class GeometryCodec {
 public:
  virtual ~GeometryCodec() = default;
  virtual std::vector<std::uint8_t> encode(const std::vector<Coord>& coords, const Grid& grid) const = 0;
  /// Throws DecodeError when the payload cannot be parsed.
  virtual std::vector<Coord> decode(const std::vector<std::uint8_t>& payload, const Grid& grid) const = 0;
};

class OctreeGeometryCodec final : public GeometryCodec {
 public:
  std::vector<std::uint8_t> encode(const std::vector<Coord>& coords, const Grid& grid) const override;
  std::vector<Coord> decode(const std::vector<std::uint8_t>& payload, const Grid& grid) const override;
};

/// Runs `<command> encode <coords.txt> <payload.bin>` and
/// `<command> decode <payload.bin> <coords.txt>` through the shell. The
/// coordinate file is the tensor text format with zero channels.
class ExternalGeometryCodec final : public GeometryCodec {
 public:
  explicit ExternalGeometryCodec(std::string command, std::filesystem::path scratch_dir = {});
  std::vector<std::uint8_t> encode(const std::vector<Coord>& coords, const Grid& grid) const override;
  std::vector<Coord> decode(const std::vector<std::uint8_t>& payload, const Grid& grid) const override;

 private:
  std::string command_;
  std::filesystem::path scratch_;
};

/// One geometry frame on the wire.
///
/// "FPCG" | L, W, H u16 | depth u8 | voxel count u32 | pad bits u16 |
/// block count u16 | block_count * block_length channel symbols as f32
struct GeometryFrame {
  Grid grid;
  std::uint8_t depth = 0;
  std::uint32_t voxel_count = 0;
  std::uint16_t pad_bits = 0;
  std::uint16_t block_count = 0;
  std::size_t block_length = 0;
  std::vector<double> symbols;

  std::vector<std::uint8_t> serialize() const;
  static GeometryFrame deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static GeometryFrame load(const std::filesystem::path& path);
};

/// `code == nullptr` sends the payload uncoded in blocks of `uncoded_block`
/// bits (no LDPC).
struct GeometryLinkOptions {
  const LdpcCode* code = nullptr;
  std::size_t uncoded_block = 100;
  int max_iters = kDefaultLdpcIterations;
  const GeometryCodec* codec = nullptr;  // nullptr -> octree
};

struct GeometryEncoded {
  GeometryFrame frame;                 // clean BPSK symbols
  std::vector<std::uint8_t> payload;   // source-coded bytes
  std::vector<std::uint8_t> channel_bits;  // all transmitted (coded) bits
};

GeometryEncoded geometry_encode(const std::vector<Coord>& coords, const Grid& grid,
                                const GeometryLinkOptions& opts);

/// Adds noise to every block; block b uses noise stream b.
void geometry_channel(GeometryFrame& frame, const ChannelConfig& cfg);

struct GeometryDecoded {
  std::vector<Coord> coords;  // empty when the frame failed
  bool frame_ok = false;
  bool blocks_converged = false;
  bool parse_ok = false;
  std::vector<std::uint8_t> payload_bits;   // recovered message bits, padding removed
  std::vector<std::uint8_t> channel_hard;   // hard decisions on the received symbols
  int total_iterations = 0;
  int max_block_iterations = 0;
};

GeometryDecoded geometry_decode(const GeometryFrame& frame, double snr_db, const GeometryLinkOptions& opts);

struct GeometryTransmitResult {
  std::vector<Coord> coords;
  bool frame_ok = false;
  bool exact = false;  // decoded coordinates equal the input
  std::size_t channel_bits = 0;
  std::size_t channel_bit_errors = 0;  // before LDPC
  std::size_t payload_bits = 0;
  std::size_t payload_bit_errors = 0;  // after LDPC
  std::size_t blocks = 0;
  int total_iterations = 0;
};

/// Source code -> segment -> LDPC -> BPSK -> AWGN -> LLR -> BP decode ->
/// reassemble -> source decode. frame_ok requires every block to converge and
/// the payload to parse.
GeometryTransmitResult geometry_transmit(const std::vector<Coord>& coords, const Grid& grid,
                                         const ChannelConfig& cfg, const GeometryLinkOptions& opts);

}  // namespace fpc
