#include "fpc/geometry_link.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fpc/error.hpp"

namespace fpc {

std::vector<std::uint8_t> OctreeGeometryCodec::encode(const std::vector<Coord>& coords, const Grid& grid) const {
  return octree_encode(coords, grid).bytes;
}

std::vector<Coord> OctreeGeometryCodec::decode(const std::vector<std::uint8_t>& payload, const Grid& grid) const {
  auto decoded = octree_decode(Bitstream{payload});
  if (decoded.grid != grid) throw DecodeError("octree: grid differs from frame header");
  return std::move(decoded.coords);
}

ExternalGeometryCodec::ExternalGeometryCodec(std::string command, std::filesystem::path scratch_dir)
    : command_(std::move(command)),
      scratch_(scratch_dir.empty() ? std::filesystem::temp_directory_path() : std::move(scratch_dir)) {
  if (command_.empty()) throw ConfigError("external geometry codec: empty command");
}

namespace {

std::filesystem::path scratch_file(const std::filesystem::path& dir, const char* stem) {
  static std::atomic<std::uint64_t> counter{0};
  return dir / ("fpc_geom_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + stem);
}

std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void run(const std::string& cmd) {
  if (std::system(cmd.c_str()) != 0) throw DecodeError("external geometry codec failed: " + cmd);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> ExternalGeometryCodec::encode(const std::vector<Coord>& coords, const Grid& grid) const {
  const auto in = scratch_file(scratch_, "coords.txt");
  const auto out = scratch_file(scratch_, "payload.bin");
  save_tensor_text(in, SparseVoxelTensor(coords, Matrix(coords.size(), 0), grid));
  run(command_ + " encode " + quote(in) + " " + quote(out));
  auto bytes = read_bytes(out);
  std::filesystem::remove(in);
  std::filesystem::remove(out);
  return bytes;
}

std::vector<Coord> ExternalGeometryCodec::decode(const std::vector<std::uint8_t>& payload, const Grid& grid) const {
  const auto in = scratch_file(scratch_, "payload.bin");
  const auto out = scratch_file(scratch_, "coords.txt");
  write_bytes(in, payload);
  std::vector<Coord> coords;
  try {
    run(command_ + " decode " + quote(in) + " " + quote(out));
    auto t = load_tensor_text(out);
    if (t.grid() != grid) throw DecodeError("external geometry codec: grid mismatch");
    coords = t.coords();
  } catch (const Error& e) {
    std::filesystem::remove(in);
    std::filesystem::remove(out);
    throw DecodeError(e.what());
  }
  std::filesystem::remove(in);
  std::filesystem::remove(out);
  return coords;
}

// Frame serialization ------------------------------------------------------

namespace {
constexpr char kFrameMagic[4] = {'F', 'P', 'C', 'G'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw IoError("geometry frame truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace

std::vector<std::uint8_t> GeometryFrame::serialize() const {
  std::vector<std::uint8_t> out(kFrameMagic, kFrameMagic + 4);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(grid.l));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(grid.w));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(grid.h));
  put<std::uint8_t>(out, depth);
  put<std::uint32_t>(out, voxel_count);
  put<std::uint16_t>(out, pad_bits);
  put<std::uint16_t>(out, block_count);
  for (double s : symbols) put<float>(out, static_cast<float>(s));
  return out;
}

GeometryFrame GeometryFrame::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFrameMagic, 4) != 0)
    throw IoError("not a geometry frame (bad magic)");
  std::size_t pos = 4;
  GeometryFrame f;
  f.grid.l = get<std::uint16_t>(bytes, pos);
  f.grid.w = get<std::uint16_t>(bytes, pos);
  f.grid.h = get<std::uint16_t>(bytes, pos);
  f.depth = get<std::uint8_t>(bytes, pos);
  f.voxel_count = get<std::uint32_t>(bytes, pos);
  f.pad_bits = get<std::uint16_t>(bytes, pos);
  f.block_count = get<std::uint16_t>(bytes, pos);
  const std::size_t remaining = (bytes.size() - pos) / sizeof(float);
  if ((bytes.size() - pos) % sizeof(float) != 0) throw IoError("geometry frame: ragged symbol payload");
  if (f.block_count == 0) {
    if (remaining != 0) throw IoError("geometry frame: symbols without blocks");
  } else {
    if (remaining % f.block_count != 0) throw IoError("geometry frame: symbols not divisible into blocks");
    f.block_length = remaining / f.block_count;
  }
  f.symbols.resize(remaining);
  for (double& s : f.symbols) s = get<float>(bytes, pos);
  return f;
}

void GeometryFrame::save(const std::filesystem::path& path) const { write_bytes(path, serialize()); }

GeometryFrame GeometryFrame::load(const std::filesystem::path& path) { return deserialize(read_bytes(path)); }

// Link ---------------------------------------------------------------------

namespace {
const GeometryCodec& codec_of(const GeometryLinkOptions& opts) {
  static const OctreeGeometryCodec octree;
  return opts.codec ? *opts.codec : octree;
}

std::size_t message_bits(const GeometryLinkOptions& opts) {
  return opts.code ? opts.code->k : opts.uncoded_block;
}
}  // namespace

GeometryEncoded geometry_encode(const std::vector<Coord>& coords, const Grid& grid,
                                const GeometryLinkOptions& opts) {
  if (!opts.code && opts.uncoded_block == 0) throw ConfigError("geometry link: zero uncoded block length");
  GeometryEncoded enc;
  enc.payload = codec_of(opts).encode(coords, grid);
  const auto bits = Bitstream{enc.payload}.to_bits();

  const std::size_t k = message_bits(opts);
  const std::size_t blocks = (bits.size() + k - 1) / k;
  if (blocks > 0xFFFF) throw ConfigError("geometry link: frame exceeds 65535 blocks");
  const std::size_t pad = blocks * k - bits.size();

  auto& f = enc.frame;
  f.grid = grid;
  f.depth = static_cast<std::uint8_t>(octree_depth(grid));
  f.voxel_count = static_cast<std::uint32_t>(coords.size());
  f.pad_bits = static_cast<std::uint16_t>(pad);
  f.block_count = static_cast<std::uint16_t>(blocks);
  f.block_length = opts.code ? opts.code->n : k;

  std::vector<std::uint8_t> msg(k);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t src = b * k + i;
      msg[i] = src < bits.size() ? bits[src] : 0;
    }
    const auto cw = opts.code ? ldpc_encode(*opts.code, msg) : msg;
    enc.channel_bits.insert(enc.channel_bits.end(), cw.begin(), cw.end());
  }
  f.symbols = bpsk_modulate(enc.channel_bits);
  return enc;
}

void geometry_channel(GeometryFrame& frame, const ChannelConfig& cfg) {
  const std::size_t len = frame.block_length;
  for (std::size_t b = 0; b < frame.block_count; ++b) {
    std::span<const double> block(frame.symbols.data() + b * len, len);
    const auto noisy = awgn(block, cfg, b);
    std::copy(noisy.begin(), noisy.end(), frame.symbols.begin() + static_cast<std::ptrdiff_t>(b * len));
  }
}

GeometryDecoded geometry_decode(const GeometryFrame& frame, double snr_db, const GeometryLinkOptions& opts) {
  GeometryDecoded dec;
  const std::size_t k = message_bits(opts);
  const std::size_t len = opts.code ? opts.code->n : k;
  if (frame.block_count > 0 && frame.block_length != len)
    throw ConfigError("geometry frame block length " + std::to_string(frame.block_length) +
                      " does not match the configured code (" + std::to_string(len) + ")");

  dec.channel_hard = hard_decision(frame.symbols);
  dec.blocks_converged = true;
  std::vector<std::uint8_t> bits;
  bits.reserve(frame.block_count * k);
  for (std::size_t b = 0; b < frame.block_count; ++b) {
    std::span<const double> block(frame.symbols.data() + b * len, len);
    if (opts.code) {
      const auto llr = bpsk_demodulate_llr(block, snr_db);
      const auto res = ldpc_decode(*opts.code, llr, opts.max_iters);
      dec.blocks_converged = dec.blocks_converged && res.converged;
      dec.total_iterations += res.iterations;
      dec.max_block_iterations = std::max(dec.max_block_iterations, res.iterations);
      bits.insert(bits.end(), res.message.begin(), res.message.end());
    } else {
      const auto hard = hard_decision(block);
      bits.insert(bits.end(), hard.begin(), hard.end());
    }
  }
  if (frame.pad_bits > bits.size()) {
    dec.blocks_converged = false;
    return dec;
  }
  bits.resize(bits.size() - frame.pad_bits);
  dec.payload_bits = bits;

  try {
    if (bits.size() % 8 != 0) throw DecodeError("geometry payload is not byte aligned");
    auto coords = codec_of(opts).decode(Bitstream::from_bits(bits).bytes, frame.grid);
    if (coords.size() != frame.voxel_count) throw DecodeError("voxel count differs from frame header");
    dec.parse_ok = true;
    dec.coords = std::move(coords);
  } catch (const DecodeError&) {
    dec.parse_ok = false;
  }
  dec.frame_ok = dec.blocks_converged && dec.parse_ok;
  if (!dec.frame_ok) dec.coords.clear();
  return dec;
}

GeometryTransmitResult geometry_transmit(const std::vector<Coord>& coords, const Grid& grid,
                                         const ChannelConfig& cfg, const GeometryLinkOptions& opts) {
  auto enc = geometry_encode(coords, grid, opts);
  geometry_channel(enc.frame, cfg);
  const auto dec = geometry_decode(enc.frame, cfg.snr_db, opts);

  GeometryTransmitResult r;
  r.frame_ok = dec.frame_ok;
  r.blocks = enc.frame.block_count;
  r.total_iterations = dec.total_iterations;
  r.channel_bits = enc.channel_bits.size();
  for (std::size_t i = 0; i < enc.channel_bits.size(); ++i)
    r.channel_bit_errors += enc.channel_bits[i] != dec.channel_hard[i];

  const auto sent = Bitstream{enc.payload}.to_bits();
  r.payload_bits = sent.size();
  for (std::size_t i = 0; i < sent.size(); ++i)
    r.payload_bit_errors += i >= dec.payload_bits.size() || sent[i] != dec.payload_bits[i];

  r.coords = dec.coords;
  std::vector<Coord> sorted = coords;
  std::sort(sorted.begin(), sorted.end());
  r.exact = dec.frame_ok && dec.coords == sorted;
  return r;
}

}  // namespace fpc
