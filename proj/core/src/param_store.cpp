#include "fpc/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::uint64_t name_hash(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ParamStore::add(const std::string& name, ParamArray array) {
  if (array.data.size() != shape_numel(array.shape))
    throw ShapeError("param '" + name + "': payload does not match shape " +
                     shape_to_string(array.shape));
  if (!entries_.emplace(name, std::move(array)).second)
    throw ConfigError("duplicate parameter name '" + name + "'");
}

void ParamStore::set(const std::string& name, ParamArray array) {
  if (array.data.size() != shape_numel(array.shape))
    throw ShapeError("param '" + name + "': payload does not match shape");
  entries_[name] = std::move(array);
}

void ParamStore::init(const std::string& name, const Shape& shape, std::string_view scheme) {
  add(name, ParamArray{shape, seeded_init(shape, mix_seed({seed_, name_hash(name)}), scheme)});
}

const ParamArray& ParamStore::require(const std::string& name, const Shape& shape) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  if (it->second.shape != shape)
    throw ConfigError("parameter '" + name + "' has shape " + shape_to_string(it->second.shape) +
                      ", expected " + shape_to_string(shape));
  return it->second;
}

const ParamArray& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

void ParamStore::merge(const ParamStore& other, const std::string& prefix) {
  for (const auto& [name, arr] : other.entries_) add(prefix + name, arr);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("parameter file truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'F', 'P', 'C', 'W'};

}  // namespace

std::vector<std::uint8_t> ParamStore::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, arr] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arr.shape.size()));
    for (auto d : arr.shape) put<std::uint64_t>(out, d);
    for (double v : arr.data) put<double>(out, v);
  }
  return out;
}

ParamStore ParamStore::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.get_string(4) != std::string(kMagic, 4)) throw IoError("not a parameter file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion)
    throw IoError("unsupported parameter file version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.get_string(in.get<std::uint32_t>());
    ParamArray arr;
    arr.shape.resize(in.get<std::uint32_t>());
    for (auto& d : arr.shape) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    arr.data.resize(shape_numel(arr.shape));
    for (double& v : arr.data) v = in.get<double>();
    store.add(name, std::move(arr));
  }
  if (!in.done()) throw IoError("trailing bytes after parameter entries");
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Matrix to_matrix(const ParamArray& a) {
  if (a.shape.size() != 2) throw ShapeError("to_matrix: rank " + std::to_string(a.shape.size()));
  return Matrix(a.shape[0], a.shape[1], a.data);
}

ParamArray from_matrix(const Matrix& m) { return ParamArray{{m.rows(), m.cols()}, m.data()}; }

ParamArray from_vector(const std::vector<double>& v) { return ParamArray{{v.size()}, v}; }

}  // namespace fpc

namespace fpc {

void ParamLayout::add(std::string name, Shape shape, std::string scheme) {
  entries_.push_back({std::move(name), std::move(shape), std::move(scheme)});
}

void ParamLayout::add_linear(const std::string& prefix, std::size_t in, std::size_t out) {
  add(prefix + ".w", {in, out}, "fan_in_uniform");
  add(prefix + ".b", {out}, "zeros");
}

void ParamLayout::add_kernel(const std::string& prefix, int size, std::size_t in, std::size_t out) {
  const auto taps = static_cast<std::size_t>(size) * size * size;
  add(prefix + ".w", {taps, in, out}, "fan_in_uniform");
  add(prefix + ".b", {out}, "zeros");
}

void ParamLayout::add_norm(const std::string& prefix, std::size_t channels) {
  add(prefix + ".scale", {channels}, "ones");
  add(prefix + ".shift", {channels}, "zeros");
}

ParamStore ParamLayout::init(std::uint64_t seed) const {
  ParamStore store(seed, "fan_in_uniform");
  for (const auto& e : entries_) store.init(e.name, e.shape, e.scheme);
  return store;
}

void ParamLayout::validate(const ParamStore& store) const {
  for (const auto& e : entries_) store.require(e.name, e.shape);
}

}  // namespace fpc
