#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fpc/tensor.hpp"

namespace fpc {

struct ParamArray {
  Shape shape;
  std::vector<double> data;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Named parameter arrays for one model.
///
/// On-disk layout (little-endian):
///   "FPCW" | version u32 | entry count u32
///   per entry: name length u32 | UTF-8 name | rank u32 | dims u64[rank] | f64[numel]
class ParamStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  ParamStore() = default;
  ParamStore(std::uint64_t seed, std::string init_scheme)
      : seed_(seed), init_scheme_(std::move(init_scheme)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& init_scheme() const noexcept { return init_scheme_; }

  /// Inserts a new entry; throws ConfigError on a duplicate name.
  void add(const std::string& name, ParamArray array);
  /// Inserts or replaces.
  void set(const std::string& name, ParamArray array);
  /// Adds `name` initialized with seeded_init under a seed derived from the
  /// store seed and the parameter name.
  void init(const std::string& name, const Shape& shape, std::string_view scheme);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  /// Looks up `name` and checks its shape. Missing entries and shape
  /// mismatches both throw ConfigError.
  const ParamArray& require(const std::string& name, const Shape& shape) const;
  const ParamArray& at(const std::string& name) const;

  const std::map<std::string, ParamArray>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Copies every entry of `other` under `prefix`.
  void merge(const ParamStore& other, const std::string& prefix = "");

  std::vector<std::uint8_t> serialize() const;
  static ParamStore deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.entries_ == b.entries_; }

 private:
  std::uint64_t seed_ = 0;
  std::string init_scheme_ = "fan_in_uniform";
  std::map<std::string, ParamArray> entries_;
};

/// Stable 64-bit hash of a parameter name (FNV-1a).
std::uint64_t name_hash(std::string_view name) noexcept;

Matrix to_matrix(const ParamArray& a);
ParamArray from_matrix(const Matrix& m);
ParamArray from_vector(const std::vector<double>& v);

}  // namespace fpc

namespace fpc {

/// Declared parameter names and shapes for one model. Used both to seed a
/// fresh ParamStore and to validate a loaded one.
class ParamLayout {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::string scheme;
  };

  void add(std::string name, Shape shape, std::string scheme);
  /// prefix.w (in x out, fan_in_uniform) and prefix.b (out, zeros).
  void add_linear(const std::string& prefix, std::size_t in, std::size_t out);
  /// prefix.w (k^3 x in x out) and prefix.b (out).
  void add_kernel(const std::string& prefix, int size, std::size_t in, std::size_t out);
  /// prefix.scale (ones) and prefix.shift (zeros).
  void add_norm(const std::string& prefix, std::size_t channels);

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  ParamStore init(std::uint64_t seed) const;
  /// Throws ConfigError on the first missing or mis-shaped entry.
  void validate(const ParamStore& store) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace fpc
