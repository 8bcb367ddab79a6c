#pragma once

// Helpers shared by the learned models to move layers in and out of a
// ParamStore. Private to the core library.

#include <string>

#include "fpc/param_store.hpp"
#include "fpc/sparse_conv.hpp"
#include "fpc/tensor.hpp"

namespace fpc::detail {

inline LinearLayer load_linear(const ParamStore& s, const std::string& prefix, std::size_t in,
                               std::size_t out, Activation act) {
  const auto& w = s.require(prefix + ".w", {in, out});
  const auto& b = s.require(prefix + ".b", {out});
  return LinearLayer(Matrix(in, out, w.data), b.data, act);
}

inline SparseKernel load_kernel(const ParamStore& s, const std::string& prefix, int size, int stride,
                                int dilation, std::size_t in, std::size_t out) {
  const auto taps = static_cast<std::size_t>(size) * size * size;
  const auto& w = s.require(prefix + ".w", {taps, in, out});
  const auto& b = s.require(prefix + ".b", {out});
  return SparseKernel(size, stride, dilation, in, out, w.data, b.data);
}

inline AffineNorm load_norm(const ParamStore& s, const std::string& prefix, std::size_t c) {
  return AffineNorm{s.require(prefix + ".scale", {c}).data, s.require(prefix + ".shift", {c}).data};
}

inline void store_linear(ParamStore& s, const std::string& prefix, const LinearLayer& l) {
  s.set(prefix + ".w", from_matrix(l.weight));
  s.set(prefix + ".b", from_vector(l.bias));
}

/// conv -> frozen BN -> activation
inline SparseVoxelTensor conv_bn_act(const SparseVoxelTensor& x, const SparseKernel& k,
                                     const AffineNorm& bn, Activation act) {
  auto y = submanifold_conv(x, k);
  return apply_activation(y.with_attrs(affine_norm(bn, y.attrs())), act);
}

}  // namespace fpc::detail
