#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fpc/sparse_tensor.hpp"

namespace fpc {

/// Cubic sparse convolution kernel.
///
/// Taps are stored tap-major: weights[(tap * c_in + i) * c_out + o]. For odd
/// sizes the taps enumerate (du, dv, dw) in [-k/2, k/2]^3 lexicographically
/// (dw fastest); for size 2 they enumerate {0, 1}^3 in the same order.
struct SparseKernel {
  int size = 1;
  int stride = 1;
  int dilation = 1;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::vector<double> weights;
  std::vector<double> bias;  // empty, or c_out entries

  SparseKernel() = default;
  SparseKernel(int size, int stride, int dilation, std::size_t c_in, std::size_t c_out,
               std::vector<double> weights, std::vector<double> bias = {});

  std::size_t taps() const noexcept { return static_cast<std::size_t>(size) * size * size; }
  /// c_in x c_out block for tap `t`.
  std::span<const double> tap(std::size_t t) const noexcept {
    return {weights.data() + t * c_in * c_out, c_in * c_out};
  }
  /// Spatial offset of tap `t` (before dilation).
  Coord offset(std::size_t t) const noexcept;
  Shape weight_shape() const { return {taps(), c_in, c_out}; }

  /// Center-tap identity kernel (c_in == c_out), zero bias.
  static SparseKernel identity(int size, std::size_t channels, int dilation = 1);
};

/// Output active set == input active set. out[p] = b + sum over taps o with
/// p + dilation * o active of W_o^T x[p + dilation * o]. Requires stride 1 and
/// an odd kernel size.
SparseVoxelTensor submanifold_conv(const SparseVoxelTensor& t, const SparseKernel& k);

/// Submanifold convolution with dilation > 1.
SparseVoxelTensor dilated_conv(const SparseVoxelTensor& t, const SparseKernel& k);

/// 2x2x2, stride-2 downsampling. Output sites are floor(p / 2) over the input
/// active set; the grid is halved (rounding up).
SparseVoxelTensor strided_conv(const SparseVoxelTensor& t, const SparseKernel& k);

/// 2x2x2, stride-2 transposed convolution: each input voxel scatters into its
/// eight children 2p + {0,1}^3 on a doubled grid.
SparseVoxelTensor transposed_conv(const SparseVoxelTensor& t, const SparseKernel& k);

/// Transposed convolution evaluated only at `target` (every target site must
/// have its parent floor(q / 2) active in `t`). This is the inverse of a
/// strided_conv that produced `t` from a tensor with active set `target`.
SparseVoxelTensor transposed_conv_onto(const SparseVoxelTensor& t, const SparseKernel& k,
                                       const std::vector<Coord>& target, Grid target_grid);

/// Channel-wise concatenation [a | b]; active sets and grids must match.
SparseVoxelTensor concat_channels(const SparseVoxelTensor& a, const SparseVoxelTensor& b);

enum class UpscaleMode { children8, scale_only };

/// Doubles the grid. children8: every voxel becomes its eight children with
/// replicated attributes. scale_only: coordinates times two, count preserved.
SparseVoxelTensor geometry_upscale(const SparseVoxelTensor& t,
                                   UpscaleMode mode = UpscaleMode::children8);

/// Elementwise activation on the attribute matrix.
SparseVoxelTensor apply_activation(const SparseVoxelTensor& t, Activation act);

}  // namespace fpc
