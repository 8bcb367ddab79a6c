#include "fpc/sparse_conv.hpp"

#include <algorithm>

#include "fpc/error.hpp"

namespace fpc {

SparseKernel::SparseKernel(int size_, int stride_, int dilation_, std::size_t c_in_,
                           std::size_t c_out_, std::vector<double> weights_,
                           std::vector<double> bias_)
    : size(size_),
      stride(stride_),
      dilation(dilation_),
      c_in(c_in_),
      c_out(c_out_),
      weights(std::move(weights_)),
      bias(std::move(bias_)) {
  if (size < 1 || stride < 1 || dilation < 1) throw ConfigError("sparse kernel: bad geometry");
  if (weights.size() != taps() * c_in * c_out)
    throw ShapeError("sparse kernel: weight length " + std::to_string(weights.size()) +
                     " != " + shape_to_string(weight_shape()));
  if (!bias.empty() && bias.size() != c_out) throw ShapeError("sparse kernel: bias length");
}

Coord SparseKernel::offset(std::size_t t) const noexcept {
  const int k = size;
  const int lo = (k % 2 == 1) ? -(k / 2) : 0;
  const int dw = static_cast<int>(t % k);
  const int dv = static_cast<int>((t / k) % k);
  const int du = static_cast<int>(t / (static_cast<std::size_t>(k) * k));
  return {du + lo, dv + lo, dw + lo};
}

SparseKernel SparseKernel::identity(int size, std::size_t channels, int dilation) {
  const std::size_t taps = static_cast<std::size_t>(size) * size * size;
  std::vector<double> w(taps * channels * channels, 0.0);
  const std::size_t center = taps / 2;
  for (std::size_t c = 0; c < channels; ++c) w[(center * channels + c) * channels + c] = 1.0;
  return SparseKernel(size, 1, dilation, channels, channels, std::move(w));
}

namespace {

void check_channels(const SparseVoxelTensor& t, const SparseKernel& k, const char* op) {
  if (t.channels() != k.c_in)
    throw ShapeError(std::string(op) + ": tensor has " + std::to_string(t.channels()) +
                     " channels, kernel expects " + std::to_string(k.c_in));
}

// out_row += x_row * W_tap
inline void accumulate(std::span<double> out_row, std::span<const double> x_row,
                       std::span<const double> tap, std::size_t c_out) {
  for (std::size_t i = 0; i < x_row.size(); ++i) {
    const double xi = x_row[i];
    if (xi == 0.0) continue;
    const double* w = tap.data() + i * c_out;
    for (std::size_t o = 0; o < c_out; ++o) out_row[o] += xi * w[o];
  }
}

Matrix bias_matrix(std::size_t rows, const SparseKernel& k) {
  Matrix out(rows, k.c_out);
  if (!k.bias.empty())
    for (std::size_t r = 0; r < rows; ++r) std::copy(k.bias.begin(), k.bias.end(), out.row(r).begin());
  return out;
}

std::int32_t floor_div2(std::int32_t x) noexcept { return x >= 0 ? x / 2 : -((-x + 1) / 2); }

void check_stride2(const SparseVoxelTensor& t, const SparseKernel& k, const char* op) {
  check_channels(t, k, op);
  if (k.stride != 2 || k.size != 2)
    throw ConfigError(std::string(op) + ": requires a 2x2x2 kernel with stride 2");
}

}  // namespace

SparseVoxelTensor submanifold_conv(const SparseVoxelTensor& t, const SparseKernel& k) {
  check_channels(t, k, "submanifold_conv");
  if (k.stride != 1) throw ConfigError("submanifold_conv: stride must be 1");
  if (k.size % 2 == 0) throw ConfigError("submanifold_conv: kernel size must be odd");

  const CoordIndex index(t.coords());
  Matrix out = bias_matrix(t.size(), k);
  const auto& coords = t.coords();
  for (std::size_t p = 0; p < coords.size(); ++p) {
    auto out_row = out.row(p);
    for (std::size_t tap = 0; tap < k.taps(); ++tap) {
      const Coord o = k.offset(tap);
      const Coord q{coords[p].u + k.dilation * o.u, coords[p].v + k.dilation * o.v,
                    coords[p].w + k.dilation * o.w};
      if (!t.grid().contains(q)) continue;
      const auto row = index.find(q);
      if (row < 0) continue;
      accumulate(out_row, t.attrs().row(static_cast<std::size_t>(row)), k.tap(tap), k.c_out);
    }
  }
  return t.with_attrs(std::move(out));
}

SparseVoxelTensor dilated_conv(const SparseVoxelTensor& t, const SparseKernel& k) {
  if (k.dilation < 2) throw ConfigError("dilated_conv: dilation must be at least 2");
  return submanifold_conv(t, k);
}

SparseVoxelTensor strided_conv(const SparseVoxelTensor& t, const SparseKernel& k) {
  check_stride2(t, k, "strided_conv");
  const Grid out_grid{(t.grid().l + 1) / 2, (t.grid().w + 1) / 2, (t.grid().h + 1) / 2};

  // Canonical input order maps to non-decreasing parents only along u, so
  // collect parents explicitly and sort.
  std::vector<Coord> parents;
  parents.reserve(t.size());
  for (const auto& c : t.coords()) parents.push_back({floor_div2(c.u), floor_div2(c.v), floor_div2(c.w)});
  std::sort(parents.begin(), parents.end());
  parents.erase(std::unique(parents.begin(), parents.end()), parents.end());

  const CoordIndex out_index(parents);
  Matrix out = bias_matrix(parents.size(), k);
  for (std::size_t p = 0; p < t.size(); ++p) {
    const Coord& c = t.coords()[p];
    const Coord parent{floor_div2(c.u), floor_div2(c.v), floor_div2(c.w)};
    const Coord rel{c.u - 2 * parent.u, c.v - 2 * parent.v, c.w - 2 * parent.w};
    const std::size_t tap = static_cast<std::size_t>((rel.u * 2 + rel.v) * 2 + rel.w);
    const auto row = static_cast<std::size_t>(out_index.find(parent));
    accumulate(out.row(row), t.attrs().row(p), k.tap(tap), k.c_out);
  }
  return SparseVoxelTensor(std::move(parents), std::move(out), out_grid);
}

SparseVoxelTensor transposed_conv(const SparseVoxelTensor& t, const SparseKernel& k) {
  check_stride2(t, k, "transposed_conv");
  const Grid out_grid{t.grid().l * 2, t.grid().w * 2, t.grid().h * 2};
  std::vector<Coord> children;
  children.reserve(t.size() * 8);
  for (const auto& c : t.coords())
    for (std::size_t tap = 0; tap < 8; ++tap) {
      const Coord o = k.offset(tap);
      children.push_back({2 * c.u + o.u, 2 * c.v + o.v, 2 * c.w + o.w});
    }
  // Children of distinct parents never collide, and the 8 children of a
  // parent are contiguous in canonical order once sorted.
  std::sort(children.begin(), children.end());
  return transposed_conv_onto(t, k, children, out_grid);
}

SparseVoxelTensor transposed_conv_onto(const SparseVoxelTensor& t, const SparseKernel& k,
                                       const std::vector<Coord>& target, Grid target_grid) {
  check_stride2(t, k, "transposed_conv");
  const CoordIndex in_index(t.coords());
  Matrix out = bias_matrix(target.size(), k);
  for (std::size_t q = 0; q < target.size(); ++q) {
    const Coord& c = target[q];
    const Coord parent{floor_div2(c.u), floor_div2(c.v), floor_div2(c.w)};
    const auto row = in_index.find(parent);
    if (row < 0) throw AlignmentError("transposed_conv: target voxel has no active parent");
    const Coord rel{c.u - 2 * parent.u, c.v - 2 * parent.v, c.w - 2 * parent.w};
    const std::size_t tap = static_cast<std::size_t>((rel.u * 2 + rel.v) * 2 + rel.w);
    accumulate(out.row(q), t.attrs().row(static_cast<std::size_t>(row)), k.tap(tap), k.c_out);
  }
  return SparseVoxelTensor(target, std::move(out), target_grid);
}

SparseVoxelTensor concat_channels(const SparseVoxelTensor& a, const SparseVoxelTensor& b) {
  if (a.grid() != b.grid() || a.coords() != b.coords())
    throw AlignmentError("concat_channels: active sets differ");
  return a.with_attrs(hconcat(a.attrs(), b.attrs()));
}

SparseVoxelTensor geometry_upscale(const SparseVoxelTensor& t, UpscaleMode mode) {
  const Grid g{t.grid().l * 2, t.grid().w * 2, t.grid().h * 2};
  if (mode == UpscaleMode::scale_only) {
    std::vector<Coord> coords;
    coords.reserve(t.size());
    for (const auto& c : t.coords()) coords.push_back({2 * c.u, 2 * c.v, 2 * c.w});
    return SparseVoxelTensor(std::move(coords), t.attrs(), g);
  }
  std::vector<Coord> coords;
  Matrix attrs(t.size() * 8, t.channels());
  coords.reserve(t.size() * 8);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& c = t.coords()[i];
    for (int du = 0; du < 2; ++du)
      for (int dv = 0; dv < 2; ++dv)
        for (int dw = 0; dw < 2; ++dw) {
          coords.push_back({2 * c.u + du, 2 * c.v + dv, 2 * c.w + dw});
          auto src = t.attrs().row(i);
          std::copy(src.begin(), src.end(), attrs.row(coords.size() - 1).begin());
        }
  }
  return SparseVoxelTensor::canonicalize(std::move(coords), std::move(attrs), g);
}

SparseVoxelTensor apply_activation(const SparseVoxelTensor& t, Activation act) {
  Matrix a = t.attrs();
  for (double& v : a.data()) v = activate(act, v);
  return t.with_attrs(std::move(a));
}

}  // namespace fpc
