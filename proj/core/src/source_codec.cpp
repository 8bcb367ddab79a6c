#include "fpc/source_codec.hpp"

#include <algorithm>
#include <numeric>

#include "fpc/error.hpp"
#include "model_io.hpp"

namespace fpc {

using detail::conv_bn_act;
using detail::load_kernel;
using detail::load_linear;
using detail::load_norm;

namespace {

std::string down_prefix(std::size_t i) { return "unet.down" + std::to_string(i + 1); }
std::string up_prefix(std::size_t i) { return "unet.up" + std::to_string(i + 1); }

void check_compact_channels(std::size_t c) {
  if (c == 0) throw ConfigError("compact channel count must be positive");
}

}  // namespace

ParamLayout CompactionModel::layout(std::size_t channels) {
  check_compact_channels(channels);
  ParamLayout l;
  l.add_linear("se_reduce", kFeatureChannels, 8);
  l.add_linear("se_expand", 8, kFeatureChannels);
  l.add_kernel("reduce", 1, kFeatureChannels, channels);

  std::size_t in = channels;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = down_prefix(i);
    const auto out = kDownWidths[i];
    l.add_kernel(p + ".conv1", 3, in, out);
    l.add_norm(p + ".bn1", out);
    l.add_kernel(p + ".conv2", 3, out, out);
    l.add_norm(p + ".bn2", out);
    l.add_kernel(p + ".conv3", 2, out, out);
    in = out;
  }
  l.add_kernel("unet.bottleneck.conv1", 3, in, kBottleneckWidth);
  l.add_norm("unet.bottleneck.bn1", kBottleneckWidth);
  l.add_kernel("unet.bottleneck.conv2", 3, kBottleneckWidth, kBottleneckWidth);
  l.add_norm("unet.bottleneck.bn2", kBottleneckWidth);
  in = kBottleneckWidth;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = up_prefix(i);
    const auto out = kUpWidths[i];
    const auto skip = kDownWidths[2 - i];
    l.add_kernel(p + ".convt", 2, in, out);
    l.add_kernel(p + ".conv1", 3, out + skip, out);
    l.add_norm(p + ".bn1", out);
    l.add_kernel(p + ".conv2", 3, out, out);
    l.add_norm(p + ".bn2", out);
    in = out;
  }
  l.add_kernel("unet.head", 1, in, 1);
  return l;
}

CompactionModel CompactionModel::from_store(const ParamStore& s, std::size_t channels) {
  layout(channels).validate(s);
  CompactionModel m;
  m.channels = channels;
  m.se_reduce = load_linear(s, "se_reduce", kFeatureChannels, 8, Activation::relu);
  m.se_expand = load_linear(s, "se_expand", 8, kFeatureChannels, Activation::sigmoid);
  m.reduce = load_kernel(s, "reduce", 1, 1, 1, kFeatureChannels, channels);

  std::size_t in = channels;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = down_prefix(i);
    const auto out = kDownWidths[i];
    auto& d = m.unet.down[i];
    d.conv1 = load_kernel(s, p + ".conv1", 3, 1, 1, in, out);
    d.bn1 = load_norm(s, p + ".bn1", out);
    d.conv2 = load_kernel(s, p + ".conv2", 3, 1, 1, out, out);
    d.bn2 = load_norm(s, p + ".bn2", out);
    d.conv3 = load_kernel(s, p + ".conv3", 2, 2, 1, out, out);
    in = out;
  }
  auto& b = m.unet.bottleneck;
  b.conv1 = load_kernel(s, "unet.bottleneck.conv1", 3, 1, 1, in, kBottleneckWidth);
  b.bn1 = load_norm(s, "unet.bottleneck.bn1", kBottleneckWidth);
  b.conv2 = load_kernel(s, "unet.bottleneck.conv2", 3, 1, 1, kBottleneckWidth, kBottleneckWidth);
  b.bn2 = load_norm(s, "unet.bottleneck.bn2", kBottleneckWidth);
  in = kBottleneckWidth;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = up_prefix(i);
    const auto out = kUpWidths[i];
    const auto skip = kDownWidths[2 - i];
    auto& u = m.unet.up[i];
    u.convt = load_kernel(s, p + ".convt", 2, 2, 1, in, out);
    u.conv1 = load_kernel(s, p + ".conv1", 3, 1, 1, out + skip, out);
    u.bn1 = load_norm(s, p + ".bn1", out);
    u.conv2 = load_kernel(s, p + ".conv2", 3, 1, 1, out, out);
    u.bn2 = load_norm(s, p + ".bn2", out);
    in = out;
  }
  m.unet.head = load_kernel(s, "unet.head", 1, 1, 1, in, 1);
  return m;
}

ParamLayout DecompactionModel::layout(std::size_t channels) {
  check_compact_channels(channels);
  ParamLayout l;
  l.add_linear("se_reduce", channels, 48);
  l.add_linear("se_expand", 48, kFeatureChannels);
  l.add_kernel("expand", 1, channels, kFeatureChannels);
  return l;
}

DecompactionModel DecompactionModel::from_store(const ParamStore& s, std::size_t channels) {
  layout(channels).validate(s);
  DecompactionModel m;
  m.channels = channels;
  m.se_reduce = load_linear(s, "se_reduce", channels, 48, Activation::relu);
  m.se_expand = load_linear(s, "se_expand", 48, kFeatureChannels, Activation::sigmoid);
  m.expand = load_kernel(s, "expand", 1, 1, 1, channels, kFeatureChannels);
  return m;
}

std::vector<double> se_gate(const LinearLayer& reduce, const LinearLayer& expand, const Matrix& attrs) {
  const auto pooled = global_average_pool(attrs);
  const Matrix descriptor(1, pooled.size(), pooled);
  return fc_forward(expand, fc_forward(reduce, descriptor)).data();
}

SparseVoxelTensor channel_compact(const SparseVoxelTensor& f4, const CompactionModel& model) {
  if (f4.channels() != kFeatureChannels)
    throw ShapeError("channel_compact: expected 64 attribute channels, got " + std::to_string(f4.channels()));
  if (f4.empty()) return SparseVoxelTensor::empty(f4.grid(), model.channels);
  const auto gate = se_gate(model.se_reduce, model.se_expand, f4.attrs());
  return submanifold_conv(f4.with_attrs(scale_columns(f4.attrs(), gate)), model.reduce);
}

std::vector<double> spatial_probs(const SparseVoxelTensor& fc, const CompactionModel& model) {
  if (fc.channels() != model.channels)
    throw ShapeError("spatial_probs: expected " + std::to_string(model.channels) + " channels, got " +
                     std::to_string(fc.channels()));
  const auto& g = fc.grid();
  if (g.l < kMinUNetExtent || g.w < kMinUNetExtent || g.h < kMinUNetExtent)
    throw ConfigError("spatial_probs: grid extents must be at least 8 for three stride-2 stages");
  if (fc.empty()) return {};

  const auto& net = model.unet;
  std::array<SparseVoxelTensor, 3> skips;
  SparseVoxelTensor x = fc;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = net.down[i];
    auto a = conv_bn_act(x, d.conv1, d.bn1, Activation::relu);
    a = conv_bn_act(a, d.conv2, d.bn2, Activation::relu);
    x = strided_conv(a, d.conv3);
    skips[i] = std::move(a);
  }
  x = conv_bn_act(x, net.bottleneck.conv1, net.bottleneck.bn1, Activation::relu);
  x = conv_bn_act(x, net.bottleneck.conv2, net.bottleneck.bn2, Activation::relu);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& u = net.up[i];
    const auto& skip = skips[2 - i];
    auto y = transposed_conv_onto(x, u.convt, skip.coords(), skip.grid());
    y = concat_channels(y, skip);
    y = conv_bn_act(y, u.conv1, u.bn1, Activation::relu);
    x = conv_bn_act(y, u.conv2, u.bn2, Activation::relu);
  }
  const auto logits = submanifold_conv(x, net.head);
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = activate(Activation::sigmoid, logits.attrs()(i, 0));
  return probs;
}

namespace {
CompactedFeature select_rows(const SparseVoxelTensor& fc, const std::vector<double>& probs,
                             std::vector<std::size_t> rows, bool failsafe) {
  std::sort(rows.begin(), rows.end());
  std::vector<Coord> coords;
  Matrix attrs(rows.size(), fc.channels());
  CompactedFeature out;
  out.failsafe = failsafe;
  coords.reserve(rows.size());
  out.probs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    coords.push_back(fc.coords()[rows[i]]);
    auto src = fc.attrs().row(rows[i]);
    std::copy(src.begin(), src.end(), attrs.row(i).begin());
    out.probs.push_back(probs[rows[i]]);
  }
  out.tensor = SparseVoxelTensor(std::move(coords), std::move(attrs), fc.grid());
  return out;
}
}  // namespace

CompactedFeature spatial_compact_infer(const SparseVoxelTensor& fc, const std::vector<double>& probs,
                                       double threshold, std::size_t failsafe) {
  if (probs.size() != fc.size()) throw ShapeError("spatial_compact_infer: probs not aligned with voxels");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > threshold) kept.push_back(i);
  if (!kept.empty() || fc.empty()) return select_rows(fc, probs, std::move(kept), false);

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  order.resize(std::min(failsafe, order.size()));
  return select_rows(fc, probs, std::move(order), true);
}

SparseVoxelTensor spatial_compact_train_apply(const SparseVoxelTensor& fc, const std::vector<double>& probs) {
  if (probs.size() != fc.size()) throw ShapeError("spatial_compact_train_apply: probs not aligned");
  Matrix a = fc.attrs();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (double& v : a.row(r)) v *= probs[r];
  return fc.with_attrs(std::move(a));
}

SparseVoxelTensor channel_decompact(const SparseVoxelTensor& received, const DecompactionModel& model) {
  if (received.channels() != model.channels)
    throw ShapeError("channel_decompact: expected " + std::to_string(model.channels) +
                     " channels, got " + std::to_string(received.channels()));
  if (received.empty()) return SparseVoxelTensor::empty(received.grid(), kFeatureChannels);
  const auto gate = se_gate(model.se_reduce, model.se_expand, received.attrs());
  const auto expanded = submanifold_conv(received, model.expand);
  return expanded.with_attrs(scale_columns(expanded.attrs(), gate));
}

}  // namespace fpc
