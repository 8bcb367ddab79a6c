#include "fpc/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>

#include "fpc/error.hpp"

namespace fpc {

void SceneSpec::validate() const {
  for (double e : extent)
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("scene extent must be positive");
  if (grid.l <= 0 || grid.w <= 0 || grid.h <= 0) throw ConfigError("feature grid must be positive");
  if (expansion < 0) throw ConfigError("mask expansion must be non-negative");
}

bool VoxelMask::contains(const Coord& c) const {
  return std::binary_search(relevant.begin(), relevant.end(), c);
}

namespace {

// Indices i in [0, extent) with i / extent inside [lo, hi]. The ratio is
// evaluated literally so boundary ties match a direct scan.
std::vector<std::int32_t> axis_members(double center, double size, double scene, std::int32_t extent,
                                       int expansion) {
  const double margin = static_cast<double>(expansion) / extent;
  const double lo = center / scene - size / (2.0 * scene) - margin;
  const double hi = center / scene + size / (2.0 * scene) + margin;
  const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(lo * extent)) - 1);
  const auto last = std::min<std::int64_t>(extent - 1, static_cast<std::int64_t>(std::ceil(hi * extent)) + 1);
  std::vector<std::int32_t> out;
  for (std::int64_t i = first; i <= last; ++i) {
    const double r = static_cast<double>(i) / extent;
    if (r >= lo && r <= hi) out.push_back(static_cast<std::int32_t>(i));
  }
  return out;
}

VoxelMask box_voxels(const BoundingBox& box, const SceneSpec& spec, int expansion) {
  spec.validate();
  for (double s : box.size)
    if (!(s > 0.0)) throw ConfigError("bounding box sizes must be positive");
  const auto us = axis_members(box.center[0], box.size[0], spec.extent[0], spec.grid.l, expansion);
  const auto vs = axis_members(box.center[1], box.size[1], spec.extent[1], spec.grid.w, expansion);
  const auto ws = axis_members(box.center[2], box.size[2], spec.extent[2], spec.grid.h, expansion);
  VoxelMask m{{}, spec.grid};
  m.relevant.reserve(us.size() * vs.size() * ws.size());
  for (auto u : us)
    for (auto v : vs)
      for (auto w : ws) m.relevant.push_back({u, v, w});
  return m;
}

}  // namespace

VoxelMask preliminary_voxels(const BoundingBox& box, const SceneSpec& spec) {
  return box_voxels(box, spec, 0);
}

VoxelMask expanded_voxels(const BoundingBox& box, const SceneSpec& spec) {
  return box_voxels(box, spec, spec.expansion);
}

VoxelMask merge_boxes(const std::vector<BoundingBox>& boxes, const SceneSpec& spec) {
  spec.validate();
  VoxelMask out{{}, spec.grid};
  for (const auto& box : boxes) {
    const auto m = expanded_voxels(box, spec);
    std::vector<Coord> merged;
    merged.reserve(out.relevant.size() + m.relevant.size());
    std::set_union(out.relevant.begin(), out.relevant.end(), m.relevant.begin(), m.relevant.end(),
                   std::back_inserter(merged));
    out.relevant = std::move(merged);
  }
  return out;
}

std::vector<int> sparse_labels(const VoxelMask& mask, const std::vector<Coord>& active) {
  std::vector<int> labels(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) labels[i] = mask.contains(active[i]) ? 1 : 0;
  return labels;
}

double focal_loss(const std::vector<double>& probs, const std::vector<int>& labels, double gamma) {
  if (probs.size() != labels.size()) throw ShapeError("focal_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kFocalEpsilon, 1.0 - kFocalEpsilon);
    if (labels[i] != 0)
      loss -= std::pow(1.0 - p, gamma) * std::log(p);
    else
      loss -= std::pow(p, gamma) * std::log(1.0 - p);
  }
  return loss;
}

std::vector<BoundingBox> load_boxes(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<BoundingBox> boxes;
  BoundingBox b;
  while (f >> b.center[0] >> b.center[1] >> b.center[2] >> b.size[0] >> b.size[1] >> b.size[2])
    boxes.push_back(b);
  if (!f.eof()) throw IoError("box file: malformed line after " + std::to_string(boxes.size()) + " boxes");
  return boxes;
}

void save_boxes(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << std::setprecision(17);
  for (const auto& b : boxes)
    f << b.center[0] << ' ' << b.center[1] << ' ' << b.center[2] << ' ' << b.size[0] << ' '
      << b.size[1] << ' ' << b.size[2] << '\n';
}

SparseVoxelTensor mask_to_tensor(const VoxelMask& mask) {
  return SparseVoxelTensor(mask.relevant, Matrix(mask.relevant.size(), 1, 1.0), mask.grid);
}

}  // namespace fpc
