#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fpc/mask.hpp"

namespace fpc {

/// Synthetic stand-in for a detector feature map: box-shaped objects filled
/// densely with voxels over a sparse background.
struct SceneGenConfig {
  SceneSpec spec{{51.2, 51.2, 4.0}, {64, 64, 8}, 16};
  int n_objects = 3;
  std::array<double, 3> box_min{3.0, 3.0, 1.5};  // meters
  std::array<double, 3> box_max{8.0, 8.0, 3.0};
  double fill = 0.5;           // voxel probability inside a box
  double background = 0.02;    // voxel probability elsewhere
  double offset_scale = 1.0;   // std of the per-box attribute mean offset
  int max_attempts = 1000;     // box placements tried before giving up

  void validate() const;
};

struct Scene {
  SparseVoxelTensor features;  // 64 channels
  std::vector<BoundingBox> boxes;
};

/// Deterministic per (seed, frame). Boxes never intersect and each holds at
/// least one voxel. Throws GenerationError when the boxes cannot be placed.
Scene gen_scene(const SceneGenConfig& cfg, std::uint64_t seed, std::uint64_t frame = 0);

}  // namespace fpc
