#include "fpc/scene.hpp"

#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"
#include "fpc/source_codec.hpp"

namespace fpc {

void SceneGenConfig::validate() const {
  spec.validate();
  if (n_objects < 0) throw ConfigError("scene: n_objects must be >= 0");
  for (int a = 0; a < 3; ++a) {
    if (!(box_min[a] > 0.0) || !(box_max[a] >= box_min[a]))
      throw ConfigError("scene: box size range must satisfy 0 < min <= max");
    if (box_min[a] > spec.extent[a]) throw ConfigError("scene: minimum box size exceeds the scene extent");
  }
  if (!(fill > 0.0 && fill <= 1.0)) throw ConfigError("scene: fill must be in (0, 1]");
  if (!(background >= 0.0 && background <= 1.0)) throw ConfigError("scene: background must be in [0, 1]");
  if (!(offset_scale >= 0.0)) throw ConfigError("scene: offset_scale must be >= 0");
  if (max_attempts < 1) throw ConfigError("scene: max_attempts must be >= 1");
}

namespace {

bool intersects(const BoundingBox& a, const BoundingBox& b) {
  for (int k = 0; k < 3; ++k)
    if (std::abs(a.center[k] - b.center[k]) >= 0.5 * (a.size[k] + b.size[k])) return false;
  return true;
}

}  // namespace

Scene gen_scene(const SceneGenConfig& cfg, std::uint64_t seed, std::uint64_t frame) {
  cfg.validate();
  auto rng = make_rng(seed, StreamTag::scene, frame);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  const auto& spec = cfg.spec;
  const Grid grid = spec.grid;

  Scene scene;
  int attempts = 0;
  while (static_cast<int>(scene.boxes.size()) < cfg.n_objects) {
    if (attempts++ >= cfg.max_attempts)
      throw GenerationError("could not place " + std::to_string(cfg.n_objects) + " boxes in " +
                            std::to_string(cfg.max_attempts) + " attempts");
    BoundingBox b;
    for (int k = 0; k < 3; ++k) {
      b.size[k] = std::min(spec.extent[k], cfg.box_min[k] + (cfg.box_max[k] - cfg.box_min[k]) * unit(rng));
      b.center[k] = 0.5 * b.size[k] + (spec.extent[k] - b.size[k]) * unit(rng);
    }
    bool clear = true;
    for (const auto& o : scene.boxes) clear = clear && !intersects(b, o);
    if (clear) scene.boxes.push_back(b);
  }

  // owner[i] = box index + 1 for voxels inside a box, 0 for background.
  const auto index = [&](const Coord& c) {
    return (static_cast<std::size_t>(c.u) * grid.w + c.v) * grid.h + c.w;
  };
  std::vector<int> owner(grid.volume(), 0);
  std::vector<char> active(grid.volume(), 0);
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const auto members = preliminary_voxels(scene.boxes[b], spec).relevant;
    if (members.empty()) throw GenerationError("box " + std::to_string(b) + " covers no voxel");
    bool any = false;
    for (const auto& c : members) {
      if (owner[index(c)] != 0) continue;
      owner[index(c)] = static_cast<int>(b) + 1;
      if (unit(rng) < cfg.fill) active[index(c)] = any = true;
    }
    if (!any) {
      std::size_t pick = static_cast<std::size_t>(unit(rng) * members.size());
      active[index(members[std::min(pick, members.size() - 1)])] = 1;
    }
  }

  std::vector<std::vector<double>> offsets(scene.boxes.size() + 1, std::vector<double>(kFeatureChannels, 0.0));
  for (std::size_t b = 1; b < offsets.size(); ++b)
    for (double& v : offsets[b]) v = cfg.offset_scale * gauss(rng);

  std::vector<Coord> coords;
  std::vector<int> owners;
  for (std::int32_t u = 0; u < grid.l; ++u)
    for (std::int32_t v = 0; v < grid.w; ++v)
      for (std::int32_t w = 0; w < grid.h; ++w) {
        const Coord c{u, v, w};
        const auto i = index(c);
        if (owner[i] == 0 && unit(rng) < cfg.background) active[i] = 1;
        if (active[i]) {
          coords.push_back(c);
          owners.push_back(owner[i]);
        }
      }

  Matrix attrs(coords.size(), kFeatureChannels);
  for (std::size_t r = 0; r < coords.size(); ++r)
    for (std::size_t c = 0; c < kFeatureChannels; ++c)
      attrs(r, c) = offsets[static_cast<std::size_t>(owners[r])][c] + gauss(rng);
  scene.features = SparseVoxelTensor(std::move(coords), std::move(attrs), grid);
  return scene;
}

}  // namespace fpc
