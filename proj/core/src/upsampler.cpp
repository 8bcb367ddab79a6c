#include "fpc/upsampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include <boost/random/normal_distribution.hpp>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"
#include "model_io.hpp"

namespace fpc {

namespace {
const char* domain_name(Branch b) { return b == Branch::geometry ? "geometry" : "attribute"; }
}  // namespace

void NormStats::validate() const {
  if (mean.size() != std.size()) throw InvariantError("norm stats: mean/std length differ");
  for (double s : std)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvariantError("norm stats: std must be positive and finite");
  for (double m : mean)
    if (!std::isfinite(m)) throw InvariantError("norm stats: mean must be finite");
}

NormStats NormStats::identity(std::size_t channels, Branch domain) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), domain};
}

NormStats NormStats::compute(const Matrix& values, Branch domain) {
  if (values.rows() == 0) throw EmptyInputError("norm stats: no rows");
  const auto mean = global_average_pool(values);
  std::vector<double> var(values.cols(), 0.0);
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double d = values(r, c) - mean[c];
      var[c] += d * d;
    }
  NormStats s{mean, std::vector<double>(values.cols()), domain};
  for (std::size_t c = 0; c < values.cols(); ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(values.rows()));
    s.std[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix normalize(const Matrix& values, const NormStats& stats) {
  stats.validate();
  if (values.cols() != stats.channels()) throw ShapeError("normalize: channel count mismatch");
  Matrix out = values;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - stats.mean[c]) / stats.std[c];
  return out;
}

Matrix denormalize(const Matrix& values, const NormStats& stats) {
  stats.validate();
  if (values.cols() != stats.channels()) throw ShapeError("denormalize: channel count mismatch");
  Matrix out = values;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * stats.std[c] + stats.mean[c];
  return out;
}

void store_stats(ParamStore& store, const NormStats& stats) {
  stats.validate();
  const std::string p = std::string("stats.") + domain_name(stats.domain);
  store.set(p + ".mean", from_vector(stats.mean));
  store.set(p + ".std", from_vector(stats.std));
}

NormStats load_stats(const ParamStore& store, Branch domain, std::size_t channels) {
  const std::string p = std::string("stats.") + domain_name(domain);
  NormStats s{store.require(p + ".mean", {channels}).data, store.require(p + ".std", {channels}).data, domain};
  s.validate();
  return s;
}

// Model -----------------------------------------------------------------------

namespace {

constexpr std::size_t kG = UpsamplerModel::kGeometryWidth;
constexpr std::size_t kA = UpsamplerModel::kAttributeWidth;

void add_stage(ParamLayout& l, const std::string& p) {
  l.add_kernel(p + ".dilated", 3, kA, kA);
  l.add_norm(p + ".bn1", kA);
  l.add_kernel(p + ".sub", 3, kA, kA);
  l.add_norm(p + ".bn2", kA);
}

PromptStage load_stage(const ParamStore& s, const std::string& p) {
  return {detail::load_kernel(s, p + ".dilated", 3, 1, 2, kA, kA), detail::load_kernel(s, p + ".sub", 3, 1, 1, kA, kA),
          detail::load_norm(s, p + ".bn1", kA), detail::load_norm(s, p + ".bn2", kA)};
}

}  // namespace

ParamLayout UpsamplerModel::layout() {
  ParamLayout l;
  add_stage(l, "prompt.stage1");
  add_stage(l, "prompt.stage2");
  l.add_linear("fuse_g.fc1", 2 * kG, kG);
  l.add_linear("fuse_g.fc2", kG, kG);
  l.add_linear("fuse_a.fc1", 2 * kA, kA);
  l.add_linear("fuse_a.fc2", kA, kA);
  l.add_linear("time_g.fc1", 1, kG);
  l.add_linear("time_g.fc2", kG, kG);
  l.add_linear("time_a.fc1", 1, kA);
  l.add_linear("time_a.fc2", kA, kA);
  for (int i = 1; i <= 3; ++i) {
    l.add_kernel("pred_g.conv" + std::to_string(i), 3, kG, kG);
    l.add_kernel("pred_a.conv" + std::to_string(i), 3, kA, kA);
  }
  return l;
}

UpsamplerModel UpsamplerModel::from_store(const ParamStore& s) {
  UpsamplerModel m;
  m.stage1 = load_stage(s, "prompt.stage1");
  m.stage2 = load_stage(s, "prompt.stage2");
  m.fuse_g = {detail::load_linear(s, "fuse_g.fc1", 2 * kG, kG, Activation::relu),
              detail::load_linear(s, "fuse_g.fc2", kG, kG, Activation::none)};
  m.fuse_a = {detail::load_linear(s, "fuse_a.fc1", 2 * kA, kA, Activation::relu),
              detail::load_linear(s, "fuse_a.fc2", kA, kA, Activation::none)};
  m.time_g = {detail::load_linear(s, "time_g.fc1", 1, kG, Activation::silu),
              detail::load_linear(s, "time_g.fc2", kG, kG, Activation::none)};
  m.time_a = {detail::load_linear(s, "time_a.fc1", 1, kA, Activation::silu),
              detail::load_linear(s, "time_a.fc2", kA, kA, Activation::none)};
  for (int i = 0; i < 3; ++i) {
    const auto n = std::to_string(i + 1);
    m.pred_g[static_cast<std::size_t>(i)] = detail::load_kernel(s, "pred_g.conv" + n, 3, 1, 1, kG, kG);
    m.pred_a[static_cast<std::size_t>(i)] = detail::load_kernel(s, "pred_a.conv" + n, 3, 1, 1, kA, kA);
  }
  return m;
}

void DiffusionConfig::validate() const {
  if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
}

// Stages ----------------------------------------------------------------------

namespace {

SparseVoxelTensor run_stage(const SparseVoxelTensor& x, const PromptStage& s) {
  auto y = dilated_conv(x, s.dilated);
  y = apply_activation(y.with_attrs(affine_norm(s.bn1, y.attrs())), Activation::relu);
  return detail::conv_bn_act(y, s.sub, s.bn2, Activation::relu);
}

}  // namespace

SparseVoxelTensor prompt_generate(const SparseVoxelTensor& f4hat, const UpsamplerModel& model, UpscaleMode mode) {
  if (f4hat.channels() != kA)
    throw ShapeError("prompt_generate: expected 64 channels, got " + std::to_string(f4hat.channels()));
  const auto s1 = run_stage(f4hat, model.stage1);
  return run_stage(geometry_upscale(s1, mode), model.stage2);
}

Matrix coords_matrix(const std::vector<Coord>& coords) {
  Matrix m(coords.size(), 3);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    m(i, 0) = coords[i].u;
    m(i, 1) = coords[i].v;
    m(i, 2) = coords[i].w;
  }
  return m;
}

Matrix conditional_fuse(const Matrix& prompt_part, const Matrix& noisy_part, Branch branch,
                        const UpsamplerModel& model) {
  const std::size_t w = branch == Branch::geometry ? kG : kA;
  if (prompt_part.rows() != noisy_part.rows()) throw ShapeError("conditional_fuse: row counts differ");
  if (prompt_part.cols() != w || noisy_part.cols() != w)
    throw ShapeError(std::string("conditional_fuse: wrong widths for the ") + domain_name(branch) + " branch");
  const auto& f = branch == Branch::geometry ? model.fuse_g : model.fuse_a;
  return fc_forward(f.fc2, fc_forward(f.fc1, hconcat(prompt_part, noisy_part)));
}

std::vector<double> time_embedding(int t, int steps, Branch branch, const UpsamplerModel& model) {
  if (t < 0) throw ConfigError("time_embedding: negative step");
  if (steps < 1) throw ConfigError("time_embedding: steps must be >= 1");
  const auto& e = branch == Branch::geometry ? model.time_g : model.time_a;
  const Matrix in(1, 1, static_cast<double>(t) / steps);
  return fc_forward(e.fc2, fc_forward(e.fc1, in)).data();
}

Matrix predict_noise(Branch branch, const SparseVoxelTensor& fused, const std::vector<double>& t_embed,
                     const UpsamplerModel& model) {
  const std::size_t w = branch == Branch::geometry ? kG : kA;
  if (fused.channels() != w || t_embed.size() != w)
    throw ShapeError(std::string("predict_noise: wrong width for the ") + domain_name(branch) + " branch");
  Matrix a = fused.attrs();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < w; ++c) a(r, c) += t_embed[c];
  const auto& convs = branch == Branch::geometry ? model.pred_g : model.pred_a;
  auto x = fused.with_attrs(std::move(a));
  x = apply_activation(submanifold_conv(x, convs[0]), Activation::relu);
  x = apply_activation(submanifold_conv(x, convs[1]), Activation::relu);
  return submanifold_conv(x, convs[2]).attrs();
}

DiffusionNoise draw_diffusion_noise(std::size_t voxels, std::uint64_t noise_seed, std::uint64_t stream) {
  auto rng = make_rng(noise_seed, StreamTag::diffusion_noise, stream);
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  DiffusionNoise n{Matrix(voxels, kG), Matrix(voxels, kA)};
  for (double& v : n.geometry.data()) v = unit(rng);
  for (double& v : n.attributes.data()) v = unit(rng);
  return n;
}

SparseVoxelTensor upsample(const SparseVoxelTensor& f4hat, const UpsamplerModel& model, const NormStats& stats_g,
                           const NormStats& stats_a, const DiffusionConfig& cfg, std::uint64_t stream) {
  cfg.validate();
  if (stats_g.channels() != kG || stats_a.channels() != kA) throw ShapeError("upsample: stats widths");
  const auto prompt = prompt_generate(f4hat, model, cfg.upscale);
  const auto pg = normalize(coords_matrix(prompt.coords()), stats_g);
  const auto pa = normalize(prompt.attrs(), stats_a);

  auto noise = draw_diffusion_noise(prompt.size(), cfg.noise_seed, stream);
  Matrix xg = std::move(noise.geometry);
  Matrix xa = std::move(noise.attributes);
  for (int m = cfg.steps; m >= 1; --m) {
    const auto fg = prompt.with_attrs(conditional_fuse(pg, xg, Branch::geometry, model));
    const auto fa = prompt.with_attrs(conditional_fuse(pa, xa, Branch::attribute, model));
    const auto eg = predict_noise(Branch::geometry, fg, time_embedding(m, cfg.steps, Branch::geometry, model), model);
    const auto ea = predict_noise(Branch::attribute, fa, time_embedding(m, cfg.steps, Branch::attribute, model), model);
    for (std::size_t i = 0; i < xg.size(); ++i) xg.data()[i] -= eg.data()[i];
    for (std::size_t i = 0; i < xa.size(); ++i) xa.data()[i] -= ea.data()[i];
  }
  const auto geom = denormalize(xg, stats_g);
  const auto attrs = hconcat(geom, denormalize(xa, stats_a));
  if (cfg.output == GeometryOutput::anchored) return prompt.with_attrs(attrs);

  const Grid& g = prompt.grid();
  std::vector<Coord> coords;
  std::vector<std::size_t> rows;
  std::unordered_set<std::uint64_t> seen;
  auto clip = [](double v, std::int32_t extent) {
    const double r = std::round(v);
    if (!(r >= 0.0)) return 0;  // also catches NaN
    return static_cast<std::int32_t>(std::min<double>(r, extent - 1));
  };
  for (std::size_t r = 0; r < geom.rows(); ++r) {
    const Coord c{clip(geom(r, 0), g.l), clip(geom(r, 1), g.w), clip(geom(r, 2), g.h)};
    if (seen.insert(coord_key(c)).second) {
      coords.push_back(c);
      rows.push_back(r);
    }
  }
  Matrix out(rows.size(), attrs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(attrs.row(rows[i]).begin(), attrs.cols(), out.row(i).begin());
  return SparseVoxelTensor::canonicalize(std::move(coords), std::move(out), g);
}

std::pair<NormStats, NormStats> calibrate_stats(const std::vector<SparseVoxelTensor>& prompts) {
  std::size_t n = 0;
  for (const auto& p : prompts) {
    if (p.channels() != kA) throw ShapeError("calibrate_stats: prompts must have 64 channels");
    n += p.size();
  }
  if (n == 0) throw EmptyInputError("calibrate_stats: no voxels");
  Matrix g(n, kG), a(n, kA);
  std::size_t r = 0;
  for (const auto& p : prompts) {
    const auto cm = coords_matrix(p.coords());
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      std::copy_n(cm.row(i).begin(), kG, g.row(r).begin());
      std::copy_n(p.attrs().row(i).begin(), kA, a.row(r).begin());
    }
  }
  return {NormStats::compute(g, Branch::geometry), NormStats::compute(a, Branch::attribute)};
}

}  // namespace fpc
