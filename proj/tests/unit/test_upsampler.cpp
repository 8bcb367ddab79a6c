#include <algorithm>
#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "doctest.h"
#include "fpc/error.hpp"
#include "fpc/rng.hpp"
#include "fpc/upsampler.hpp"
#include "oracles.hpp"

using namespace fpc;

namespace {

constexpr std::size_t kA = UpsamplerModel::kAttributeWidth;
constexpr std::size_t kG = UpsamplerModel::kGeometryWidth;

Matrix bn_relu(const AffineNorm& n, Matrix x) {
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = oracle::relu(x(r, c) * n.scale[c] + n.shift[c]);
  return x;
}

Matrix stage_oracle(const SparseVoxelTensor& t, const PromptStage& s) {
  const auto a = bn_relu(s.bn1, oracle::dense_submanifold(t, s.dilated));
  return bn_relu(s.bn2, oracle::dense_submanifold(t.with_attrs(a), s.sub));
}

SparseVoxelTensor children_oracle(const SparseVoxelTensor& t) {
  std::vector<Coord> coords;
  std::vector<double> vals;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& p = t.coords()[i];
    for (int d = 0; d < 8; ++d) {
      coords.push_back({2 * p.u + (d >> 2), 2 * p.v + ((d >> 1) & 1), 2 * p.w + (d & 1)});
      for (std::size_t c = 0; c < t.channels(); ++c) vals.push_back(t.attrs()(i, c));
    }
  }
  return SparseVoxelTensor::canonicalize(coords, Matrix(coords.size(), t.channels(), vals),
                                         {2 * t.grid().l, 2 * t.grid().w, 2 * t.grid().h});
}

SparseVoxelTensor prompt_oracle(const SparseVoxelTensor& f, const UpsamplerModel& m) {
  const auto up = children_oracle(f.with_attrs(stage_oracle(f, m.stage1)));
  return up.with_attrs(stage_oracle(up, m.stage2));
}

// Shrinks the seeded prompt weights so 64-wide chains stay well scaled.
UpsamplerModel model_for_tests(std::uint64_t seed) {
  auto m = UpsamplerModel::seeded(seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s(0.8, 1.2), b(0.0, 0.1);
  for (auto* st : {&m.stage1, &m.stage2})
    for (auto* n : {&st->bn1, &st->bn2}) {
      for (auto& v : n->scale) v = s(rng);
      for (auto& v : n->shift) v = b(rng);
    }
  return m;
}

SparseVoxelTensor small_input(std::mt19937_64& rng, std::size_t voxels = 10) {
  std::vector<Coord> coords;
  std::uniform_int_distribution<int> u(0, 5);
  while (coords.size() < voxels) {
    const Coord c{u(rng), u(rng), u(rng) % 4};
    if (std::find(coords.begin(), coords.end(), c) == coords.end()) coords.push_back(c);
  }
  return SparseVoxelTensor::canonicalize(coords, oracle::random_matrix(voxels, kA, rng), {6, 6, 4});
}

}  // namespace

TEST_CASE("prompt generation with identity layers replicates the input") {
  auto m = UpsamplerModel::seeded(1);
  for (auto* st : {&m.stage1, &m.stage2}) {
    st->dilated = SparseKernel::identity(3, kA, 2);
    st->sub = SparseKernel::identity(3, kA);
    st->bn1 = st->bn2 = AffineNorm::identity(kA);
  }
  std::mt19937_64 rng(1);
  auto f = small_input(rng);
  f = f.with_attrs([&] {  // ReLU keeps only non-negative values intact
    Matrix a = f.attrs();
    for (double& v : a.data()) v = std::abs(v);
    return a;
  }());
  const auto p = prompt_generate(f, m);
  CHECK(p.size() == 8 * f.size());
  CHECK(p == geometry_upscale(f));
}

TEST_CASE("prompt generation equals the staged dense oracle") {
  std::mt19937_64 rng(2);
  const auto m = model_for_tests(2);
  const auto f = small_input(rng, 25);
  const auto p = prompt_generate(f, m);
  const auto want = prompt_oracle(f, m);
  REQUIRE(p.coords() == want.coords());
  CHECK(oracle::max_abs_diff(p.attrs(), want.attrs()) < 1e-10);
  CHECK(prompt_generate(f, m, UpscaleMode::scale_only).size() == f.size());
}

TEST_CASE("normalization") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_matrix(200, 5, rng, 3.0);
  for (std::size_t r = 0; r < 200; ++r) x(r, 4) = 7.0;  // constant column
  const auto st = NormStats::compute(x, Branch::attribute);
  CHECK(st.std[4] == 1.0);
  const auto z = normalize(x, st);
  const auto mean = oracle::column_means(z);
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(std::abs(mean[c]) < 1e-10);
    double v = 0;
    for (std::size_t r = 0; r < 200; ++r) v += z(r, c) * z(r, c);
    if (c < 4) CHECK(std::abs(std::sqrt(v / 200) - 1.0) < 1e-10);
  }
  CHECK(oracle::max_abs_diff(denormalize(z, st), x) < 1e-12);
  CHECK(normalize(x, NormStats::identity(5, Branch::attribute)) == x);
  CHECK_THROWS_AS(normalize(x, NormStats::identity(4, Branch::attribute)), ShapeError);
  NormStats bad = NormStats::identity(2, Branch::geometry);
  bad.std[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("stats store round trip") {
  std::mt19937_64 rng(4);
  const auto st = NormStats::compute(oracle::random_matrix(20, 3, rng), Branch::geometry);
  ParamStore s;
  store_stats(s, st);
  CHECK(s.contains("stats.geometry.mean"));
  const auto back = load_stats(s, Branch::geometry, 3);
  CHECK(back.mean == st.mean);
  CHECK(back.std == st.std);
}

TEST_CASE("conditional fusion") {
  std::mt19937_64 rng(5);
  const auto m = UpsamplerModel::seeded(5);
  const auto pg = oracle::random_matrix(9, kG, rng), ng = oracle::random_matrix(9, kG, rng);
  const auto pa = oracle::random_matrix(9, kA, rng), na = oracle::random_matrix(9, kA, rng);
  const auto g = conditional_fuse(pg, ng, Branch::geometry, m);
  const auto a = conditional_fuse(pa, na, Branch::attribute, m);
  CHECK(g.cols() == 3);
  CHECK(a.cols() == 64);
  CHECK(oracle::max_abs_diff(g, oracle::linear(m.fuse_g.fc2, oracle::linear(m.fuse_g.fc1, hconcat(pg, ng)))) < 1e-12);
  CHECK(oracle::max_abs_diff(a, oracle::linear(m.fuse_a.fc2, oracle::linear(m.fuse_a.fc1, hconcat(pa, na)))) < 1e-12);

  auto z = m;
  for (auto* l : {&z.fuse_g.fc1, &z.fuse_g.fc2}) {
    std::fill(l->weight.data().begin(), l->weight.data().end(), 0.0);
    std::fill(l->bias.begin(), l->bias.end(), 0.0);
  }
  const auto fz = conditional_fuse(pg, ng, Branch::geometry, z);
  for (double v : fz.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(conditional_fuse(pa, ng, Branch::geometry, m), ShapeError);
}

TEST_CASE("time embedding") {
  auto m = UpsamplerModel::seeded(6);
  for (auto* l : {&m.time_g.fc1, &m.time_g.fc2, &m.time_a.fc1, &m.time_a.fc2})
    for (double& b : l->bias) b = 0.1;
  CHECK(time_embedding(1, 4, Branch::geometry, m) == time_embedding(1, 4, Branch::geometry, m));
  CHECK(time_embedding(1, 4, Branch::geometry, m).size() == 3);
  CHECK(time_embedding(1, 4, Branch::attribute, m).size() == 64);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = UpsamplerModel::seeded(seed);
    CHECK(time_embedding(1, 4, Branch::attribute, s) != time_embedding(3, 4, Branch::attribute, s));
  }
  const Matrix t(1, 1, 0.25);
  const auto want = oracle::linear(m.time_g.fc2, oracle::linear(m.time_g.fc1, t));
  CHECK(oracle::max_abs_diff(Matrix(1, 3, time_embedding(1, 4, Branch::geometry, m)), want) < 1e-14);

  auto z = m;
  for (auto* l : {&z.time_g.fc1, &z.time_g.fc2}) std::fill(l->weight.data().begin(), l->weight.data().end(), 0.0);
  CHECK(time_embedding(2, 4, Branch::geometry, z) == z.time_g.fc2.bias);
}

TEST_CASE("noise prediction") {
  std::mt19937_64 rng(7);
  const auto m = UpsamplerModel::seeded(7);
  const auto t = oracle::random_sparse({16, 16, 8}, 0.05, kA, rng);
  const auto emb = time_embedding(1, 1, Branch::attribute, m);
  const auto e = predict_noise(Branch::attribute, t, emb, m);
  CHECK(e.cols() == 64);

  Matrix x = t.attrs();
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < kA; ++c) x(r, c) += emb[c];
  auto relu = [](Matrix a) {
    for (double& v : a.data()) v = oracle::relu(v);
    return a;
  };
  x = relu(oracle::dense_submanifold(t.with_attrs(x), m.pred_a[0]));
  x = relu(oracle::dense_submanifold(t.with_attrs(x), m.pred_a[1]));
  x = oracle::dense_submanifold(t.with_attrs(x), m.pred_a[2]);
  CHECK(oracle::max_abs_diff(e, x) < 1e-10);

  const auto tg = t.with_attrs(oracle::random_matrix(t.size(), kG, rng));
  CHECK(predict_noise(Branch::geometry, tg, time_embedding(1, 1, Branch::geometry, m), m).cols() == 3);

  auto z = m;
  for (auto& k : z.pred_g) {
    std::fill(k.weights.begin(), k.weights.end(), 0.0);
    std::fill(k.bias.begin(), k.bias.end(), 0.0);
  }
  const auto pz = predict_noise(Branch::geometry, tg, {1, 2, 3}, z);
  for (double v : pz.data()) CHECK(v == 0.0);
}

TEST_CASE("upsample with zero predictors returns the initial noise") {
  std::mt19937_64 rng(8);
  auto m = UpsamplerModel::seeded(8);
  for (auto* set : {&m.pred_g, &m.pred_a})
    for (auto& k : *set) {
      std::fill(k.weights.begin(), k.weights.end(), 0.0);
      std::fill(k.bias.begin(), k.bias.end(), 0.0);
    }
  const auto f = small_input(rng);
  DiffusionConfig cfg;
  cfg.noise_seed = 77;
  const auto out = upsample(f, m, NormStats::identity(3, Branch::geometry), NormStats::identity(64, Branch::attribute),
                            cfg, 4);
  REQUIRE(out.size() == 8 * f.size());
  REQUIRE(out.channels() == 67);
  const auto noise = draw_diffusion_noise(out.size(), 77, 4);
  CHECK(column_slice(out.attrs(), 0, 3) == noise.geometry);
  CHECK(column_slice(out.attrs(), 3, 64) == noise.attributes);
}

TEST_CASE("single-step upsample on ten voxels equals the oracle") {
  std::mt19937_64 rng(9);
  const auto m = model_for_tests(9);
  const auto f = small_input(rng);
  const NormStats sg{{5, 5, 3}, {2, 2.5, 1.5}, Branch::geometry};
  NormStats sa = NormStats::identity(kA, Branch::attribute);
  for (std::size_t c = 0; c < kA; ++c) {
    sa.mean[c] = 0.01 * double(c);
    sa.std[c] = 0.5 + 0.01 * double(c);
  }
  DiffusionConfig cfg;
  cfg.noise_seed = 31;
  const auto out = upsample(f, m, sg, sa, cfg, 2);

  const auto prompt = prompt_oracle(f, m);
  const std::size_t n = prompt.size();
  // noise: geometry block first, then attributes, from the same stream
  auto gen = make_rng(31, StreamTag::diffusion_noise, 2);
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  Matrix xg(n, kG), xa(n, kA);
  for (double& v : xg.data()) v = unit(gen);
  for (double& v : xa.data()) v = unit(gen);

  Matrix pg(n, kG), pa(n, kA);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& c = prompt.coords()[r];
    const double xyz[3] = {double(c.u), double(c.v), double(c.w)};
    for (std::size_t j = 0; j < kG; ++j) pg(r, j) = (xyz[j] - sg.mean[j]) / sg.std[j];
    for (std::size_t j = 0; j < kA; ++j) pa(r, j) = (prompt.attrs()(r, j) - sa.mean[j]) / sa.std[j];
  }
  auto branch = [&](const Matrix& p, const Matrix& noisy, const FusionBlock& fuse, const TimeEmbedding& te,
                    const std::array<SparseKernel, 3>& convs) {
    auto x = oracle::linear(fuse.fc2, oracle::linear(fuse.fc1, hconcat(p, noisy)));
    const auto emb = oracle::linear(te.fc2, oracle::linear(te.fc1, Matrix(1, 1, 1.0)));
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) += emb(0, c);
    for (int i = 0; i < 3; ++i) {
      x = oracle::dense_submanifold(prompt.with_attrs(x), convs[i]);
      if (i < 2)
        for (double& v : x.data()) v = oracle::relu(v);
    }
    Matrix out = noisy;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= x.data()[i];
    return out;
  };
  const auto dg = branch(pg, xg, m.fuse_g, m.time_g, m.pred_g);
  const auto da = branch(pa, xa, m.fuse_a, m.time_a, m.pred_a);

  REQUIRE(out.coords() == prompt.coords());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < kG; ++j)
      CHECK(out.attrs()(r, j) == doctest::Approx(dg(r, j) * sg.std[j] + sg.mean[j]).epsilon(1e-10));
    for (std::size_t j = 0; j < kA; ++j)
      CHECK(out.attrs()(r, kG + j) == doctest::Approx(da(r, j) * sa.std[j] + sa.mean[j]).epsilon(1e-10));
  }
}

TEST_CASE("upsample output modes and determinism") {
  std::mt19937_64 rng(10);
  const auto m = model_for_tests(10);
  const auto f = small_input(rng);
  const auto [sg, sa] = calibrate_stats({prompt_generate(f, m)});
  DiffusionConfig cfg;
  cfg.steps = 3;
  const auto a = upsample(f, m, sg, sa, cfg, 1);
  CHECK(a == upsample(f, m, sg, sa, cfg, 1));
  CHECK(a.coords() == prompt_generate(f, m).coords());
  CHECK_FALSE(a == upsample(f, m, sg, sa, cfg, 2));

  cfg.output = GeometryOutput::free;
  const auto fr = upsample(f, m, sg, sa, cfg, 1);
  CHECK(fr.size() <= a.size());
  CHECK(fr.size() >= 1);
  CHECK(std::is_sorted(fr.coords().begin(), fr.coords().end()));
  for (const auto& c : fr.coords()) CHECK(fr.grid().contains(c));

  cfg.steps = 0;
  CHECK_THROWS_AS(upsample(f, m, sg, sa, cfg, 1), ConfigError);
}

TEST_CASE("upsampler layout") {
  const auto s = UpsamplerModel::layout().init(1);
  CHECK(s.at("prompt.stage1.dilated.w").shape == Shape{27, 64, 64});
  CHECK(s.at("fuse_g.fc1.w").shape == Shape{6, 3});
  CHECK(s.at("fuse_a.fc1.w").shape == Shape{128, 64});
  CHECK(s.at("time_a.fc1.w").shape == Shape{1, 64});
  CHECK(s.at("pred_g.conv3.w").shape == Shape{27, 3, 3});
}
