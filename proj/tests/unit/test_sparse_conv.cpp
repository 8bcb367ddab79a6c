#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fpc/error.hpp"
#include "fpc/sparse_conv.hpp"
#include "oracles.hpp"

using namespace fpc;

TEST_CASE("tensor invariants") {
  const Grid g{4, 4, 4};
  CHECK_THROWS_AS(SparseVoxelTensor({{1, 0, 0}, {0, 0, 0}}, Matrix(2, 1), g), InvariantError);
  CHECK_THROWS_AS(SparseVoxelTensor({{0, 0, 0}, {0, 0, 0}}, Matrix(2, 1), g), InvariantError);
  CHECK_THROWS_AS(SparseVoxelTensor({{4, 0, 0}}, Matrix(1, 1), g), InvariantError);
  CHECK_THROWS_AS(SparseVoxelTensor({{0, 0, 0}}, Matrix(2, 1), g), Error);

  const auto t = SparseVoxelTensor::canonicalize({{1, 0, 0}, {0, 0, 1}}, Matrix::from_rows({{1}, {2}}), g);
  CHECK(t.coords() == std::vector<Coord>{{0, 0, 1}, {1, 0, 0}});
  CHECK(t.attrs()(0, 0) == 2.0);
}

TEST_CASE("tensor text round trip") {
  std::mt19937_64 rng(1);
  const auto t = oracle::random_sparse({5, 6, 7}, 0.2, 3, rng);
  std::stringstream ss;
  write_tensor_text(ss, t);
  CHECK(read_tensor_text(ss) == t);
}

TEST_CASE("voxelize") {
  const Grid g{4, 4, 4};
  SUBCASE("two points in one voxel average") {
    const auto t = voxelize(Matrix::from_rows({{0.1, 0.1, 0.1, 0.0}, {0.9, 0.2, 0.3, 2.0}}), {1, 1, 1}, g);
    REQUIRE(t.size() == 1);
    CHECK(t.attrs()(0, 0) == 1.0);
  }
  SUBCASE("one point per voxel keeps attributes") {
    std::vector<std::vector<double>> rows;
    for (int u = 0; u < 4; ++u)
      for (int v = 0; v < 4; ++v) rows.push_back({u * 0.5 + 0.25, v * 0.5 + 0.25, 0.1, double(u * 4 + v)});
    const auto t = voxelize(Matrix::from_rows(rows), {0.5, 0.5, 0.5}, g);
    REQUIRE(t.size() == 16);
    for (std::size_t i = 0; i < 16; ++i)
      CHECK(t.attrs()(i, 0) == double(t.coords()[i].u * 4 + t.coords()[i].v));
  }
  SUBCASE("random points match bucket-and-average") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(0.0, 8.0);
    const Grid big{16, 16, 16};
    Matrix pts(10000, 5);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      for (int c = 0; c < 3; ++c) pts(i, c) = pos(rng);
      pts(i, 3) = pos(rng);
      pts(i, 4) = -pos(rng);
    }
    std::map<Coord, std::pair<std::vector<double>, int>> buckets;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const Coord k{int(std::floor(pts(i, 0) / 0.5)), int(std::floor(pts(i, 1) / 0.5)), int(std::floor(pts(i, 2) / 0.5))};
      auto& b = buckets[k];
      if (b.first.empty()) b.first.assign(2, 0.0);
      b.first[0] += pts(i, 3);
      b.first[1] += pts(i, 4);
      ++b.second;
    }
    const auto t = voxelize(pts, {0.5, 0.5, 0.5}, big);
    REQUIRE(t.size() == buckets.size());
    std::size_t i = 0;
    for (const auto& [k, b] : buckets) {
      CHECK(t.coords()[i] == k);
      CHECK(t.attrs()(i, 0) == b.first[0] / b.second);
      CHECK(t.attrs()(i, 1) == b.first[1] / b.second);
      ++i;
    }
  }
  CHECK_THROWS_AS(voxelize(Matrix::from_rows({{9.0, 0.0, 0.0, 1.0}}), {1, 1, 1}, g), InvariantError);
}

TEST_CASE("submanifold identity and isolated voxel") {
  std::mt19937_64 rng(4);
  const auto t = oracle::random_sparse({8, 8, 8}, 0.1, 3, rng);
  CHECK(submanifold_conv(t, SparseKernel::identity(1, 3)) == t);
  CHECK(submanifold_conv(t, SparseKernel::identity(3, 3)) == t);

  const SparseVoxelTensor single({{3, 3, 3}}, Matrix::from_rows({{1.0, -2.0}}), {8, 8, 8});
  const auto k = oracle::random_kernel(3, 1, 1, 2, 4, rng);
  const auto out = submanifold_conv(single, k);
  const auto center = k.tap(13);
  for (std::size_t o = 0; o < 4; ++o)
    CHECK(out.attrs()(0, o) == doctest::Approx(k.bias[o] + center[0 * 4 + o] * 1.0 + center[1 * 4 + o] * -2.0));
}

TEST_CASE("submanifold and dilated convs match the dense oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = oracle::random_sparse({12, 10, 9}, 0.15, 3, rng);
    for (int dil : {1, 2, 3}) {
      const auto k = oracle::random_kernel(3, 1, dil, 3, 2, rng);
      const auto out = dil == 1 ? submanifold_conv(t, k) : dilated_conv(t, k);
      CHECK(out.coords() == t.coords());
      CHECK(oracle::max_abs_diff(out.attrs(), oracle::dense_submanifold(t, k)) < 1e-10);
    }
  }
}

TEST_CASE("strided conv") {
  const Grid g{4, 4, 4};
  SUBCASE("two voxels under one parent sum") {
    const SparseVoxelTensor t({{0, 0, 0}, {1, 1, 1}}, Matrix::from_rows({{1.0}, {2.0}}), g);
    const SparseKernel sum(2, 2, 1, 1, 1, std::vector<double>(8, 1.0));
    const auto out = strided_conv(t, sum);
    REQUIRE(out.size() == 1);
    CHECK(out.coords()[0] == Coord{0, 0, 0});
    CHECK(out.attrs()(0, 0) == 3.0);
    CHECK(out.grid() == Grid{2, 2, 2});
  }
  SUBCASE("empty stays empty") {
    const auto out = strided_conv(SparseVoxelTensor::empty(g, 2), SparseKernel(2, 2, 1, 2, 2, std::vector<double>(32)));
    CHECK(out.empty());
  }
  SUBCASE("dense oracle") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const auto t = oracle::random_sparse({11, 16, 7}, 0.1, 2, rng);
      const auto k = oracle::random_kernel(2, 2, 1, 2, 3, rng);
      const auto got = strided_conv(t, k);
      const auto want = oracle::dense_strided(t, k);
      REQUIRE(got.coords() == want.coords());
      CHECK(got.grid() == want.grid());
      CHECK(oracle::max_abs_diff(got.attrs(), want.attrs()) < 1e-10);
    }
  }
}

TEST_CASE("transposed conv") {
  SUBCASE("single voxel scatters to eight children") {
    const SparseVoxelTensor t({{0, 0, 0}}, Matrix::from_rows({{1.0}}), {2, 2, 2});
    const auto out = transposed_conv(t, SparseKernel(2, 2, 1, 1, 1, std::vector<double>(8, 1.0)));
    REQUIRE(out.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out.attrs()(i, 0) == 1.0);
    CHECK(out.grid() == Grid{4, 4, 4});
  }
  SUBCASE("empty stays empty") {
    CHECK(transposed_conv(SparseVoxelTensor::empty({2, 2, 2}, 1), SparseKernel(2, 2, 1, 1, 1, std::vector<double>(8))).empty());
  }
  SUBCASE("dense oracle, full and restricted targets") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const auto t = oracle::random_sparse({6, 5, 7}, 0.15, 2, rng);
      const auto k = oracle::random_kernel(2, 2, 1, 2, 3, rng);
      const auto got = transposed_conv(t, k);
      const auto children = oracle::children_of(t.coords());
      REQUIRE(got.coords() == children);
      CHECK(oracle::max_abs_diff(got.attrs(), oracle::dense_transposed_at(t, k, children)) < 1e-10);

      std::vector<Coord> subset;
      for (std::size_t i = 0; i < children.size(); i += 3) subset.push_back(children[i]);
      const auto onto = transposed_conv_onto(t, k, subset, got.grid());
      CHECK(onto.coords() == subset);
      CHECK(oracle::max_abs_diff(onto.attrs(), oracle::dense_transposed_at(t, k, subset)) < 1e-10);
    }
  }
  SUBCASE("strided after transposed covers the input occupancy") {
    std::mt19937_64 rng(8);
    const auto t = oracle::random_sparse({5, 5, 5}, 0.2, 1, rng);
    const SparseKernel ones(2, 2, 1, 1, 1, std::vector<double>(8, 1.0));
    const auto back = strided_conv(transposed_conv(t, ones), ones);
    for (const auto& c : t.coords()) CHECK(std::binary_search(back.coords().begin(), back.coords().end(), c));
  }
  SUBCASE("onto target without a parent") {
    const SparseVoxelTensor t({{0, 0, 0}}, Matrix::from_rows({{1.0}}), {2, 2, 2});
    CHECK_THROWS_AS(transposed_conv_onto(t, SparseKernel(2, 2, 1, 1, 1, std::vector<double>(8)), {{2, 2, 2}}, {4, 4, 4}),
                    AlignmentError);
  }
}

TEST_CASE("concat_channels") {
  std::mt19937_64 rng(9);
  const auto a = oracle::random_sparse({4, 4, 4}, 0.3, 2, rng);
  const auto b = a.with_attrs(oracle::random_matrix(a.size(), 3, rng));
  const auto c = concat_channels(a, b);
  CHECK(c.channels() == 5);
  CHECK(column_slice(c.attrs(), 0, 2) == a.attrs());
  CHECK(column_slice(c.attrs(), 2, 3) == b.attrs());
  CHECK(concat_channels(a, a.with_attrs(Matrix(a.size(), 0))) == a);
  const auto other = oracle::random_sparse({4, 4, 4}, 0.3, 2, rng);
  if (other.coords() != a.coords()) CHECK_THROWS_AS(concat_channels(a, other), AlignmentError);
}

TEST_CASE("geometry_upscale") {
  const SparseVoxelTensor one({{1, 2, 3}}, Matrix::from_rows({{5.0}}), {4, 4, 4});
  const auto kids = geometry_upscale(one);
  CHECK(kids.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(kids.attrs()(i, 0) == 5.0);
  CHECK(kids.grid() == Grid{8, 8, 8});
  const auto scaled = geometry_upscale(one, UpscaleMode::scale_only);
  CHECK(scaled.coords() == std::vector<Coord>{{2, 4, 6}});

  std::mt19937_64 rng(10);
  const auto t = oracle::random_sparse({6, 6, 6}, 0.25, 2, rng);
  const auto up = geometry_upscale(t);
  CHECK(up.size() == 8 * t.size());
  CHECK(up.coords() == oracle::children_of(t.coords()));
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(SparseKernel(3, 1, 1, 2, 2, std::vector<double>(7)), ShapeError);
  std::mt19937_64 rng(11);
  const auto t = oracle::random_sparse({4, 4, 4}, 0.3, 2, rng);
  CHECK_THROWS_AS(submanifold_conv(t, SparseKernel::identity(3, 3)), ShapeError);
}
