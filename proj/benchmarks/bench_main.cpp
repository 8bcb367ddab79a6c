#include <random>

#include <benchmark/benchmark.h>

#include "fpc/channel.hpp"
#include "fpc/jscc.hpp"
#include "fpc/ldpc.hpp"
#include "fpc/octree.hpp"
#include "fpc/scene.hpp"
#include "fpc/source_codec.hpp"
#include "fpc/sparse_conv.hpp"

using namespace fpc;

namespace {

SparseVoxelTensor random_tensor(Grid g, double density, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::normal_distribution<double> val;
  std::vector<Coord> coords;
  for (int u = 0; u < g.l; ++u)
    for (int v = 0; v < g.w; ++v)
      for (int w = 0; w < g.h; ++w)
        if (keep(rng)) coords.push_back({u, v, w});
  Matrix m(coords.size(), channels);
  for (double& x : m.data()) x = val(rng);
  return {std::move(coords), std::move(m), g};
}

SparseKernel random_kernel(int size, int stride, std::size_t in, std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> val(0.0, 0.1);
  std::vector<double> w(static_cast<std::size_t>(size) * size * size * in * out);
  for (double& x : w) x = val(rng);
  return {size, stride, 1, in, out, std::move(w), std::vector<double>(out, 0.0)};
}

void BM_SubmanifoldConv(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto t = random_tensor({64, 64, 8}, 0.03, c, 1);
  const auto k = random_kernel(3, 1, c, c, 2);
  for (auto _ : state) benchmark::DoNotOptimize(submanifold_conv(t, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}
BENCHMARK(BM_SubmanifoldConv)->Arg(16)->Arg(64);

void BM_StridedConv(benchmark::State& state) {
  const auto t = random_tensor({64, 64, 8}, 0.03, 32, 3);
  const auto k = random_kernel(2, 2, 32, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(strided_conv(t, k));
}
BENCHMARK(BM_StridedConv);

void BM_SpatialProbs(benchmark::State& state) {
  const auto scene = gen_scene(SceneGenConfig{}, 5, 0);
  const auto model = CompactionModel::seeded(6);
  const auto fc = channel_compact(scene.features, model);
  for (auto _ : state) benchmark::DoNotOptimize(spatial_probs(fc, model));
  state.counters["voxels"] = static_cast<double>(fc.size());
}
BENCHMARK(BM_SpatialProbs)->Unit(benchmark::kMillisecond);

void BM_OctreeEncode(benchmark::State& state) {
  const auto t = random_tensor({64, 64, 8}, 0.03, 1, 7);
  for (auto _ : state) benchmark::DoNotOptimize(octree_encode(t.coords(), t.grid()));
}
BENCHMARK(BM_OctreeEncode);

void BM_LdpcDecode(benchmark::State& state) {
  const double snr = static_cast<double>(state.range(0));
  const auto code = ldpc_build({});
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> msg(code.k);
  for (auto& b : msg) b = coin(rng);
  const auto rx = awgn(bpsk_modulate(ldpc_encode(code, msg)), {snr, 9});
  const auto llr = bpsk_demodulate_llr(rx, snr);
  for (auto _ : state) benchmark::DoNotOptimize(ldpc_decode(code, llr));
}
BENCHMARK(BM_LdpcDecode)->Arg(0)->Arg(4)->Arg(10);

void BM_JsccEncode(benchmark::State& state) {
  const auto model = JsccModel::seeded(10);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> val;
  Matrix x(static_cast<std::size_t>(state.range(0)), 8);
  for (double& v : x.data()) v = val(rng);
  for (auto _ : state) benchmark::DoNotOptimize(jscc_encode(x, 10.0, model));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_JsccEncode)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
