#include <benchmark/benchmark.h>

#include "lithofield/datagen.hpp"
#include "lithofield/fft.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"

namespace {

using namespace lithofield;

constexpr std::size_t kImage = 256;

ImagingConfig bench_imaging() {
  ImagingConfig cfg;
  cfg.pixel_size_nm = 8.0;
  cfg.source_grid = 21;
  return cfg;
}

const TruthRenderer& renderer() {
  static const TruthRenderer r(bench_imaging(), kImage, kDefaultResistThreshold);
  return r;
}

RealGrid bench_mask() {
  MaskSpec spec;
  spec.pixel_size_nm = 8.0;
  spec.seed = 7;
  return gen_mask(spec);
}

void BM_Fft2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ComplexGrid g(n, n);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cplx(static_cast<double>(i % 7), 0.0);
  for (auto _ : state) {
    fft2_inplace(g.values(), n, n, FftDirection::forward);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_Fft2)->Arg(128)->Arg(256)->Arg(512);

// Argument 0 means every oracle kernel (near-full rank).
void BM_SocsImage(benchmark::State& state) {
  const KernelStack& full = renderer().kernels();
  const auto r = static_cast<std::size_t>(state.range(0));
  const KernelStack stack = r == 0 ? full : full.truncated(r);
  const auto threads = static_cast<std::size_t>(state.range(1));
  const RealGrid mask = bench_mask();
  for (auto _ : state) benchmark::DoNotOptimize(socs_image(stack, mask, threads));
  state.counters["order"] = static_cast<double>(stack.order());
}
BENCHMARK(BM_SocsImage)
    ->Args({8, 1})
    ->Args({24, 1})
    ->Args({0, 1})
    ->Args({24, 4})
    ->Args({0, 4})
    ->Unit(benchmark::kMillisecond);

void BM_AbbeImage(benchmark::State& state) {
  const ImagingConfig cfg = bench_imaging();
  const SourceMap src = build_source(cfg);
  const PupilFunction pupil = build_pupil(cfg);
  const RealGrid mask = bench_mask();
  for (auto _ : state) benchmark::DoNotOptimize(abbe_image(src, pupil, mask, cfg.pixel_size_nm));
}
BENCHMARK(BM_AbbeImage)->Unit(benchmark::kMillisecond);

void BM_LossAndGrad(benchmark::State& state) {
  NetworkConfig net;
  const KernelDims dims{59, 59};
  const CoordGrid coords = make_coord_grid(dims.rows, dims.cols);
  const CMatrix features = net.encoder.encode(coords);
  const CMlpParams params =
      init_params(mlp_widths(net.encoder.width(), net.hidden_width, net.hidden_blocks, 24), 1, net.output_gain);
  const RealGrid mask = bench_mask();
  const RealGrid truth = renderer().render(mask).aerial;
  const Precision precision = state.range(0) == 0 ? Precision::f64 : Precision::f32;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(params, features, mask, truth, dims, precision));
}
BENCHMARK(BM_LossAndGrad)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
