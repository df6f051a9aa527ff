#include <benchmark/benchmark.h>

#include <random>
#include <thread>

#include "vreid/losses.hpp"
#include "vreid/metrics.hpp"
#include "vreid/posegeom.hpp"
#include "vreid/synthgen.hpp"

using namespace vreid;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = gauss(rng);
    return m;
}

void BM_DistanceMatrixSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Matrix q = random_matrix(128, 256, 1);
    Matrix g = random_matrix(n, 256, 2);
    for (auto _ : state) {
        Matrix d = distance_matrix(q, g, 512, 1);
        benchmark::DoNotOptimize(d.data().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            128 * state.range(0));
}
BENCHMARK(BM_DistanceMatrixSerial)->Arg(1024)->Arg(8192)->Arg(32768);

void BM_DistanceMatrixThreaded(benchmark::State& state) {
    const int threads =
        std::max(1u, std::thread::hardware_concurrency());
    Matrix q = random_matrix(512, 256, 1);
    Matrix g = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 2);
    for (auto _ : state) {
        Matrix d = distance_matrix(q, g, 512, threads);
        benchmark::DoNotOptimize(d.data().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            512 * state.range(0));
}
BENCHMARK(BM_DistanceMatrixThreaded)->Arg(8192)->Arg(32768);

void BM_BatchHardTriplet(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Matrix f = random_matrix(n, 32, 3);
    std::vector<int> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<int>(i / 4));
    TripletConfig cfg;
    for (auto _ : state) {
        TripletResult r = batch_hard_triplet(f, ids, cfg);
        benchmark::DoNotOptimize(r.loss);
    }
}
BENCHMARK(BM_BatchHardTriplet)->Arg(32)->Arg(128)->Arg(512);

void BM_RenderHeatmaps(benchmark::State& state) {
    KeypointSet kps =
        project_template(TemplateModel::standard(), 40.0, 20.0, 256, 256);
    for (auto _ : state) {
        Tensor3 maps = render_heatmaps(kps, 256, 256);
        benchmark::DoNotOptimize(maps.data.data());
    }
}
BENCHMARK(BM_RenderHeatmaps);

void BM_RasterizeSegments(benchmark::State& state) {
    KeypointSet kps =
        project_template(TemplateModel::standard(), 40.0, 20.0, 256, 256);
    SegmentTable table = default_pose_config().segments;
    for (auto _ : state) {
        Tensor3 masks = rasterize_segments(kps, table, 256, 256);
        benchmark::DoNotOptimize(masks.data.data());
    }
}
BENCHMARK(BM_RasterizeSegments);

void BM_GenerateDataset(benchmark::State& state) {
    GenSpec spec = gen_preset("easy");
    spec.n_identities = static_cast<int>(state.range(0));
    for (auto _ : state) {
        GeneratedDataset d = generate_dataset(spec);
        benchmark::DoNotOptimize(d.pose_vectors.data().data());
    }
}
BENCHMARK(BM_GenerateDataset)->Arg(8)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
