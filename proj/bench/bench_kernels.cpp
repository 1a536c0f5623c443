// Serial reference kernels against their OpenMP counterparts.
// Thread count follows LKLD_THREADS (0 or unset = all cores).
#include <benchmark/benchmark.h>

#include "lkld/calibration.hpp"
#include "lkld/distributions.hpp"
#include "lkld/io.hpp"
#include "lkld/label_uncertainty.hpp"
#include "lkld/random.hpp"

using namespace lkld;

namespace {

const std::vector<double>& errors() {
    static const auto v = parse_range("0:4:0.002");
    return v;
}

const std::vector<double>& scales() {
    static const auto v = parse_range("0.005:2:0.002");
    return v;
}

std::vector<PredictionRecord> make_records(std::size_t n) {
    Rng rng(1);
    std::vector<PredictionRecord> r;
    r.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::exp(rng.uniform(-3, 1));
        r.emplace_back(rng.laplace(s), s);
    }
    return r;
}

std::vector<LabelTrack> make_tracks(std::size_t n) {
    Rng rng(2);
    std::vector<LabelTrack> tracks(n);
    for (std::size_t i = 0; i < n; ++i) {
        LabelTrack& t = tracks[i];
        t.label_id = "t" + std::to_string(i);
        t.class_name = "vehicle";
        for (SweepId s = 0; s < 10; ++s) {
            const OrientedRect r({rng.uniform(-50, 50), rng.uniform(-50, 50)}, rng.uniform(-3, 3), 4.5, 1.9);
            t.poses.emplace(s, r);
            auto& pts = t.points[s];
            for (int k = 0; k < 100; ++k)
                pts.push_back(rigid_transform({rng.uniform(-2.2, 2.2), rng.uniform(-0.9, 0.9)}, {{0, 0}, 0}, r.pose()));
        }
    }
    return tracks;
}

void BM_SurfaceSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(surface_grid_serial(LossKind::KLD, 0.2, errors(), scales()));
}

void BM_SurfaceParallel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(surface_grid(LossKind::KLD, 0.2, errors(), scales()));
}

void BM_CalibrationSerial(benchmark::State& st) {
    const auto recs = make_records(static_cast<std::size_t>(st.range(0)));
    const auto grid = default_cdf_grid();
    for (auto _ : st) benchmark::DoNotOptimize(calibration_report_serial(recs, grid));
}

void BM_CalibrationParallel(benchmark::State& st) {
    const auto recs = make_records(static_cast<std::size_t>(st.range(0)));
    const auto grid = default_cdf_grid();
    for (auto _ : st) benchmark::DoNotOptimize(calibration_report(recs, grid));
}

void BM_RecordsSerial(benchmark::State& st) {
    const auto tracks = make_tracks(static_cast<std::size_t>(st.range(0)));
    ClassMappings m;
    m.fallback = fit_mapping(2.0, 0.05, 0.01);
    for (auto _ : st) benchmark::DoNotOptimize(estimate_records_serial(tracks, m));
}

void BM_RecordsParallel(benchmark::State& st) {
    const auto tracks = make_tracks(static_cast<std::size_t>(st.range(0)));
    ClassMappings m;
    m.fallback = fit_mapping(2.0, 0.05, 0.01);
    for (auto _ : st) benchmark::DoNotOptimize(estimate_records(tracks, m));
}

}  // namespace

BENCHMARK(BM_SurfaceSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SurfaceParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CalibrationSerial)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CalibrationParallel)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecordsSerial)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecordsParallel)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
