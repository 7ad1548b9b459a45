#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include <pipematch/features.hpp>
#include <pipematch/metrics.hpp>
#include <pipematch/mlp.hpp>
#include <pipematch/params.hpp>
#include <pipematch/pipe_model.hpp>
#include <pipematch/rng.hpp>
#include <pipematch/search.hpp>

using namespace pipematch;

namespace {

constexpr double kRate = 32000.0;
constexpr int kNote = 36;

ParamVector bright_params() {
    ParamVector p;
    p.h2_gain = 0.6;
    p.sigmoid_drive = 3.0;
    p.noise_gain = 0.1;
    return p;
}

void BM_RenderTone(benchmark::State& state) {
    const double duration = static_cast<double>(state.range(0)) / 10.0;
    const ParamVector p = bright_params();
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_tone(p, kNote, duration, kRate, 1));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RenderTone)->Arg(10)->Arg(40);  // 1 s and 4 s tones

void BM_ExtractFeatures(benchmark::State& state) {
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(kRate, 1.0);
    const Tone tone = render_tone(bright_params(), kNote, 1.0, kRate, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_features(tone, cfg));
    }
}
BENCHMARK(BM_ExtractFeatures);

void BM_HarmonicCost(benchmark::State& state) {
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(kRate, 1.0);
    const Tone target = render_tone(bright_params(), kNote, 1.0, kRate, 1);
    const Tone candidate = render_tone(ParamVector{}, kNote, 1.0, kRate, 1);
    const CostEvaluator eval(target, WeightedCost::parse("H_H:1,H_10:1,H_10W:3"), cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval(candidate));
    }
}
BENCHMARK(BM_HarmonicCost);

void BM_EnvelopeCost(benchmark::State& state) {
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(kRate, 1.0);
    const Tone target = render_tone(bright_params(), kNote, 1.0, kRate, 1);
    const Tone candidate = render_tone(ParamVector{}, kNote, 1.0, kRate, 1);
    const CostEvaluator eval(target, WeightedCost::parse("E_D:1,E_D1:1,E_D2:1"), cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval(candidate));
    }
}
BENCHMARK(BM_EnvelopeCost);

void BM_MlpForward(benchmark::State& state) {
    MlpSpec spec{161, 27, {256, 256}, Activation::Tanh, 0.0};
    Rng rng(1);
    const Mlp net = Mlp::random_init(spec, rng);
    std::vector<double> x(161);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(x));
    }
}
BENCHMARK(BM_MlpForward);

void BM_MlpGradientStep(benchmark::State& state) {
    MlpSpec spec{161, 27, {128, 128}, Activation::Tanh, 0.0};
    Rng rng(1);
    Mlp net = Mlp::random_init(spec, rng);
    std::vector<std::vector<double>> x(32, std::vector<double>(161));
    std::vector<std::vector<double>> y(32, std::vector<double>(27));
    for (auto& row : x)
        for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    for (auto& row : y)
        for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    Gradients grads;
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.loss_and_gradients(x, y, grads));
    }
}
BENCHMARK(BM_MlpGradientStep);

void BM_Perturb(benchmark::State& state) {
    MorisConfig cfg;
    cfg.cost = WeightedCost::parse("H_10:1");
    const NormalizedParams theta = normalize(bright_params());
    Rng rng(5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(perturb(theta, 0.8, cfg, rng));
    }
}
BENCHMARK(BM_Perturb);

void BM_RefinementIteration(benchmark::State& state) {
    // One proposal-render-evaluate cycle, the inner loop of refinement.
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(kRate, 1.0);
    const Tone target = render_tone(bright_params(), kNote, 1.0, kRate, 1);
    const CostEvaluator eval(target, WeightedCost::parse("H_H:1,H_10:1,H_10W:3"), cfg);
    MorisConfig mc;
    mc.cost = eval.cost();
    const NormalizedParams theta = normalize(ParamVector{});
    Rng rng(5);
    for (auto _ : state) {
        const NormalizedParams prop = perturb(theta, 1.0, mc, rng);
        const Tone tone = render_tone(denormalize(prop), kNote, 1.0, kRate, 1);
        benchmark::DoNotOptimize(eval(tone));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RefinementIteration);

}  // namespace

BENCHMARK_MAIN();
