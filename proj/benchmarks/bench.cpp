#include <benchmark/benchmark.h>

#include <string>

#include "treemfe/analytics.hpp"
#include "treemfe/engine.hpp"
#include "treemfe/linalg.hpp"
#include "treemfe/model.hpp"

namespace {

const char* kSingleDoc = R"({
  "lattice": {"n_steps": 24, "horizon_years": 2.0, "rate": 0.025, "sigma": 0.15, "s0": 1.0},
  "y_chain": {"y0": 1.0, "sigma_y": 0.12, "p_y": 0.5},
  "order_flow": {"l_a": 1.0, "l_b": 1.0},
  "populations": [
    {"weight": 1.0, "gamma_min": 0.5, "gamma_max": 1.5, "n_gamma": 4,
     "theta_row": [0.4],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": 1.5}}
  ]
})";

const char* kTwoPopDoc = R"({
  "lattice": {"n_steps": 24, "horizon_years": 2.0, "rate": 0.025, "sigma": 0.15, "s0": 1.0},
  "y_chain": {"y0": 1.0, "sigma_y": 0.12, "p_y": 0.5},
  "order_flow": {"l_a": 1.5, "l_b": 1.5},
  "populations": [
    {"weight": 0.3, "gamma_min": 0.5, "gamma_max": 1.5, "n_gamma": 4,
     "theta_row": [0.3, 0.4],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": 1.2}},
    {"weight": 0.7, "gamma_min": 0.2, "gamma_max": 1.2, "n_gamma": 4,
     "theta_row": [0.4, 0.3],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": 2.4}}
  ]
})";

treemfe::MarketSpec make_spec(const char* doc, int n_steps) {
    auto patched = treemfe::apply_overrides(
        std::string(doc), {"lattice.n_steps=" + std::to_string(n_steps)});
    return treemfe::parse_config(patched);
}

void bm_solve_single(benchmark::State& state) {
    auto spec = make_spec(kSingleDoc, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto sol = treemfe::solve_mc_mfe(spec);
        benchmark::DoNotOptimize(sol.max_clearing_residual);
    }
}
BENCHMARK(bm_solve_single)->Arg(12)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

void bm_solve_two_pop(benchmark::State& state) {
    auto spec = make_spec(kTwoPopDoc, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto sol = treemfe::solve_mc_mfe(spec);
        benchmark::DoNotOptimize(sol.max_clearing_residual);
    }
}
BENCHMARK(bm_solve_two_pop)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void bm_terminal_distribution(benchmark::State& state) {
    auto spec = make_spec(kSingleDoc, 24);
    auto sol = treemfe::solve_mc_mfe(spec);
    for (auto _ : state) {
        auto dist = treemfe::terminal_distribution(sol);
        benchmark::DoNotOptimize(dist.data());
    }
}
BENCHMARK(bm_terminal_distribution)->Unit(benchmark::kMicrosecond);

void bm_strategy_rms(benchmark::State& state) {
    auto spec = make_spec(kSingleDoc, 24);
    auto sol = treemfe::solve_mc_mfe(spec);
    for (auto _ : state) {
        double rms = treemfe::strategy_rms(sol, 0, 12);
        benchmark::DoNotOptimize(rms);
    }
}
BENCHMARK(bm_strategy_rms)->Unit(benchmark::kMicrosecond);

void bm_laurent_expand(benchmark::State& state) {
    treemfe::Mat theta(2);
    theta(0, 0) = 0.6; theta(0, 1) = 0.4;
    theta(1, 0) = 0.4; theta(1, 1) = 0.6;
    for (auto _ : state) {
        auto exp = treemfe::laurent_expand(theta, 3);
        benchmark::DoNotOptimize(exp.r_minus1.max_abs());
    }
}
BENCHMARK(bm_laurent_expand)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
