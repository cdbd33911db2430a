#pragma once

#include <cstdint>
#include <vector>

#include "treemfe/engine.hpp"
#include "treemfe/model.hpp"

namespace treemfe {

// Stateless counter-based generator: a split-mix finalizer chained over the
// key words (seed, stream, agent, slot). Every variate is a pure function of
// its key, so draws are reproducible and parallel-safe. Layout used by the
// samplers: stream = replication id (0 for direct sampling), agent = 1-based
// agent index (0 reserved for node draws), slot = 0 for the type draw and
// 1 + k for the z-step at time k.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t agent, std::uint64_t slot);

// Uniform in [0, 1) from the top 53 bits of counter_hash.
double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t agent, std::uint64_t slot);

struct SampledAgent {
    int pop = 0;
    int type = 0;
    std::vector<int> z_path;  // z-state index at each time 0..N
};

// Draws `total` agents: per-population counts by largest-remainder rounding
// of the population weights, then an independent (type, Z-path) per agent.
// Identical (spec, total, seed) yield identical samples.
std::vector<SampledAgent> sample_agents(const MarketSpec& spec, int total,
                                        std::uint64_t seed);

struct ClearingOptions {
    int time_index = -1;  // -1 selects floor(N/2)
    bool fixed_node = false;
    int node_s = 0;  // used when fixed_node
    int node_y = 0;
};

struct ClearingExperiment {
    std::vector<int> sizes;
    int reps = 0;
    std::uint64_t seed = 0;
    int time_index = 0;
    bool fixed_node = false;
    std::vector<double> mse;          // E|mean strategy - L|^2 per size
    std::vector<double> mean_excess;  // mean of (mean strategy - L) per size
    double slope = 0.0;               // log-log LS fit; NaN when an MSE is 0
};

// Finite-population clearing error: per size, `reps` replications each draw a
// fresh agent sample and an (s,y) node from the forward law at the selected
// time (or use the fixed node), then evaluate the sampled mean strategy minus
// the order flow. Throws ExperimentError for fewer than two sizes,
// non-increasing sizes, or reps < 30.
ClearingExperiment clearing_error(const MarketSpec& spec,
                                  const EquilibriumSolution& sol,
                                  const std::vector<int>& sizes, int reps,
                                  std::uint64_t seed,
                                  const ClearingOptions& opts = {});

}  // namespace treemfe
