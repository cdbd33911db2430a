#include "treemfe/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "treemfe/errors.hpp"

namespace treemfe {
namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Inverts u against the cumulative sum of probs (which sums to ~1).
int invert_cdf(const std::vector<double>& probs, double u) {
    double cum = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        cum += probs[j];
        if (u < cum) return static_cast<int>(j);
    }
    return static_cast<int>(probs.size()) - 1;
}

// Largest-remainder rounding of w_p * total to integer counts summing to total.
std::vector<int> population_counts(const MarketSpec& spec, int total) {
    const int m = spec.n_pops();
    std::vector<int> counts(m);
    std::vector<std::pair<double, int>> rem(m);
    int assigned = 0;
    for (int p = 0; p < m; ++p) {
        const double exact = spec.populations[p].pop_weight * total;
        counts[p] = static_cast<int>(std::floor(exact));
        rem[p] = {exact - counts[p], p};
        assigned += counts[p];
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
    });
    for (int i = 0; i < total - assigned; ++i) ++counts[rem[i].second];
    return counts;
}

// Draws (pop, type, z-index at time up_to) for every agent; z simulated step
// by step with the documented slot layout so the full-path sampler agrees.
struct LeanAgent {
    int pop;
    int type;
    int z_idx;
};

std::vector<LeanAgent> sample_lean(const MarketSpec& spec, int total,
                                   std::uint64_t seed, std::uint64_t stream,
                                   int up_to) {
    const std::vector<int> counts = population_counts(spec, total);
    std::vector<LeanAgent> agents;
    agents.reserve(total);
    std::uint64_t a = 1;
    for (int p = 0; p < spec.n_pops(); ++p) {
        const auto& pop = spec.populations[p];
        std::vector<double> type_w(pop.agent_types.size());
        for (std::size_t t = 0; t < type_w.size(); ++t)
            type_w[t] = pop.agent_types[t].weight;
        for (int i = 0; i < counts[p]; ++i, ++a) {
            LeanAgent ag{p, invert_cdf(type_w, counter_uniform(seed, stream, a, 0)), 0};
            for (int k = 0; k < up_to; ++k)
                ag.z_idx = invert_cdf(pop.z_chain.transitions[k][ag.z_idx],
                                      counter_uniform(seed, stream, a, 1 + k));
            agents.push_back(ag);
        }
    }
    return agents;
}

}  // namespace

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t agent, std::uint64_t slot) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ stream);
    h = mix64(h ^ agent);
    return mix64(h ^ slot);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t agent, std::uint64_t slot) {
    return static_cast<double>(counter_hash(seed, stream, agent, slot) >> 11) *
           0x1.0p-53;
}

std::vector<SampledAgent> sample_agents(const MarketSpec& spec, int total,
                                        std::uint64_t seed) {
    spec.validate();
    if (total < spec.n_pops())
        throw InvalidParams("sample size must cover every population");
    const int N = spec.lattice.n_steps;
    const std::vector<int> counts = population_counts(spec, total);
    std::vector<SampledAgent> agents;
    agents.reserve(total);
    std::uint64_t a = 1;
    for (int p = 0; p < spec.n_pops(); ++p) {
        const auto& pop = spec.populations[p];
        std::vector<double> type_w(pop.agent_types.size());
        for (std::size_t t = 0; t < type_w.size(); ++t)
            type_w[t] = pop.agent_types[t].weight;
        for (int i = 0; i < counts[p]; ++i, ++a) {
            SampledAgent ag;
            ag.pop = p;
            ag.type = invert_cdf(type_w, counter_uniform(seed, 0, a, 0));
            ag.z_path.assign(N + 1, 0);
            for (int k = 0; k < N; ++k)
                ag.z_path[k + 1] = invert_cdf(pop.z_chain.transitions[k][ag.z_path[k]],
                                              counter_uniform(seed, 0, a, 1 + k));
            agents.push_back(std::move(ag));
        }
    }
    return agents;
}

ClearingExperiment clearing_error(const MarketSpec& spec,
                                  const EquilibriumSolution& sol,
                                  const std::vector<int>& sizes, int reps,
                                  std::uint64_t seed, const ClearingOptions& opts) {
    if (sizes.size() < 2)
        throw ExperimentError("need at least two population sizes for a slope");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < spec.n_pops())
            throw ExperimentError("size " + std::to_string(sizes[i]) +
                                  " cannot cover every population");
        if (i > 0 && sizes[i] <= sizes[i - 1])
            throw ExperimentError("sizes must be strictly increasing");
    }
    if (reps < 30) throw ExperimentError("need at least 30 replications");
    if (sol.strategies.empty()) throw Error("strategies were not retained by the solver");

    const int N = sol.n_steps();
    const int n = opts.time_index < 0 ? N / 2 : opts.time_index;
    if (n < 0 || n >= N) throw IndexOutOfRange("clearing time index");

    const Grid2 law = sol.forward_law()[n];
    if (opts.fixed_node &&
        (opts.node_s < 0 || opts.node_s >= law.rows() || opts.node_y < 0 ||
         opts.node_y >= law.cols()))
        throw IndexOutOfRange("clearing node index");

    ClearingExperiment exp;
    exp.sizes = sizes;
    exp.reps = reps;
    exp.seed = seed;
    exp.time_index = n;
    exp.fixed_node = opts.fixed_node;

    for (std::size_t si = 0; si < sizes.size(); ++si) {
        double sum = 0.0, sum_sq = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            const std::uint64_t stream =
                static_cast<std::uint64_t>(si) * reps + rep + 1;
            int s = opts.node_s, y = opts.node_y;
            if (!opts.fixed_node) {
                const int flat = invert_cdf(law.data(),
                                            counter_uniform(seed, stream, 0, 0));
                s = flat / law.cols();
                y = flat % law.cols();
            }
            const double L = order_flow_value(spec, sol.lattice, n, s, y,
                                              spec.path_mode);
            const std::vector<LeanAgent> agents =
                sample_lean(spec, sizes[si], seed, stream, n);
            double mean = 0.0;
            for (const LeanAgent& ag : agents)
                mean += sol.strategy(n, s, y, ag.z_idx, ag.pop, ag.type);
            mean /= sizes[si];
            const double excess = mean - L;
            sum += excess;
            sum_sq += excess * excess;
        }
        exp.mean_excess.push_back(sum / reps);
        exp.mse.push_back(sum_sq / reps);
    }

    bool positive = true;
    for (const double v : exp.mse) positive = positive && v > 0.0;
    if (positive) {
        const std::size_t k = sizes.size();
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            mx += std::log(static_cast<double>(sizes[i]));
            my += std::log(exp.mse[i]);
        }
        mx /= k;
        my /= k;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double dx = std::log(static_cast<double>(sizes[i])) - mx;
            sxx += dx * dx;
            sxy += dx * (std::log(exp.mse[i]) - my);
        }
        exp.slope = sxy / sxx;
    } else {
        exp.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return exp;
}

}  // namespace treemfe
