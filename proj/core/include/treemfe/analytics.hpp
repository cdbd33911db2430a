#pragma once

#include <limits>
#include <string>
#include <vector>

#include "treemfe/engine.hpp"
#include "treemfe/model.hpp"

namespace treemfe {

// Marginal law of the terminal stock price over tree nodes (path states
// aggregate onto their terminal node). Throws ProbabilityLeak when the mass
// drifts from 1 by more than 1e-10.
std::vector<double> terminal_distribution(const EquilibriumSolution& sol);

// E[S(t_n)] for n = 0..N under the equilibrium forward law.
std::vector<double> expected_price_curve(const EquilibriumSolution& sol);

// sqrt(E[strategy(t_n)^2]) for one population: exact finite sum over the
// (s,y) forward law, the z marginal, and type weights. Requires n < N.
double strategy_rms(const EquilibriumSolution& sol, int pop, int n);

// Deviations of the regularized solve from the singular one under the
// diagonal perturbation theta(eps) = theta - eps*I applied to every type row.
struct ContinuityTable {
    std::vector<double> eps;
    std::vector<double> p_deviation;    // max over (n, node) |p_eps - p_0|
    std::vector<double> phi_deviation;  // max over states/types |phi_eps - phi_0|
};

// Requires a SingularRank1 base spec whose kernel produces a simple pole;
// throws NotSingular / SimplePoleRequired, and InvalidParams when some eps
// fails to regularize the interaction system.
ContinuityTable continuity_probe(const MarketSpec& spec,
                                 const std::vector<double>& eps_list);

struct SweepOutputs {
    bool terminal_mean = true;
    std::vector<double> rms_times;  // years; empty = no RMS columns
};

struct SweepRow {
    double value = 0.0;
    std::string regime;  // interaction classification, or "error"
    std::string error;   // diagnostic message when the solve failed
    double terminal_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> rms;  // population-major, then time; empty on error
};

struct SweepResult {
    std::vector<std::string> axis;  // dotted config paths set per value
    std::vector<double> values;
    std::vector<std::string> rms_columns;  // e.g. "rms_growth_t1"
    std::vector<SweepRow> rows;
};

// One solve per value: every dotted path in axis is set to the value in the
// JSON document, which is then parsed and solved. Values must be strictly
// increasing; failed rows carry the error instead of aborting the sweep.
SweepResult sweep(const std::string& config_document,
                  const std::vector<std::string>& axis,
                  const std::vector<double>& values,
                  const SweepOutputs& outputs = {});

}  // namespace treemfe
