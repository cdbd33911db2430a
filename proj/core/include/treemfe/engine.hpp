#pragma once

#include <span>
#include <vector>

#include "treemfe/grid.hpp"
#include "treemfe/lattice.hpp"
#include "treemfe/model.hpp"

namespace treemfe {

struct SolveOptions {
    // Keep per-node strategy tables (needed by analytics and simulation).
    bool keep_strategies = true;
    // Keep the full log effective-liability tables for every time slice;
    // otherwise only two adjacent slices live during the backward pass.
    bool keep_log_liability = false;
};

// Complete equilibrium description. All tables are time-major; stock states
// are node indices in Markovian mode and path bitmasks in path mode (bit i
// set when the move from time i to i+1 was up).
struct EquilibriumSolution {
    enum class Regime { Single, MultiRegular, MultiSingular };
    enum class Mode { Markovian, PathDependent };

    Regime regime = Regime::Single;
    Mode mode = Mode::Markovian;
    MarketSpec spec;
    StockLattice lattice;
    RegimeClassification classification;

    // Up-probabilities chosen at time n for the step to n+1; n = 0..N-1.
    std::vector<Grid2> p_up;

    // strategies[pop][n](s, y, z, type): stock position over [t_n, t_{n+1}].
    std::vector<std::vector<Grid4>> strategies;

    // mean_strategy[pop][n](s, y): expectation of the strategy over the
    // population's (z, type) law. Equals the order flow share in a
    // market-clearing solve.
    std::vector<std::vector<Grid2>> mean_strategy;

    // log_liability[pop][n](s, y, z, type): log V tables; filled only when
    // SolveOptions::keep_log_liability is set. Slice N holds gamma * F.
    std::vector<std::vector<Grid4>> log_liability;

    double min_p = 1.0;
    double max_p = 0.0;
    // Max over nodes of |sum_p w_p E[strategy] - L| (market-clearing solves).
    double max_clearing_residual = 0.0;

    int n_steps() const { return spec.lattice.n_steps; }
    int n_stock_states(int n) const {
        return mode == Mode::PathDependent ? (1 << n) : n + 1;
    }
    // Stock price at (n, state index); path indices map through their
    // up-move count onto the recombining tree.
    double stock_value(int n, int s_idx) const;
    // Terminal tree node reached by a terminal state index.
    int terminal_node(int s_idx) const;

    // Bounds-checked strategy lookup; throws IndexOutOfRange.
    double strategy(int n, int s_idx, int y_idx, int z_idx, int pop, int type) const;

    // Mean-field interaction term per population: (u - d) * mean strategy.
    double interaction_term(int n, int s_idx, int y_idx, int pop) const;

    // Joint forward law over (stock state, y-state) per time slice.
    std::vector<Grid2> forward_law() const;
};

// Closed-form optimizer of the one-period exponential-utility problem:
// (theta_row . delta_n)/(u-d) + [log(-p u/(q d)) + log_f] / (gamma_n (u-d)).
double one_period_optimal(double p, double u, double d, double gamma_n,
                          std::span<const double> theta_row,
                          std::span<const double> delta_n, double log_f);

// Equilibrium under exogenous transition probabilities (one Grid2 per step,
// matching the spec's mode). Requires an invertible (I - Theta) (single
// population: mean concern != 1). Throws RegimeError / ProbabilityBound.
EquilibriumSolution solve_rp_mfe(const MarketSpec& spec,
                                 const std::vector<Grid2>& exogenous_p,
                                 const SolveOptions& opts = {});

// Market-clearing equilibrium: transition probabilities and strategies.
// Dispatches on the interaction regime; throws RegimeError{Unsolvable} for
// kernel dimension >= 2 and DegeneracyError when a non-degeneracy condition
// fails. Ensures every p in (0,1) and the clearing identity at every node.
EquilibriumSolution solve_mc_mfe(const MarketSpec& spec,
                                 const SolveOptions& opts = {});

// One (s,y) move per step: up true moves the stock up; y_next indexes the
// y-state at the following time. Throws InvalidPath for unreachable moves.
struct PathStep {
    bool up = false;
    int y_next = 0;
};

// Population-average wealth path mu_0..mu_N along a concrete (s,y) path:
// mu_{n+1} = beta * mu_n + (u or d) * E[strategy_n]. mu_0 is the configured
// mean initial wealth.
std::vector<double> mean_field_path(const EquilibriumSolution& sol,
                                    const std::vector<PathStep>& path, int pop);

}  // namespace treemfe
