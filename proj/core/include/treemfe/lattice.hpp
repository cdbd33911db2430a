#pragma once

#include <span>
#include <vector>

#include "treemfe/errors.hpp"
#include "treemfe/grid.hpp"

namespace treemfe {

// Tree geometry and per-period constants. Moves are gross factors u_tilde
// (up) and d_tilde (down); beta = exp(rate*dt) is the per-period money-market
// growth, and u = u_tilde - beta > 0, d = d_tilde - beta < 0 are the excess
// moves that drive all closed-form positions.
struct LatticeParams {
    int n_steps = 0;       // N
    double horizon = 0.0;  // T in years
    double rate = 0.0;     // r per year
    double u_tilde = 0.0;
    double d_tilde = 0.0;
    double s0 = 0.0;

    double dt() const { return horizon / n_steps; }
    double beta() const;
    double up() const { return u_tilde - beta(); }
    double down() const { return d_tilde - beta(); }

    // beta^k with an exact integer exponent (repeated squaring).
    double beta_pow(int k) const;

    // Risk-aversion scaling at period end index n_end: gamma * beta^(N - n_end).
    double gamma_scale(int n_end) const { return beta_pow(n_steps - n_end); }

    // Throws InvalidParams unless 0 < d_tilde < beta < u_tilde, s0 > 0,
    // n_steps >= 1, horizon > 0.
    void validate() const;
};

// p^Q = (-d)/(u - d): up-probability making the discounted stock a martingale.
double risk_neutral_up_prob(const LatticeParams& params);

// Recombining price tree; slice n holds n+1 values s0 * u_tilde^k * d_tilde^(n-k)
// computed directly from the formula so recombination is bit-exact.
struct StockLattice {
    std::vector<std::vector<double>> node_values;
    int n_steps() const { return static_cast<int>(node_values.size()) - 1; }
    double value(int n, int k) const { return node_values[n][k]; }
};

StockLattice build_stock_lattice(const LatticeParams& params);

// Finite-state Markov chain on a per-time state grid. states[n] lists the
// values at time n; transitions[n] is the |states[n]| x |states[n+1]|
// row-stochastic step matrix. Immutable after construction.
struct Chain {
    std::vector<std::vector<double>> states;
    std::vector<std::vector<std::vector<double>>> transitions;

    int n_steps() const { return static_cast<int>(states.size()) - 1; }
    int n_states(int n) const { return static_cast<int>(states[n].size()); }
    double state(int n, int j) const { return states[n][j]; }
    double prob(int n, int from, int to) const { return transitions[n][from][to]; }

    // Throws InvalidParams when a row fails to sum to 1 within 1e-12 or an
    // entry leaves [0,1].
    void validate() const;

    // P(X_n = state j) propagated from the point mass at states[0][0].
    std::vector<std::vector<double>> forward_marginals() const;

    // Y_{n+1} = Y_n +/- sigma*sqrt(dt) with up-probability p_up.
    // sigma == 0 collapses to a single-state chain.
    static Chain additive_binomial(double y0, double sigma, double p_up,
                                   double dt, int n_steps);
    // Z_{n+1} = Z_n * exp(+/- sigma*sqrt(dt)) with up-probability p_up.
    static Chain multiplicative_binomial(double z0, double sigma, double p_up,
                                         double dt, int n_steps);
};

// Dot product of the transition row (n, state) with values over states at n+1.
double step_expectation(const Chain& chain, int n, int state,
                        std::span<const double> values);

// Joint law P_n(s-node, y-state) propagated with per-node up-probabilities
// p_table[n](s_idx, y_idx); the stock step and the y step are independent
// given the current node. Throws ProbabilityLeak when a slice sum drifts
// from 1 by more than 1e-8.
std::vector<Grid2> forward_joint_distribution(const StockLattice& lattice,
                                              const Chain& y_chain,
                                              const std::vector<Grid2>& p_table);

}  // namespace treemfe
