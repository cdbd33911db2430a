#include "treemfe/lattice.hpp"

#include <cmath>
#include <string>

namespace treemfe {

double LatticeParams::beta() const { return std::exp(rate * dt()); }

double LatticeParams::beta_pow(int k) const {
    double base = beta();
    double out = 1.0;
    for (; k > 0; k >>= 1) {
        if (k & 1) out *= base;
        base *= base;
    }
    return out;
}

void LatticeParams::validate() const {
    if (n_steps < 1) throw InvalidParams("lattice: n_steps must be >= 1");
    if (!(horizon > 0.0)) throw InvalidParams("lattice: horizon must be > 0");
    if (!(s0 > 0.0)) throw InvalidParams("lattice: s0 must be > 0");
    const double b = beta();
    if (!(0.0 < d_tilde && d_tilde < b && b < u_tilde))
        throw InvalidParams("lattice: requires 0 < d_tilde < exp(r*dt) < u_tilde");
}

double risk_neutral_up_prob(const LatticeParams& params) {
    params.validate();
    return -params.down() / (params.up() - params.down());
}

StockLattice build_stock_lattice(const LatticeParams& params) {
    params.validate();
    StockLattice lat;
    lat.node_values.resize(params.n_steps + 1);
    for (int n = 0; n <= params.n_steps; ++n) {
        lat.node_values[n].resize(n + 1);
        for (int k = 0; k <= n; ++k)
            lat.node_values[n][k] =
                params.s0 * std::pow(params.u_tilde, k) * std::pow(params.d_tilde, n - k);
    }
    return lat;
}

void Chain::validate() const {
    if (states.empty()) throw InvalidParams("chain: no state slices");
    if (transitions.size() + 1 != states.size())
        throw InvalidParams("chain: transitions must have one slice per step");
    for (std::size_t n = 0; n < transitions.size(); ++n) {
        if (transitions[n].size() != states[n].size())
            throw InvalidParams("chain: row count mismatch at step " + std::to_string(n));
        for (std::size_t i = 0; i < transitions[n].size(); ++i) {
            const auto& row = transitions[n][i];
            if (row.size() != states[n + 1].size())
                throw InvalidParams("chain: column count mismatch at step " +
                                    std::to_string(n));
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0 || p > 1.0)
                    throw InvalidParams("chain: transition entry outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw InvalidParams("chain: transition row does not sum to 1 at step " +
                                    std::to_string(n));
        }
    }
}

std::vector<std::vector<double>> Chain::forward_marginals() const {
    std::vector<std::vector<double>> law(states.size());
    law[0].assign(states[0].size(), 0.0);
    law[0][0] = 1.0;
    for (std::size_t n = 0; n + 1 < states.size(); ++n) {
        law[n + 1].assign(states[n + 1].size(), 0.0);
        for (std::size_t i = 0; i < states[n].size(); ++i) {
            const double mass = law[n][i];
            if (mass == 0.0) continue;
            for (std::size_t j = 0; j < states[n + 1].size(); ++j)
                law[n + 1][j] += mass * transitions[n][i][j];
        }
    }
    return law;
}

Chain Chain::additive_binomial(double y0, double sigma, double p_up, double dt,
                               int n_steps) {
    if (p_up < 0.0 || p_up > 1.0)
        throw InvalidParams("chain: up-probability outside [0,1]");
    Chain c;
    if (sigma == 0.0) {
        c.states.assign(n_steps + 1, {y0});
        c.transitions.assign(n_steps, {{1.0}});
        return c;
    }
    const double h = sigma * std::sqrt(dt);
    c.states.resize(n_steps + 1);
    c.transitions.resize(n_steps);
    for (int n = 0; n <= n_steps; ++n) {
        c.states[n].resize(n + 1);
        for (int k = 0; k <= n; ++k) c.states[n][k] = y0 + (2 * k - n) * h;
    }
    for (int n = 0; n < n_steps; ++n) {
        c.transitions[n].assign(n + 1, std::vector<double>(n + 2, 0.0));
        for (int k = 0; k <= n; ++k) {
            c.transitions[n][k][k + 1] = p_up;
            c.transitions[n][k][k] = 1.0 - p_up;
        }
    }
    return c;
}

Chain Chain::multiplicative_binomial(double z0, double sigma, double p_up,
                                     double dt, int n_steps) {
    if (p_up < 0.0 || p_up > 1.0)
        throw InvalidParams("chain: up-probability outside [0,1]");
    Chain c;
    if (sigma == 0.0) {
        c.states.assign(n_steps + 1, {z0});
        c.transitions.assign(n_steps, {{1.0}});
        return c;
    }
    const double g = std::exp(sigma * std::sqrt(dt));
    c.states.resize(n_steps + 1);
    c.transitions.resize(n_steps);
    for (int n = 0; n <= n_steps; ++n) {
        c.states[n].resize(n + 1);
        for (int k = 0; k <= n; ++k)
            c.states[n][k] = z0 * std::pow(g, k) * std::pow(1.0 / g, n - k);
    }
    for (int n = 0; n < n_steps; ++n) {
        c.transitions[n].assign(n + 1, std::vector<double>(n + 2, 0.0));
        for (int k = 0; k <= n; ++k) {
            c.transitions[n][k][k + 1] = p_up;
            c.transitions[n][k][k] = 1.0 - p_up;
        }
    }
    return c;
}

double step_expectation(const Chain& chain, int n, int state,
                        std::span<const double> values) {
    if (n < 0 || n >= static_cast<int>(chain.transitions.size()))
        throw IndexOutOfRange("step_expectation: time index out of range");
    if (state < 0 || state >= chain.n_states(n))
        throw IndexOutOfRange("step_expectation: state index out of range");
    const auto& row = chain.transitions[n][state];
    if (values.size() != row.size())
        throw IndexOutOfRange("step_expectation: value count mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * values[j];
    return s;
}

std::vector<Grid2> forward_joint_distribution(const StockLattice& lattice,
                                              const Chain& y_chain,
                                              const std::vector<Grid2>& p_table) {
    const int n_steps = lattice.n_steps();
    if (static_cast<int>(p_table.size()) != n_steps)
        throw IndexOutOfRange("forward_joint_distribution: p_table slice count");
    std::vector<Grid2> law(n_steps + 1);
    law[0] = Grid2(1, y_chain.n_states(0));
    law[0](0, 0) = 1.0;

    for (int n = 0; n < n_steps; ++n) {
        const int ny_next = y_chain.n_states(n + 1);
        law[n + 1] = Grid2(n + 2, ny_next);
        for (int k = 0; k <= n; ++k) {
            for (int y = 0; y < y_chain.n_states(n); ++y) {
                const double mass = law[n](k, y);
                if (mass == 0.0) continue;
                const double p = p_table[n](k, y);
                const auto& row = y_chain.transitions[n][y];
                for (int y2 = 0; y2 < ny_next; ++y2) {
                    const double m = mass * row[y2];
                    if (m == 0.0) continue;
                    law[n + 1](k + 1, y2) += m * p;
                    law[n + 1](k, y2) += m * (1.0 - p);
                }
            }
        }
        double sum = 0.0;
        for (double x : law[n + 1].data()) sum += x;
        if (std::abs(sum - 1.0) > 1e-8)
            throw ProbabilityLeak("forward_joint_distribution: slice " +
                                  std::to_string(n + 1) + " mass " +
                                  std::to_string(sum));
    }
    return law;
}

}  // namespace treemfe
