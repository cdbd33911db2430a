#include "treemfe/engine.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "treemfe/errors.hpp"
#include "treemfe/linalg.hpp"

namespace treemfe {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(e^a + e^b); tolerates -inf operands.
inline double lse2(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

int env_threads() {
    static const int n = [] {
        if (const char* s = std::getenv("TREEMFE_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(s, &end, 10);
            if (end != s && *end == '\0' && v >= 1 && v <= 256)
                return static_cast<int>(v);
        }
        unsigned hc = std::thread::hardware_concurrency();
        if (hc == 0) hc = 1;
        return static_cast<int>(std::min(hc, 16u));
    }();
    return n;
}

// Runs fn(i) for i in [0, count). Every invocation writes to slots owned by
// its own i, so results are identical for any thread count. fn must not throw.
template <class Fn>
void parallel_for(int count, std::int64_t work_per_item, const Fn& fn) {
    const int nt = std::min(env_threads(), count);
    if (nt <= 1 || work_per_item * count < 16384) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    const auto drain = [&] {
        for (;;) {
            const int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (int t = 0; t + 1 < nt; ++t) pool.emplace_back(drain);
    drain();
    for (auto& th : pool) th.join();
}

struct Entry {
    int to;
    double logp;
};

// Nonzero entries of one chain step, with log-probabilities.
std::vector<std::vector<Entry>> sparse_step(const Chain& chain, int n) {
    std::vector<std::vector<Entry>> rows(chain.n_states(n));
    for (int i = 0; i < chain.n_states(n); ++i)
        for (int j = 0; j < chain.n_states(n + 1); ++j) {
            const double p = chain.prob(n, i, j);
            if (p > 0.0) rows[i].push_back({j, std::log(p)});
        }
    return rows;
}

struct PopCache {
    int n_types = 0;
    std::vector<double> type_w;
    std::vector<double> gamma;
    std::vector<std::vector<double>> theta;               // per type, length m
    std::vector<std::vector<std::vector<Entry>>> z_rows;  // [step][state]
    std::vector<std::vector<double>> z_marg;              // [time][state]
    double mean_inv_gamma = 0.0;                          // E[1/gamma], unscaled
};

enum class Branch { Single, Regular, Singular };

EquilibriumSolution solve_impl(const MarketSpec& spec,
                               const std::vector<Grid2>* exo_p,
                               const SolveOptions& opts) {
    spec.validate();
    const int N = spec.lattice.n_steps;
    const int m = spec.n_pops();
    const bool path = spec.path_mode;
    const double u = spec.lattice.up();
    const double d = spec.lattice.down();
    const double ud = u - d;
    const double log_u = std::log(u);
    const double log_negd = std::log(-d);
    const auto n_s = [&](int n) { return path ? 1 << n : n + 1; };

    EquilibriumSolution sol;
    sol.spec = spec;
    sol.lattice = build_stock_lattice(spec.lattice);
    sol.mode = path ? EquilibriumSolution::Mode::PathDependent
                    : EquilibriumSolution::Mode::Markovian;

    const Mat theta = interaction_matrix(spec);
    sol.classification = classify_regime(theta);
    const RegimeClassification& rc = sol.classification;
    const double mean_theta = theta(0, 0);  // single-population branch only

    Branch branch = Branch::Single;
    if (m == 1) {
        sol.regime = EquilibriumSolution::Regime::Single;
        if (exo_p && std::abs(1.0 - mean_theta) <= 1e-10)
            throw RegimeError(
                "exogenous-price solve needs mean concern != 1 for a single population", 1);
    } else {
        switch (rc.kind) {
            case RegimeClassification::Kind::Regular:
                branch = Branch::Regular;
                sol.regime = EquilibriumSolution::Regime::MultiRegular;
                break;
            case RegimeClassification::Kind::SingularRank1:
                if (exo_p)
                    throw RegimeError(
                        "exogenous-price solve needs an invertible interaction system", 1);
                branch = Branch::Singular;
                sol.regime = EquilibriumSolution::Regime::MultiSingular;
                break;
            case RegimeClassification::Kind::Unsolvable:
                throw RegimeError("interaction kernel dimension " +
                                      std::to_string(rc.kernel_dim) +
                                      " admits no equilibrium",
                                  rc.kernel_dim);
        }
    }

    if (exo_p) {
        if (static_cast<int>(exo_p->size()) != N)
            throw InvalidParams("exogenous probabilities: need one slice per step");
        for (int n = 0; n < N; ++n) {
            const Grid2& g = (*exo_p)[n];
            if (g.rows() != n_s(n) || g.cols() != spec.y_chain.n_states(n))
                throw InvalidParams("exogenous probabilities: slice " + std::to_string(n) +
                                    " has wrong shape");
            for (const double p : g.data())
                if (!(p > 0.0 && p < 1.0))
                    throw ProbabilityBound("exogenous transition probability outside (0,1)");
        }
    }

    std::vector<PopCache> pc(m);
    Vec popw(m);
    for (int p = 0; p < m; ++p) {
        const PopulationSpec& ps = spec.populations[p];
        popw[p] = ps.pop_weight;
        PopCache& c = pc[p];
        c.n_types = static_cast<int>(ps.agent_types.size());
        for (const AgentType& t : ps.agent_types) {
            c.type_w.push_back(t.weight);
            c.gamma.push_back(t.gamma);
            c.theta.push_back(t.theta_row);
            c.mean_inv_gamma += t.weight / t.gamma;
        }
        c.z_marg = ps.z_chain.forward_marginals();
        c.z_rows.resize(N);
        for (int n = 0; n < N; ++n) c.z_rows[n] = sparse_step(ps.z_chain, n);
    }
    std::vector<std::vector<std::vector<Entry>>> y_rows(N);
    for (int n = 0; n < N; ++n) y_rows[n] = sparse_step(spec.y_chain, n);

    // Non-degeneracy of the per-slice ring averages. They scale uniformly in
    // time (1/gamma_n = beta^{n-N}/gamma), so one check covers every slice.
    Vec tring_base(m);
    for (int p = 0; p < m; ++p) tring_base[p] = pc[p].mean_inv_gamma;
    Vec a_tring_base;  // (I-Theta)^{-1} applied to the unscaled ring averages
    double sa = 0.0;   // 1/(1 - mean_theta), exogenous-price single branch
    if (branch == Branch::Regular) {
        a_tring_base = rc.inv.apply(tring_base);
        const double agg = dot(popw, a_tring_base);
        double mass = 0.0;
        for (int p = 0; p < m; ++p) mass += std::abs(popw[p] * a_tring_base[p]);
        if (!(std::abs(agg) > 1e-12 * mass))
            throw DegeneracyError("aggregate effective risk tolerance vanishes");
    } else if (branch == Branch::Singular) {
        if (!(std::abs(dot(rc.v, tring_base)) > 1e-12 * norm2(tring_base)))
            throw DegeneracyError("kernel direction orthogonal to risk-tolerance averages");
        if (!(std::abs(dot(popw, rc.kappa)) > 1e-12 * norm2(popw)))
            throw DegeneracyError("population weights orthogonal to kernel direction");
    } else if (exo_p) {
        sa = 1.0 / (1.0 - mean_theta);
    }
    const double w_dot_kappa = branch == Branch::Singular ? dot(popw, rc.kappa) : 0.0;

    sol.p_up.resize(N);
    sol.mean_strategy.assign(m, std::vector<Grid2>(N));
    if (opts.keep_strategies) sol.strategies.assign(m, std::vector<Grid4>(N));
    if (opts.keep_log_liability) sol.log_liability.assign(m, std::vector<Grid4>(N + 1));

    // Terminal condition: log V_N = gamma * F.
    std::vector<Grid4> logv(m), logv_next(m);
    for (int p = 0; p < m; ++p) {
        const int nz = spec.populations[p].z_chain.n_states(N);
        Grid4 g(n_s(N), spec.y_chain.n_states(N), nz, pc[p].n_types);
        for (int s = 0; s < n_s(N); ++s)
            for (int y = 0; y < spec.y_chain.n_states(N); ++y)
                for (int z = 0; z < nz; ++z) {
                    const double f = liability_value(spec, sol.lattice, p, s, y, z, path);
                    for (int t = 0; t < pc[p].n_types; ++t)
                        g(s, y, z, t) = pc[p].gamma[t] * f;
                }
        logv[p] = std::move(g);
        if (opts.keep_log_liability) sol.log_liability[p][N] = logv[p];
    }

    std::vector<Grid4> eg(m), phi(m);
    for (int n = N; n >= 1; --n) {
        const int k = n - 1;
        const int ns_k = n_s(k), ns_n = n_s(n);
        const int ny_k = spec.y_chain.n_states(k), ny_n = spec.y_chain.n_states(n);
        const double gscale = spec.lattice.gamma_scale(n);
        const double scale_inv = 1.0 / gscale;

        // Conditional expectations of V_n at each child stock state, given the
        // time-k common factor and idiosyncratic state: z-mix, then y-mix.
        for (int p = 0; p < m; ++p) {
            const PopCache& c = pc[p];
            const int nz_k = spec.populations[p].z_chain.n_states(k);
            const int T = c.n_types;
            const Grid4& lv = logv[p];
            Grid4 a1(ns_n, ny_n, nz_k, T);
            parallel_for(ns_n, static_cast<std::int64_t>(ny_n) * nz_k * T * 4, [&](int s) {
                for (int y = 0; y < ny_n; ++y)
                    for (int z = 0; z < nz_k; ++z) {
                        const auto& row = c.z_rows[k][z];
                        for (int t = 0; t < T; ++t) {
                            double acc = kNegInf;
                            for (const Entry& e : row)
                                acc = lse2(acc, e.logp + lv(s, y, e.to, t));
                            a1(s, y, z, t) = acc;
                        }
                    }
            });
            Grid4 e(ns_n, ny_k, nz_k, T);
            parallel_for(ns_n, static_cast<std::int64_t>(ny_k) * nz_k * T * 4, [&](int s) {
                for (int y = 0; y < ny_k; ++y) {
                    const auto& row = y_rows[k][y];
                    for (int z = 0; z < nz_k; ++z)
                        for (int t = 0; t < T; ++t) {
                            double acc = kNegInf;
                            for (const Entry& e2 : row)
                                acc = lse2(acc, e2.logp + a1(s, e2.to, z, t));
                            e(s, y, z, t) = acc;
                        }
                }
            });
            eg[p] = std::move(e);
        }

        Vec tring(m);
        for (int p = 0; p < m; ++p) tring[p] = tring_base[p] * scale_inv;
        Vec a_t(m, 0.0);
        double t_agg = 0.0, vt = 0.0;
        if (branch == Branch::Regular) {
            for (int p = 0; p < m; ++p) a_t[p] = a_tring_base[p] * scale_inv;
            t_agg = dot(popw, a_t);
        } else if (branch == Branch::Singular) {
            vt = dot(rc.v, tring);
        } else if (exo_p) {
            a_t[0] = tring[0] * sa;
        }

        Grid2 pgrid(ns_k, ny_k);
        std::vector<int> total_z(m);
        std::int64_t node_work = 0;
        for (int p = 0; p < m; ++p) {
            const int nz_k = spec.populations[p].z_chain.n_states(k);
            total_z[p] = nz_k;
            node_work += static_cast<std::int64_t>(ny_k) * nz_k * pc[p].n_types * 8;
            phi[p] = Grid4(ns_k, ny_k, nz_k, pc[p].n_types);
            sol.mean_strategy[p][k] = Grid2(ns_k, ny_k);
            logv_next[p] = Grid4(ns_k, ny_k, nz_k, pc[p].n_types);
        }
        std::vector<double> res_by_s(ns_k, 0.0), minp_by_s(ns_k, 1.0), maxp_by_s(ns_k, 0.0);
        std::vector<char> bad_by_s(ns_k, 0);

        parallel_for(ns_k, node_work, [&](int s) {
            const int su = path ? s | (1 << k) : s + 1;
            const int sd = s;
            Vec vring(m), delta(m), scratch(m);
            double res = 0.0, pmin = 1.0, pmax = 0.0;
            bool bad = false;
            for (int y = 0; y < ny_k; ++y) {
                // Ring averages of log f / gamma_n over each population.
                for (int p = 0; p < m; ++p) {
                    const PopCache& c = pc[p];
                    const Grid4& e = eg[p];
                    const auto& mz = c.z_marg[k];
                    double acc = 0.0;
                    for (int t = 0; t < c.n_types; ++t) {
                        double ez = 0.0;
                        for (int z = 0; z < total_z[p]; ++z)
                            ez += mz[z] * (e(su, y, z, t) - e(sd, y, z, t));
                        acc += c.type_w[t] / (c.gamma[t] * gscale) * ez;
                    }
                    vring[p] = acc;
                }
                const double L = order_flow_value(spec, sol.lattice, k, s, y, path);

                double pup, lr;
                if (exo_p) {
                    pup = (*exo_p)[k](s, y);
                    lr = std::log(pup) + log_u - std::log1p(-pup) - log_negd;
                } else {
                    double x;
                    if (branch == Branch::Single)
                        x = (vring[0] - (1.0 - mean_theta) * ud * L) / tring[0];
                    else if (branch == Branch::Regular)
                        x = (dot(popw, rc.inv.apply(vring)) - ud * L) / t_agg;
                    else
                        x = dot(rc.v, vring) / vt;
                    pup = -d / (u * std::exp(x) - d);
                    lr = -x;  // log(-p u / (q d)) collapses against the transition form
                }
                if (!(pup > 0.0 && pup < 1.0)) bad = true;
                pmin = std::min(pmin, pup);
                pmax = std::max(pmax, pup);
                pgrid(s, y) = pup;

                // Interaction terms Delta = (u-d) * mean strategies.
                if (exo_p) {
                    if (m == 1) {
                        delta[0] = lr * a_t[0] + vring[0] * sa;
                    } else {
                        scratch = rc.inv.apply(vring);
                        for (int p = 0; p < m; ++p) delta[p] = lr * a_t[p] + scratch[p];
                    }
                } else if (branch == Branch::Single) {
                    delta[0] = ud * L;
                } else if (branch == Branch::Regular) {
                    scratch = rc.inv.apply(vring);
                    for (int p = 0; p < m; ++p) delta[p] = lr * a_t[p] + scratch[p];
                } else {
                    for (int p = 0; p < m; ++p) scratch[p] = vring[p] + lr * tring[p];
                    const Vec gu = rc.g.apply(scratch);
                    const double dn = (ud * L - dot(popw, gu)) / w_dot_kappa;
                    for (int p = 0; p < m; ++p) delta[p] = gu[p] + dn * rc.kappa[p];
                }
                double mass = 0.0;
                for (int p = 0; p < m; ++p) {
                    const double mp = delta[p] / ud;
                    sol.mean_strategy[p][k](s, y) = mp;
                    mass += popw[p] * mp;
                }
                if (!exo_p) res = std::max(res, std::abs(mass - L));

                // Optimal positions and the value recursion. gamma_n times the
                // recentred position reduces to (lr + log f)/(u-d).
                const double lpu = std::log(pup), lq = std::log1p(-pup);
                for (int p = 0; p < m; ++p) {
                    const PopCache& c = pc[p];
                    const Grid4& e = eg[p];
                    Grid4& ph = phi[p];
                    Grid4& lvn = logv_next[p];
                    for (int z = 0; z < total_z[p]; ++z)
                        for (int t = 0; t < c.n_types; ++t) {
                            const double eu = e(su, y, z, t);
                            const double ed = e(sd, y, z, t);
                            const double cc = (lr + (eu - ed)) / ud;
                            const auto& trow = c.theta[t];
                            double td = 0.0;
                            for (int j = 0; j < m; ++j) td += trow[j] * delta[j];
                            ph(s, y, z, t) = td / ud + cc / (c.gamma[t] * gscale);
                            lvn(s, y, z, t) = lse2(lpu - u * cc + eu, lq - d * cc + ed);
                        }
                }
            }
            res_by_s[s] = res;
            minp_by_s[s] = pmin;
            maxp_by_s[s] = pmax;
            bad_by_s[s] = bad ? 1 : 0;
        });

        for (int s = 0; s < ns_k; ++s) {
            if (bad_by_s[s])
                throw ProbabilityBound("transition probability left (0,1) at step " +
                                       std::to_string(k));
            sol.min_p = std::min(sol.min_p, minp_by_s[s]);
            sol.max_p = std::max(sol.max_p, maxp_by_s[s]);
            sol.max_clearing_residual = std::max(sol.max_clearing_residual, res_by_s[s]);
        }
        sol.p_up[k] = std::move(pgrid);
        for (int p = 0; p < m; ++p) {
            if (opts.keep_strategies) sol.strategies[p][k] = std::move(phi[p]);
            if (opts.keep_log_liability) sol.log_liability[p][k] = logv_next[p];
        }
        std::swap(logv, logv_next);
    }
    return sol;
}

}  // namespace

double EquilibriumSolution::stock_value(int n, int s_idx) const {
    if (n < 0 || n > n_steps() || s_idx < 0 || s_idx >= n_stock_states(n))
        throw IndexOutOfRange("stock state (" + std::to_string(n) + ", " +
                              std::to_string(s_idx) + ")");
    const int node = mode == Mode::PathDependent
                         ? std::popcount(static_cast<unsigned>(s_idx))
                         : s_idx;
    return lattice.value(n, node);
}

int EquilibriumSolution::terminal_node(int s_idx) const {
    if (s_idx < 0 || s_idx >= n_stock_states(n_steps()))
        throw IndexOutOfRange("terminal state " + std::to_string(s_idx));
    return mode == Mode::PathDependent ? std::popcount(static_cast<unsigned>(s_idx))
                                       : s_idx;
}

double EquilibriumSolution::strategy(int n, int s_idx, int y_idx, int z_idx, int pop,
                                     int type) const {
    if (strategies.empty()) throw Error("strategies were not retained by the solver");
    if (pop < 0 || pop >= spec.n_pops()) throw IndexOutOfRange("population index");
    if (n < 0 || n >= n_steps()) throw IndexOutOfRange("time index");
    const Grid4& g = strategies[pop][n];
    if (s_idx < 0 || s_idx >= g.ns() || y_idx < 0 || y_idx >= g.ny() || z_idx < 0 ||
        z_idx >= g.nz() || type < 0 || type >= g.nt())
        throw IndexOutOfRange("strategy state index");
    return g(s_idx, y_idx, z_idx, type);
}

double EquilibriumSolution::interaction_term(int n, int s_idx, int y_idx, int pop) const {
    if (pop < 0 || pop >= spec.n_pops()) throw IndexOutOfRange("population index");
    if (n < 0 || n >= n_steps()) throw IndexOutOfRange("time index");
    const Grid2& g = mean_strategy[pop][n];
    if (s_idx < 0 || s_idx >= g.rows() || y_idx < 0 || y_idx >= g.cols())
        throw IndexOutOfRange("node index");
    return (spec.lattice.up() - spec.lattice.down()) * g(s_idx, y_idx);
}

std::vector<Grid2> EquilibriumSolution::forward_law() const {
    const int N = n_steps();
    std::vector<Grid2> law(N + 1);
    law[0] = Grid2(n_stock_states(0), spec.y_chain.n_states(0));
    law[0](0, 0) = 1.0;
    for (int n = 0; n < N; ++n) {
        law[n + 1] = Grid2(n_stock_states(n + 1), spec.y_chain.n_states(n + 1));
        for (int s = 0; s < law[n].rows(); ++s) {
            const int su = mode == Mode::PathDependent ? s | (1 << n) : s + 1;
            for (int y = 0; y < law[n].cols(); ++y) {
                const double mass = law[n](s, y);
                if (mass == 0.0) continue;
                const double pup = p_up[n](s, y);
                for (int y2 = 0; y2 < spec.y_chain.n_states(n + 1); ++y2) {
                    const double py = spec.y_chain.prob(n, y, y2);
                    if (py == 0.0) continue;
                    law[n + 1](su, y2) += mass * pup * py;
                    law[n + 1](s, y2) += mass * (1.0 - pup) * py;
                }
            }
        }
    }
    return law;
}

double one_period_optimal(double p, double u, double d, double gamma_n,
                          std::span<const double> theta_row,
                          std::span<const double> delta_n, double log_f) {
    if (!(p > 0.0 && p < 1.0))
        throw ProbabilityBound("transition probability outside (0,1)");
    if (!(u > 0.0) || !(d < 0.0)) throw InvalidParams("excess moves must satisfy u > 0 > d");
    if (!(gamma_n > 0.0)) throw InvalidParams("risk aversion must be positive");
    if (theta_row.size() != delta_n.size())
        throw InvalidParams("concern row and interaction vector lengths differ");
    const double lr = std::log(p * u) - std::log((1.0 - p) * -d);
    double td = 0.0;
    for (std::size_t i = 0; i < theta_row.size(); ++i) td += theta_row[i] * delta_n[i];
    return td / (u - d) + (lr + log_f) / (gamma_n * (u - d));
}

EquilibriumSolution solve_rp_mfe(const MarketSpec& spec,
                                 const std::vector<Grid2>& exogenous_p,
                                 const SolveOptions& opts) {
    return solve_impl(spec, &exogenous_p, opts);
}

EquilibriumSolution solve_mc_mfe(const MarketSpec& spec, const SolveOptions& opts) {
    return solve_impl(spec, nullptr, opts);
}

std::vector<double> mean_field_path(const EquilibriumSolution& sol,
                                    const std::vector<PathStep>& path, int pop) {
    const int N = sol.n_steps();
    if (pop < 0 || pop >= sol.spec.n_pops()) throw IndexOutOfRange("population index");
    if (static_cast<int>(path.size()) != N)
        throw InvalidPath("path must have one step per period");
    const double u = sol.spec.lattice.up();
    const double d = sol.spec.lattice.down();
    const double beta = sol.spec.lattice.beta();
    std::vector<double> mu(N + 1);
    mu[0] = sol.spec.populations[pop].xi_mean;
    int s = 0, y = 0;
    for (int k = 0; k < N; ++k) {
        const PathStep& st = path[k];
        if (st.y_next < 0 || st.y_next >= sol.spec.y_chain.n_states(k + 1))
            throw InvalidPath("y-state out of range at step " + std::to_string(k));
        if (!(sol.spec.y_chain.prob(k, y, st.y_next) > 0.0))
            throw InvalidPath("zero-probability y-move at step " + std::to_string(k));
        mu[k + 1] = beta * mu[k] + (st.up ? u : d) * sol.mean_strategy[pop][k](s, y);
        if (st.up)
            s = sol.mode == EquilibriumSolution::Mode::PathDependent ? s | (1 << k)
                                                                     : s + 1;
        y = st.y_next;
    }
    return mu;
}

}  // namespace treemfe
