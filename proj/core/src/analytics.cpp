#include "treemfe/analytics.hpp"

#include <cmath>
#include <utility>

#include "treemfe/csv.hpp"
#include "treemfe/errors.hpp"

namespace treemfe {

std::vector<double> terminal_distribution(const EquilibriumSolution& sol) {
    const int N = sol.n_steps();
    const std::vector<Grid2> law = sol.forward_law();
    const Grid2& last = law[N];
    std::vector<double> dist(N + 1, 0.0);
    for (int s = 0; s < last.rows(); ++s) {
        const int node = sol.terminal_node(s);
        for (int y = 0; y < last.cols(); ++y) dist[node] += last(s, y);
    }
    double mass = 0.0;
    for (const double p : dist) mass += p;
    if (std::abs(mass - 1.0) > 1e-10)
        throw ProbabilityLeak("terminal distribution mass " + format_double(mass));
    return dist;
}

std::vector<double> expected_price_curve(const EquilibriumSolution& sol) {
    const int N = sol.n_steps();
    const std::vector<Grid2> law = sol.forward_law();
    std::vector<double> curve(N + 1, 0.0);
    for (int n = 0; n <= N; ++n)
        for (int s = 0; s < law[n].rows(); ++s) {
            const double sv = sol.stock_value(n, s);
            for (int y = 0; y < law[n].cols(); ++y) curve[n] += law[n](s, y) * sv;
        }
    return curve;
}

double strategy_rms(const EquilibriumSolution& sol, int pop, int n) {
    if (pop < 0 || pop >= sol.spec.n_pops()) throw IndexOutOfRange("population index");
    if (n < 0 || n >= sol.n_steps()) throw IndexOutOfRange("time index");
    if (sol.strategies.empty()) throw Error("strategies were not retained by the solver");
    const std::vector<Grid2> law = sol.forward_law();
    const auto zmarg = sol.spec.populations[pop].z_chain.forward_marginals();
    const auto& types = sol.spec.populations[pop].agent_types;
    const Grid4& phi = sol.strategies[pop][n];
    double acc = 0.0;
    for (int s = 0; s < law[n].rows(); ++s)
        for (int y = 0; y < law[n].cols(); ++y) {
            const double mass = law[n](s, y);
            if (mass == 0.0) continue;
            double inner = 0.0;
            for (int z = 0; z < phi.nz(); ++z) {
                if (zmarg[n][z] == 0.0) continue;
                double bt = 0.0;
                for (int t = 0; t < phi.nt(); ++t) {
                    const double v = phi(s, y, z, t);
                    bt += types[t].weight * v * v;
                }
                inner += zmarg[n][z] * bt;
            }
            acc += mass * inner;
        }
    return std::sqrt(acc);
}

namespace {

MarketSpec perturb_diagonal(const MarketSpec& spec, double eps) {
    MarketSpec out = spec;
    for (int p = 0; p < out.n_pops(); ++p)
        for (AgentType& t : out.populations[p].agent_types) t.theta_row[p] -= eps;
    return out;
}

double max_abs_diff(const Grid2& a, const Grid2& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        mx = std::max(mx, std::abs(a.data()[i] - b.data()[i]));
    return mx;
}

double max_abs_diff(const Grid4& a, const Grid4& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        mx = std::max(mx, std::abs(a.data()[i] - b.data()[i]));
    return mx;
}

}  // namespace

ContinuityTable continuity_probe(const MarketSpec& spec,
                                 const std::vector<double>& eps_list) {
    const RegimeClassification rc = classify_regime(interaction_matrix(spec));
    if (rc.kind != RegimeClassification::Kind::SingularRank1)
        throw NotSingular("continuity probe needs a rank-1 singular interaction system");
    if (!rc.simple_pole)
        throw SimplePoleRequired(
            "kernel vectors are orthogonal; the singular point is not a simple pole");
    const EquilibriumSolution base = solve_mc_mfe(spec);

    ContinuityTable table;
    for (const double eps : eps_list) {
        if (eps == 0.0) throw InvalidParams("continuity probe: eps must be nonzero");
        const MarketSpec pspec = perturb_diagonal(spec, eps);
        const RegimeClassification prc = classify_regime(interaction_matrix(pspec));
        if (prc.kind != RegimeClassification::Kind::Regular)
            throw InvalidParams("continuity probe: eps " + format_double(eps) +
                                " does not regularize the interaction system");
        const EquilibriumSolution sol = solve_mc_mfe(pspec);
        double pdev = 0.0, fdev = 0.0;
        for (int n = 0; n < base.n_steps(); ++n) {
            pdev = std::max(pdev, max_abs_diff(sol.p_up[n], base.p_up[n]));
            for (int p = 0; p < base.spec.n_pops(); ++p)
                fdev = std::max(fdev,
                                max_abs_diff(sol.strategies[p][n], base.strategies[p][n]));
        }
        table.eps.push_back(eps);
        table.p_deviation.push_back(pdev);
        table.phi_deviation.push_back(fdev);
    }
    return table;
}

namespace {

std::string regime_name(RegimeClassification::Kind kind) {
    switch (kind) {
        case RegimeClassification::Kind::Regular: return "Regular";
        case RegimeClassification::Kind::SingularRank1: return "SingularRank1";
        case RegimeClassification::Kind::Unsolvable: return "Unsolvable";
    }
    return "Unsolvable";
}

// Maps a time in years onto a step index of the given lattice.
int time_to_step(double t, const LatticeParams& lp) {
    const double dt = lp.dt();
    const long n = std::lround(t / dt);
    if (n < 0 || n >= lp.n_steps || std::abs(n * dt - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw InvalidParams("time " + format_double(t) + " is not a strategy grid point");
    return static_cast<int>(n);
}

}  // namespace

SweepResult sweep(const std::string& config_document,
                  const std::vector<std::string>& axis,
                  const std::vector<double>& values, const SweepOutputs& outputs) {
    if (axis.empty()) throw InvalidParams("sweep: axis must name at least one config path");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1]))
            throw InvalidParams("sweep: axis values must be strictly increasing");

    SweepResult result;
    result.axis = axis;
    result.values = values;

    const MarketSpec tmpl = parse_config(config_document);
    for (const double t : outputs.rms_times) time_to_step(t, tmpl.lattice);
    for (const auto& pop : tmpl.populations)
        for (const double t : outputs.rms_times)
            result.rms_columns.push_back("rms_" + pop.label + "_t" + format_double(t));

    for (const double value : values) {
        SweepRow row;
        row.value = value;
        try {
            std::vector<std::string> overrides;
            for (const std::string& path : axis)
                overrides.push_back(path + "=" + format_double(value));
            const MarketSpec spec = parse_config(apply_overrides(config_document, overrides));
            row.regime = regime_name(classify_regime(interaction_matrix(spec)).kind);
            const EquilibriumSolution sol = solve_mc_mfe(spec);
            if (outputs.terminal_mean) {
                const std::vector<double> dist = terminal_distribution(sol);
                double mean = 0.0;
                for (int k = 0; k <= sol.n_steps(); ++k)
                    mean += dist[k] * sol.lattice.value(sol.n_steps(), k);
                row.terminal_mean = mean;
            }
            for (int p = 0; p < spec.n_pops(); ++p)
                for (const double t : outputs.rms_times)
                    row.rms.push_back(strategy_rms(sol, p, time_to_step(t, spec.lattice)));
        } catch (const Error& e) {
            if (row.regime.empty()) row.regime = "error";
            row.error = e.what();
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace treemfe
