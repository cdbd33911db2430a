#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "treemfe/analytics.hpp"
#include "treemfe/csv.hpp"
#include "treemfe/engine.hpp"
#include "treemfe/errors.hpp"
#include "treemfe/lattice.hpp"
#include "treemfe/linalg.hpp"
#include "treemfe/mcsim.hpp"
#include "treemfe/model.hpp"

namespace {

using nlohmann::json;
using namespace treemfe;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string outdir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config_path, "Market config (JSON)")->required();
    cmd->add_option("--set", c.overrides,
                    "Override a config value, dotted.path=value (repeatable)");
    cmd->add_option("-o,--output-dir", c.outdir, "Directory for output files");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
    return s;
}

std::string regime_tag(const EquilibriumSolution& sol) {
    switch (sol.regime) {
        case EquilibriumSolution::Regime::Single: return "Single";
        case EquilibriumSolution::Regime::MultiRegular: return "MultiRegular";
        case EquilibriumSolution::Regime::MultiSingular: return "MultiSingular";
    }
    return "Single";
}

std::string classification_tag(RegimeClassification::Kind kind) {
    switch (kind) {
        case RegimeClassification::Kind::Regular: return "Regular";
        case RegimeClassification::Kind::SingularRank1: return "SingularRank1";
        case RegimeClassification::Kind::Unsolvable: return "Unsolvable";
    }
    return "Unsolvable";
}

// Maps a time in years onto a step index; must hit the grid exactly.
int time_to_step(double t, const LatticeParams& lp) {
    const double dt = lp.dt();
    const long n = std::lround(t / dt);
    if (n < 0 || n >= lp.n_steps ||
        std::abs(n * dt - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw InvalidParams("time " + format_double(t) + " is not a strategy grid point");
    return static_cast<int>(n);
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failure on " + path);
}

struct ManifestInfo {
    std::string command;
    std::string raw_doc;
    std::string effective_doc;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> outputs;
};

void write_manifest(const Common& c, const ManifestInfo& info, double wall_seconds) {
    json m;
    m["command"] = info.command;
    m["config_path"] = c.config_path;
    m["config_digest"] = hex64(config_digest(info.raw_doc));
    m["effective_digest"] = hex64(config_digest(info.effective_doc));
    m["overrides"] = c.overrides;
    if (info.seed) m["seed"] = *info.seed;
    m["outputs"] = info.outputs;
    m["wall_clock_seconds"] = wall_seconds;
    m["version"] = TREEMFE_VERSION;
    write_json(c.outdir + "/manifest.json", m);
}

// Runs a command body, then writes the manifest with the elapsed wall clock.
template <class Fn>
void with_manifest(const Common& c, const std::string& command, Fn&& body) {
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    std::filesystem::create_directories(c.outdir, ec);
    if (ec) throw IoError("cannot create output directory " + c.outdir + ": " + ec.message());
    ManifestInfo info;
    info.command = command;
    info.raw_doc = read_file(c.config_path);
    info.effective_doc =
        c.overrides.empty() ? info.raw_doc : apply_overrides(info.raw_doc, c.overrides);
    body(info);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(c, info, wall);
}

void cmd_solve(const Common& c) {
    with_manifest(c, "solve", [&](ManifestInfo& info) {
        const MarketSpec spec = parse_config(info.effective_doc);
        const EquilibriumSolution sol = solve_mc_mfe(spec);
        const std::string csv_path = c.outdir + "/transition_probs.csv";
        CsvWriter csv(csv_path);
        csv.row({"n", "s_index", "s_value", "y_index", "y_value", "p_up"});
        for (int n = 0; n < sol.n_steps(); ++n)
            for (int s = 0; s < sol.p_up[n].rows(); ++s)
                for (int y = 0; y < sol.p_up[n].cols(); ++y)
                    csv.row({std::to_string(n), std::to_string(s),
                             format_double(sol.stock_value(n, s)), std::to_string(y),
                             format_double(spec.y_chain.state(n, y)),
                             format_double(sol.p_up[n](s, y))});
        csv.close();
        json diag;
        diag["regime"] = regime_tag(sol);
        diag["classification"] = classification_tag(sol.classification.kind);
        diag["kernel_dim"] = sol.classification.kernel_dim;
        diag["min_p"] = sol.min_p;
        diag["max_p"] = sol.max_p;
        diag["max_clearing_residual"] = sol.max_clearing_residual;
        const std::string diag_path = c.outdir + "/diagnostics.json";
        write_json(diag_path, diag);
        info.outputs = {csv_path, diag_path};
    });
}

void cmd_distribution(const Common& c) {
    with_manifest(c, "distribution", [&](ManifestInfo& info) {
        const MarketSpec spec = parse_config(info.effective_doc);
        const EquilibriumSolution sol = solve_mc_mfe(spec);
        const std::vector<double> dist = terminal_distribution(sol);
        const std::string path = c.outdir + "/terminal_distribution.csv";
        CsvWriter csv(path);
        csv.row({"s_value", "probability"});
        for (int k = 0; k <= sol.n_steps(); ++k)
            csv.row({format_double(sol.lattice.value(sol.n_steps(), k)),
                     format_double(dist[k])});
        csv.close();
        info.outputs = {path};
    });
}

void cmd_price_curve(const Common& c) {
    with_manifest(c, "price-curve", [&](ManifestInfo& info) {
        const MarketSpec spec = parse_config(info.effective_doc);
        const EquilibriumSolution sol = solve_mc_mfe(spec);
        const std::vector<double> curve = expected_price_curve(sol);
        const std::string path = c.outdir + "/price_curve.csv";
        CsvWriter csv(path);
        csv.row({"t", "expected_price"});
        for (int n = 0; n <= sol.n_steps(); ++n)
            csv.row({format_double(n * spec.lattice.dt()), format_double(curve[n])});
        csv.close();
        info.outputs = {path};
    });
}

void cmd_rms(const Common& c, const std::vector<double>& times,
             const std::vector<int>& pops) {
    with_manifest(c, "rms", [&](ManifestInfo& info) {
        const MarketSpec spec = parse_config(info.effective_doc);
        const EquilibriumSolution sol = solve_mc_mfe(spec);
        std::vector<int> selected = pops;
        if (selected.empty())
            for (int p = 0; p < spec.n_pops(); ++p) selected.push_back(p);
        const std::string path = c.outdir + "/rms.csv";
        CsvWriter csv(path);
        csv.row({"t", "population", "rms"});
        for (const double t : times) {
            const int n = time_to_step(t, spec.lattice);
            for (const int p : selected) {
                if (p < 0 || p >= spec.n_pops())
                    throw IndexOutOfRange("population " + std::to_string(p));
                const std::string& label = spec.populations[p].label;
                csv.row({format_double(t), label.empty() ? std::to_string(p) : label,
                         format_double(strategy_rms(sol, p, n))});
            }
        }
        csv.close();
        info.outputs = {path};
    });
}

void cmd_sweep(const Common& c, const std::vector<std::string>& axis,
               const std::vector<double>& values, const std::vector<double>& rms_times) {
    with_manifest(c, "sweep", [&](ManifestInfo& info) {
        SweepOutputs outputs;
        outputs.rms_times = rms_times;
        const SweepResult result = sweep(info.effective_doc, axis, values, outputs);
        const std::string path = c.outdir + "/sweep.csv";
        CsvWriter csv(path);
        std::vector<std::string> header = {"value", "regime", "error", "terminal_mean"};
        header.insert(header.end(), result.rms_columns.begin(), result.rms_columns.end());
        csv.row(header);
        for (const SweepRow& row : result.rows) {
            std::vector<std::string> cells = {format_double(row.value), row.regime,
                                              row.error, format_double(row.terminal_mean)};
            for (std::size_t i = 0; i < result.rms_columns.size(); ++i)
                cells.push_back(i < row.rms.size() ? format_double(row.rms[i]) : "nan");
            csv.row(cells);
        }
        csv.close();
        info.outputs = {path};
    });
}

void cmd_clearing(const Common& c, const std::vector<int>& sizes, int reps,
                  std::uint64_t seed, int time_index, const std::vector<int>& node) {
    with_manifest(c, "clearing", [&](ManifestInfo& info) {
        info.seed = seed;
        const MarketSpec spec = parse_config(info.effective_doc);
        const EquilibriumSolution sol = solve_mc_mfe(spec);
        ClearingOptions opts;
        opts.time_index = time_index;
        if (!node.empty()) {
            opts.fixed_node = true;
            opts.node_s = node[0];
            opts.node_y = node[1];
        }
        const ClearingExperiment exp = clearing_error(spec, sol, sizes, reps, seed, opts);
        const std::string path = c.outdir + "/clearing.csv";
        CsvWriter csv(path);
        csv.row({"size", "mse", "mean_excess", "slope"});
        for (std::size_t i = 0; i < exp.sizes.size(); ++i)
            csv.row({std::to_string(exp.sizes[i]), format_double(exp.mse[i]),
                     format_double(exp.mean_excess[i]), format_double(exp.slope)});
        csv.close();
        info.outputs = {path};
    });
}

void cmd_resolvent(const Common& c, double eps, int order) {
    with_manifest(c, "resolvent", [&](ManifestInfo& info) {
        const MarketSpec spec = parse_config(info.effective_doc);
        const Mat theta = interaction_matrix(spec);
        const std::string path = c.outdir + "/resolvent.csv";
        CsvWriter csv(path);
        csv.row({"order", "error"});
        for (int k = 0; k <= order; ++k)
            csv.row({std::to_string(k), format_double(laurent_eval_error(theta, eps, k))});
        csv.close();
        info.outputs = {path};
    });
}

void cmd_regime(const Common& c) {
    const std::string raw = read_file(c.config_path);
    const MarketSpec spec = parse_config(apply_overrides(raw, c.overrides));
    const RegimeClassification rc = classify_regime(interaction_matrix(spec));
    json out;
    out["classification"] = classification_tag(rc.kind);
    out["kernel_dim"] = rc.kernel_dim;
    if (rc.kind == RegimeClassification::Kind::SingularRank1) {
        out["simple_pole"] = rc.simple_pole;
        out["v"] = rc.v;
        out["kappa"] = rc.kappa;
    }
    std::cout << out.dump(2) << '\n';
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Market-clearing mean-field equilibria on a binomial tree"};
    app.require_subcommand(1);

    Common c_solve, c_dist, c_curve, c_rms, c_sweep, c_clear, c_resolvent, c_regime;

    CLI::App* solve = app.add_subcommand("solve", "Equilibrium transition probabilities");
    add_common(solve, c_solve);

    CLI::App* dist = app.add_subcommand("distribution", "Terminal price distribution");
    add_common(dist, c_dist);

    CLI::App* curve = app.add_subcommand("price-curve", "Expected price curve");
    add_common(curve, c_curve);

    CLI::App* rms = app.add_subcommand("rms", "Strategy root mean square");
    add_common(rms, c_rms);
    std::vector<double> rms_times = {0.5, 1.0, 1.5};
    std::vector<int> rms_pops;
    rms->add_option("--times", rms_times, "Times in years (default 0.5,1.0,1.5)")
        ->delimiter(',');
    rms->add_option("--populations", rms_pops, "Population indices (default all)")
        ->delimiter(',');

    CLI::App* sw = app.add_subcommand("sweep", "Solve across a parameter axis");
    add_common(sw, c_sweep);
    std::vector<std::string> axis;
    std::vector<double> values, sweep_rms_times;
    sw->add_option("--axis", axis, "Dotted config path(s) for the swept value")
        ->required()
        ->delimiter(',');
    sw->add_option("--values", values, "Axis values, strictly increasing")
        ->required()
        ->delimiter(',');
    sw->add_option("--rms-times", sweep_rms_times, "Report strategy RMS at these times")
        ->delimiter(',');

    CLI::App* clear = app.add_subcommand("clearing", "Finite-population clearing error");
    add_common(clear, c_clear);
    std::vector<int> sizes, node;
    int reps = 200, time_index = -1;
    std::uint64_t seed = 12345;
    clear->add_option("--sizes", sizes, "Sample sizes, strictly increasing")
        ->required()
        ->delimiter(',');
    clear->add_option("--reps", reps, "Replications per size (default 200)");
    clear->add_option("--seed", seed, "Random seed (default 12345)");
    clear->add_option("--time", time_index, "Step index (default N/2)");
    clear->add_option("--node", node, "Fix the (s_index, y_index) node")
        ->delimiter(',')
        ->expected(2);

    CLI::App* resolvent = app.add_subcommand("resolvent", "Laurent truncation error");
    add_common(resolvent, c_resolvent);
    double eps = 1e-3;
    int order = 3;
    resolvent->add_option("--eps", eps, "Perturbation epsilon (default 1e-3)");
    resolvent->add_option("--order", order, "Max truncation order (default 3)");

    CLI::App* regime = app.add_subcommand("regime", "Classify the interaction system");
    add_common(regime, c_regime);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (solve->parsed()) cmd_solve(c_solve);
    if (dist->parsed()) cmd_distribution(c_dist);
    if (curve->parsed()) cmd_price_curve(c_curve);
    if (rms->parsed()) cmd_rms(c_rms, rms_times, rms_pops);
    if (sw->parsed()) cmd_sweep(c_sweep, axis, values, sweep_rms_times);
    if (clear->parsed()) cmd_clearing(c_clear, sizes, reps, seed, time_index, node);
    if (resolvent->parsed()) cmd_resolvent(c_resolvent, eps, order);
    if (regime->parsed()) cmd_regime(c_regime);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvariantError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidParams& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ExperimentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidPath& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IndexOutOfRange& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const PathModeCapExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        // Regime, degeneracy, singularity, and probability failures.
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
