#include "treemfe/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <set>

#include <nlohmann/json.hpp>

namespace treemfe {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional) {
    if (!obj.is_object()) throw SchemaError(path + ": expected an object");
    for (const auto& item : obj.items()) {
        if (!required.count(item.key()) && !optional.count(item.key()))
            throw SchemaError(path + "." + item.key() + ": unknown field");
    }
    for (const auto& key : required) {
        if (!obj.contains(key)) throw SchemaError(path + "." + key + ": missing field");
    }
}

double get_number(const json& obj, const std::string& path, const std::string& key) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw SchemaError(path + "." + key + ": expected a number");
    return v.get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw SchemaError(path + "." + key + ": expected an integer");
    return v.get<int>();
}

LatticeParams parse_lattice(const json& obj) {
    const std::string path = "lattice";
    require_keys(obj, path, {"n_steps", "horizon_years", "rate", "s0"},
                 {"sigma", "u_tilde", "d_tilde"});
    LatticeParams lp;
    lp.n_steps = get_int(obj, path, "n_steps");
    lp.horizon = get_number(obj, path, "horizon_years");
    lp.rate = get_number(obj, path, "rate");
    lp.s0 = get_number(obj, path, "s0");
    const bool has_sigma = obj.contains("sigma");
    const bool has_ud = obj.contains("u_tilde") || obj.contains("d_tilde");
    if (has_sigma == has_ud)
        throw SchemaError("lattice: provide either sigma or (u_tilde, d_tilde)");
    if (lp.n_steps < 1) throw InvariantError("lattice.n_steps: must be >= 1");
    if (!(lp.horizon > 0.0)) throw InvariantError("lattice.horizon_years: must be > 0");
    if (has_sigma) {
        const double sigma = get_number(obj, path, "sigma");
        if (!(sigma > 0.0)) throw InvariantError("lattice.sigma: must be > 0");
        const double h = sigma * std::sqrt(lp.dt());
        lp.u_tilde = std::exp(h);
        lp.d_tilde = std::exp(-h);
    } else {
        if (!obj.contains("u_tilde") || !obj.contains("d_tilde"))
            throw SchemaError("lattice: u_tilde and d_tilde must be given together");
        lp.u_tilde = get_number(obj, path, "u_tilde");
        lp.d_tilde = get_number(obj, path, "d_tilde");
    }
    try {
        lp.validate();
    } catch (const InvalidParams& e) {
        throw InvariantError(e.what());
    }
    return lp;
}

Chain parse_y_chain(const json& obj, const LatticeParams& lp) {
    const std::string path = "y_chain";
    if (obj.contains("states") || obj.contains("transitions")) {
        require_keys(obj, path, {"states", "transitions"}, {});
        Chain c;
        c.states = obj.at("states").get<std::vector<std::vector<double>>>();
        c.transitions =
            obj.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
        if (static_cast<int>(c.states.size()) != lp.n_steps + 1)
            throw InvariantError("y_chain.states: need n_steps+1 slices");
        try {
            c.validate();
        } catch (const InvalidParams& e) {
            throw InvariantError(std::string("y_chain: ") + e.what());
        }
        return c;
    }
    require_keys(obj, path, {"y0", "sigma_y", "p_y"}, {});
    const double sigma = get_number(obj, path, "sigma_y");
    const double p = get_number(obj, path, "p_y");
    if (sigma < 0.0) throw InvariantError("y_chain.sigma_y: must be >= 0");
    if (p < 0.0 || p > 1.0) throw InvariantError("y_chain.p_y: must lie in [0,1]");
    return Chain::additive_binomial(get_number(obj, path, "y0"), sigma, p, lp.dt(),
                                    lp.n_steps);
}

PopulationSpec parse_population(const json& obj, const LatticeParams& lp,
                                const std::string& path) {
    require_keys(obj, path,
                 {"weight", "gamma_min", "gamma_max", "n_gamma", "theta_row", "z_chain",
                  "liability"},
                 {"label", "xi_mean"});
    PopulationSpec pop;
    pop.label = obj.value("label", "");
    pop.pop_weight = get_number(obj, path, "weight");
    pop.xi_mean = obj.contains("xi_mean") ? get_number(obj, path, "xi_mean") : 0.0;
    if (!(pop.pop_weight > 0.0) || pop.pop_weight > 1.0)
        throw InvariantError(path + ".weight: must lie in (0,1]");

    const double gmin = get_number(obj, path, "gamma_min");
    const double gmax = get_number(obj, path, "gamma_max");
    const int n_gamma = get_int(obj, path, "n_gamma");
    if (!(gmin > 0.0)) throw InvariantError(path + ".gamma_min: must be > 0");
    if (gmax < gmin) throw InvariantError(path + ".gamma_max: must be >= gamma_min");
    if (n_gamma < 0) throw InvariantError(path + ".n_gamma: must be >= 0");
    if (n_gamma == 0 && gmax != gmin)
        throw InvariantError(path + ".n_gamma: 0 requires gamma_min == gamma_max");

    const auto& theta = obj.at("theta_row");
    if (!theta.is_array()) throw SchemaError(path + ".theta_row: expected an array");
    std::vector<double> theta_row = theta.get<std::vector<double>>();

    const int n_types = n_gamma + 1;
    for (int k = 0; k < n_types; ++k) {
        AgentType t;
        t.weight = 1.0 / n_types;
        t.gamma = n_gamma == 0 ? gmin : gmin + (gmax - gmin) * k / n_gamma;
        t.theta_row = theta_row;
        pop.agent_types.push_back(std::move(t));
    }

    const auto& zc = obj.at("z_chain");
    const std::string zpath = path + ".z_chain";
    require_keys(zc, zpath, {"z0", "sigma_z", "p_z"}, {});
    const double sigma_z = get_number(zc, zpath, "sigma_z");
    const double p_z = get_number(zc, zpath, "p_z");
    if (sigma_z < 0.0) throw InvariantError(zpath + ".sigma_z: must be >= 0");
    if (p_z < 0.0 || p_z > 1.0) throw InvariantError(zpath + ".p_z: must lie in [0,1]");
    pop.z_chain = Chain::multiplicative_binomial(get_number(zc, zpath, "z0"), sigma_z,
                                                 p_z, lp.dt(), lp.n_steps);

    const auto& liab = obj.at("liability");
    const std::string lpath = path + ".liability";
    if (liab.contains("table")) {
        require_keys(liab, lpath, {"table"}, {});
        pop.liability.kind = LiabilitySpec::Kind::Tabulated;
        pop.liability.table =
            liab.at("table").get<std::vector<std::vector<std::vector<double>>>>();
    } else {
        require_keys(liab, lpath, {"C", "f_a"}, {});
        pop.liability.kind = LiabilitySpec::Kind::Parametric;
        pop.liability.c = get_number(liab, lpath, "C");
        pop.liability.f_a = get_number(liab, lpath, "f_a");
    }
    return pop;
}

OrderFlowSpec parse_order_flow(const json& obj, const MarketSpec& spec) {
    const std::string path = "order_flow";
    OrderFlowSpec flow;
    if (obj.contains("table")) {
        require_keys(obj, path, {"table"}, {});
        flow.kind = OrderFlowSpec::Kind::Tabulated;
        const auto raw = obj.at("table").get<std::vector<std::vector<std::vector<double>>>>();
        if (static_cast<int>(raw.size()) != spec.lattice.n_steps)
            throw InvariantError("order_flow.table: need one slice per step");
        for (int n = 0; n < spec.lattice.n_steps; ++n) {
            const int ns = spec.path_mode ? (1 << n) : n + 1;
            const int ny = spec.y_chain.n_states(n);
            if (static_cast<int>(raw[n].size()) != ns)
                throw InvariantError("order_flow.table: slice " + std::to_string(n) +
                                     " row count mismatch");
            Grid2 g(ns, ny);
            for (int s = 0; s < ns; ++s) {
                if (static_cast<int>(raw[n][s].size()) != ny)
                    throw InvariantError("order_flow.table: slice " + std::to_string(n) +
                                         " column count mismatch");
                for (int y = 0; y < ny; ++y) g(s, y) = raw[n][s][y];
            }
            flow.table.push_back(std::move(g));
        }
    } else {
        require_keys(obj, path, {"l_a", "l_b"}, {});
        flow.kind = OrderFlowSpec::Kind::Parametric;
        flow.l_a = get_number(obj, path, "l_a");
        flow.l_b = get_number(obj, path, "l_b");
    }
    return flow;
}

}  // namespace

void MarketSpec::validate() const {
    lattice.validate();
    y_chain.validate();
    if (static_cast<int>(y_chain.states.size()) != lattice.n_steps + 1)
        throw InvariantError("y_chain: slice count must equal n_steps+1");
    if (populations.empty()) throw InvariantError("populations: at least one required");
    if (path_mode && lattice.n_steps > path_cap)
        throw PathModeCapExceeded("path_mode: n_steps " + std::to_string(lattice.n_steps) +
                                  " exceeds cap " + std::to_string(path_cap));
    const int m = n_pops();
    double wsum = 0.0;
    for (int p = 0; p < m; ++p) {
        const auto& pop = populations[p];
        const std::string path = "populations[" + std::to_string(p) + "]";
        wsum += pop.pop_weight;
        if (pop.agent_types.empty())
            throw InvariantError(path + ".agent_types: empty");
        double tsum = 0.0;
        for (const auto& t : pop.agent_types) {
            if (!(t.gamma > 0.0))
                throw InvariantError(path + ": gamma must be > 0");
            if (t.weight < 0.0) throw InvariantError(path + ": type weight must be >= 0");
            if (static_cast<int>(t.theta_row.size()) != m)
                throw InvariantError(path + ".theta_row: length must equal population count");
            tsum += t.weight;
        }
        if (std::abs(tsum - 1.0) > 1e-12)
            throw InvariantError(path + ": type weights must sum to 1");
        pop.z_chain.validate();
        if (static_cast<int>(pop.z_chain.states.size()) != lattice.n_steps + 1)
            throw InvariantError(path + ".z_chain: slice count must equal n_steps+1");
        if (pop.liability.kind == LiabilitySpec::Kind::Tabulated) {
            if (!path_mode)
                throw InvariantError(path + ".liability.table: requires path_mode");
            const std::size_t n_paths = std::size_t{1} << lattice.n_steps;
            if (pop.liability.table.size() != n_paths)
                throw InvariantError(path + ".liability.table: need one row per terminal path");
            const std::size_t ny = y_chain.states.back().size();
            const std::size_t nz = pop.z_chain.states.back().size();
            for (const auto& ys : pop.liability.table) {
                if (ys.size() != ny)
                    throw InvariantError(path + ".liability.table: y dimension mismatch");
                for (const auto& zs : ys)
                    if (zs.size() != nz)
                        throw InvariantError(path + ".liability.table: z dimension mismatch");
            }
        }
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw InvariantError("populations: weights must sum to 1");
    if (order_flow.kind == OrderFlowSpec::Kind::Tabulated) {
        if (static_cast<int>(order_flow.table.size()) != lattice.n_steps)
            throw InvariantError("order_flow.table: need one slice per step");
        for (int n = 0; n < lattice.n_steps; ++n) {
            const int ns = path_mode ? 1 << n : n + 1;
            if (order_flow.table[n].rows() != ns ||
                order_flow.table[n].cols() != static_cast<int>(y_chain.states[n].size()))
                throw InvariantError("order_flow.table: slice " + std::to_string(n) +
                                     " has wrong shape");
        }
    }
}

Mat interaction_matrix(const MarketSpec& spec) {
    const int m = spec.n_pops();
    Mat theta(m);
    for (int p = 0; p < m; ++p)
        for (const auto& t : spec.populations[p].agent_types)
            for (int k = 0; k < m; ++k) theta(p, k) += t.weight * t.theta_row[k];
    return theta;
}

RegimeClassification classify_regime(const Mat& theta, double tol) {
    const int m = theta.size();
    const Mat a = Mat::identity(m) - theta;
    const SingularStructure st = singular_structure(a, tol);
    RegimeClassification rc;
    rc.kernel_dim = st.kernel_dim;
    if (st.kernel_dim == 0) {
        rc.kind = RegimeClassification::Kind::Regular;
        rc.inv = inverse(a);
        return rc;
    }
    if (st.kernel_dim == 1) {
        rc.kind = RegimeClassification::Kind::SingularRank1;
        rc.v = st.left;
        rc.kappa = st.right;
        rc.g = pseudo_inverse(a, tol);
        const double vk = dot(rc.v, rc.kappa);
        rc.simple_pole = std::abs(vk) > tol;
        rc.p = rc.simple_pole ? Mat::identity(m) - (1.0 / vk) * outer(rc.kappa, rc.v)
                              : Mat(m);
        return rc;
    }
    rc.kind = RegimeClassification::Kind::Unsolvable;
    return rc;
}

MarketSpec parse_config(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: invalid JSON: ") + e.what());
    }
    require_keys(doc, "config", {"lattice", "y_chain", "populations", "order_flow"},
                 {"path_mode", "path_cap"});

    MarketSpec spec;
    spec.lattice = parse_lattice(doc.at("lattice"));
    spec.y_chain = parse_y_chain(doc.at("y_chain"), spec.lattice);
    if (doc.contains("path_mode")) {
        if (!doc.at("path_mode").is_boolean())
            throw SchemaError("config.path_mode: expected a boolean");
        spec.path_mode = doc.at("path_mode").get<bool>();
    }
    if (doc.contains("path_cap")) spec.path_cap = get_int(doc, "config", "path_cap");

    const auto& pops = doc.at("populations");
    if (!pops.is_array() || pops.empty())
        throw SchemaError("config.populations: expected a non-empty array");
    for (std::size_t i = 0; i < pops.size(); ++i)
        spec.populations.push_back(parse_population(
            pops[i], spec.lattice, "populations[" + std::to_string(i) + "]"));

    spec.order_flow = parse_order_flow(doc.at("order_flow"), spec);
    spec.validate();
    return spec;
}

namespace {

// Splits "populations[0].theta_row[1]" into object keys and array indices,
// then returns a reference to the targeted JSON node.
json* navigate(json& doc, const std::string& path) {
    json* cur = &doc;
    std::size_t i = 0;
    while (i < path.size()) {
        std::size_t j = i;
        while (j < path.size() && path[j] != '.' && path[j] != '[') ++j;
        if (j > i) {
            const std::string key = path.substr(i, j - i);
            if (!cur->is_object() || !cur->contains(key))
                throw SchemaError("override path: unknown field '" + key + "'");
            cur = &(*cur)[key];
        }
        i = j;
        while (i < path.size() && path[i] == '[') {
            const std::size_t close = path.find(']', i);
            if (close == std::string::npos)
                throw SchemaError("override path: unterminated subscript");
            const std::string idx_str = path.substr(i + 1, close - i - 1);
            std::size_t idx = 0;
            try {
                idx = std::stoul(idx_str);
            } catch (...) {
                throw SchemaError("override path: bad subscript '" + idx_str + "'");
            }
            if (!cur->is_array() || idx >= cur->size())
                throw SchemaError("override path: subscript out of range");
            cur = &(*cur)[idx];
            i = close + 1;
        }
        if (i < path.size()) {
            if (path[i] != '.')
                throw SchemaError("override path: expected '.' in '" + path + "'");
            ++i;
        }
    }
    return cur;
}

}  // namespace

std::string apply_overrides(const std::string& document,
                            const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: invalid JSON: ") + e.what());
    }
    for (const auto& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw SchemaError("override '" + ov + "': expected path=value");
        const std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        json* node = navigate(doc, path);
        json parsed = json::parse(value, nullptr, false);
        if (parsed.is_discarded()) parsed = value;  // fall back to string
        *node = parsed;
    }
    return doc.dump(2);
}

std::uint64_t config_digest(const std::string& document) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : document) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

double path_stock_value(const LatticeParams& lp, int n, int path) {
    const int ups = std::popcount(static_cast<unsigned>(path));
    return lp.s0 * std::pow(lp.u_tilde, ups) * std::pow(lp.d_tilde, n - ups);
}

}  // namespace

double order_flow_value(const MarketSpec& spec, const StockLattice& lattice, int n,
                        int s_idx, int y_idx, bool path_mode) {
    if (spec.order_flow.kind == OrderFlowSpec::Kind::Tabulated)
        return spec.order_flow.table[n](s_idx, y_idx);
    const double s = path_mode ? path_stock_value(spec.lattice, n, s_idx)
                               : lattice.value(n, s_idx);
    const double y = spec.y_chain.state(n, y_idx);
    return spec.order_flow.l_a * (1.0 + spec.order_flow.l_b * y) * s;
}

double liability_value(const MarketSpec& spec, const StockLattice& lattice, int pop,
                       int s_idx, int y_idx, int z_idx, bool path_mode) {
    const auto& liab = spec.populations[pop].liability;
    const int n = spec.lattice.n_steps;
    if (liab.kind == LiabilitySpec::Kind::Tabulated)
        return liab.table[s_idx][y_idx][z_idx];
    const double s = path_mode ? path_stock_value(spec.lattice, n, s_idx)
                               : lattice.value(n, s_idx);
    const double y = spec.y_chain.state(n, y_idx);
    const double z = spec.populations[pop].z_chain.state(n, z_idx);
    return liab.c - liab.f_a * s * y * z;
}

}  // namespace treemfe
