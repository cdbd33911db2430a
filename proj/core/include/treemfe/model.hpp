#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treemfe/grid.hpp"
#include "treemfe/lattice.hpp"
#include "treemfe/linalg.hpp"

namespace treemfe {

// One atom of the discrete (gamma, theta-row) distribution of a population.
struct AgentType {
    double weight = 0.0;
    double gamma = 0.0;              // absolute risk aversion, > 0
    std::vector<double> theta_row;   // relative-concern coefficients, length m
};

// Terminal liability. Parametric: F = C - f_a * S_N * Y_N * Z_N (Markovian).
// Tabulated: values over (terminal stock path, y-state, z-state); requires
// path mode. Path index bits encode the moves, bit i = 1 when the step from
// time i to i+1 was up.
struct LiabilitySpec {
    enum class Kind { Parametric, Tabulated };
    Kind kind = Kind::Parametric;
    double c = 0.0;
    double f_a = 0.0;
    std::vector<std::vector<std::vector<double>>> table;  // [path][y][z]
};

// Per-capita net stock supply. Parametric: L_n = l_a * (1 + l_b * Y_n) * S_n.
// Tabulated: per time n a grid over (s-node or s-path, y-state).
struct OrderFlowSpec {
    enum class Kind { Parametric, Tabulated };
    Kind kind = Kind::Parametric;
    double l_a = 0.0;
    double l_b = 0.0;
    std::vector<Grid2> table;  // [n](s_idx, y_idx), n = 0..N-1
};

struct PopulationSpec {
    std::string label;
    double pop_weight = 1.0;             // w_p
    std::vector<AgentType> agent_types;  // weights sum to 1
    Chain z_chain;                       // idiosyncratic factor chain
    LiabilitySpec liability;
    double xi_mean = 0.0;  // E[initial wealth]; only shifts mean-field paths
};

struct MarketSpec {
    LatticeParams lattice;
    Chain y_chain;
    std::vector<PopulationSpec> populations;
    OrderFlowSpec order_flow;
    bool path_mode = false;
    int path_cap = 16;

    int n_pops() const { return static_cast<int>(populations.size()); }
    // Throws InvariantError / InvalidParams / PathModeCapExceeded.
    void validate() const;
};

struct RegimeClassification {
    enum class Kind { Regular, SingularRank1, Unsolvable };
    Kind kind = Kind::Regular;
    int kernel_dim = 0;
    Mat inv;    // Regular: (I - Theta)^{-1}
    Vec v;      // SingularRank1: unit left kernel vector of (I - Theta)
    Vec kappa;  // SingularRank1: unit right kernel vector
    Mat g;      // SingularRank1: Moore-Penrose pseudo-inverse of (I - Theta)
    Mat p;      // SingularRank1: I - kappa v^T / (v,kappa); zero if (v,kappa) ~ 0
    bool simple_pole = false;  // (v,kappa) != 0
};

// Theta_{p,k} = weighted average of theta_row over population p's types.
Mat interaction_matrix(const MarketSpec& spec);

// Regular when (I - Theta) has full rank relative to tol * sigma_max,
// SingularRank1 when the kernel dimension is exactly 1, Unsolvable otherwise.
RegimeClassification classify_regime(const Mat& theta, double tol = 1e-10);

// Parses and fully validates a JSON market document (schema in README).
MarketSpec parse_config(const std::string& document);

// Applies "dotted.path=value" style overrides to a JSON document before
// parsing; path segments are object keys or [index] subscripts focused on
// arrays (e.g. populations[0].theta_row[1]). Returns the rewritten document.
std::string apply_overrides(const std::string& document,
                            const std::vector<std::string>& overrides);

// 64-bit FNV-1a over the raw document bytes; stable across platforms.
std::uint64_t config_digest(const std::string& document);

// Evaluates the order flow at (n, s-node or path, y): parametric form uses
// the current stock value and y value.
double order_flow_value(const MarketSpec& spec, const StockLattice& lattice,
                        int n, int s_idx, int y_idx, bool path_mode);

// Evaluates the terminal liability of population pop at a terminal state.
// In Markovian mode s_idx is the terminal node index; in path mode the path
// index. Tabulated liabilities require path mode.
double liability_value(const MarketSpec& spec, const StockLattice& lattice,
                       int pop, int s_idx, int y_idx, int z_idx, bool path_mode);

}  // namespace treemfe
