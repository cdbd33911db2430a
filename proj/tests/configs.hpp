#pragma once

// JSON config builders for the tests. Defaults mirror the bundled example
// configs; individual knobs vary per test.

#include <string>

namespace testcfg {

struct SinglePop {
    int n_steps = 6;
    double theta = 0.4;
    double f_a = 1.5;
    double c = 0.0;
    double l_a = 1.0;
    double l_b = 1.0;
    int n_gamma = 2;
    double gamma_min = 0.5;
    double gamma_max = 1.5;
    double xi_mean = 0.0;
    bool path_mode = false;
};

inline std::string single_pop(const SinglePop& o = {}) {
    std::string s = R"({
  "lattice": {"n_steps": )" + std::to_string(o.n_steps) + R"(, "horizon_years": 2.0,
              "rate": 0.025, "sigma": 0.15, "s0": 1.0},
  "y_chain": {"y0": 1.0, "sigma_y": 0.12, "p_y": 0.5},
  "order_flow": {"l_a": )" + std::to_string(o.l_a) + R"(, "l_b": )" + std::to_string(o.l_b) + R"(},)";
    if (o.path_mode) s += "\n  \"path_mode\": true,";
    s += R"(
  "populations": [
    {"label": "pop1", "weight": 1.0,
     "gamma_min": )" + std::to_string(o.gamma_min) + R"(, "gamma_max": )" +
         std::to_string(o.gamma_max) + R"(, "n_gamma": )" + std::to_string(o.n_gamma) + R"(,
     "theta_row": [)" + std::to_string(o.theta) + R"(],
     "xi_mean": )" + std::to_string(o.xi_mean) + R"(,
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": )" + std::to_string(o.c) + R"(, "f_a": )" + std::to_string(o.f_a) + R"(}}
  ]
})";
    return s;
}

struct TwoPop {
    int n_steps = 4;
    double diag = 0.3;   // own-population concern, both populations
    double off = 0.4;    // cross-population concern
    double f_a1 = 1.2;
    double f_a2 = 2.4;
    double l_a = 1.5;
    double l_b = 1.5;
    int n_gamma = 1;
    bool path_mode = false;
};

inline std::string two_pop(const TwoPop& o = {}) {
    std::string s = R"({
  "lattice": {"n_steps": )" + std::to_string(o.n_steps) + R"(, "horizon_years": 2.0,
              "rate": 0.025, "sigma": 0.15, "s0": 1.0},
  "y_chain": {"y0": 1.0, "sigma_y": 0.12, "p_y": 0.5},
  "order_flow": {"l_a": )" + std::to_string(o.l_a) + R"(, "l_b": )" + std::to_string(o.l_b) + R"(},)";
    if (o.path_mode) s += "\n  \"path_mode\": true,";
    s += R"(
  "populations": [
    {"label": "pop1", "weight": 0.3,
     "gamma_min": 0.5, "gamma_max": 1.5, "n_gamma": )" + std::to_string(o.n_gamma) + R"(,
     "theta_row": [)" + std::to_string(o.diag) + ", " + std::to_string(o.off) + R"(],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": )" + std::to_string(o.f_a1) + R"(}},
    {"label": "pop2", "weight": 0.7,
     "gamma_min": 0.2, "gamma_max": 1.2, "n_gamma": )" + std::to_string(o.n_gamma) + R"(,
     "theta_row": [)" + std::to_string(o.off) + ", " + std::to_string(o.diag) + R"(],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": )" + std::to_string(o.f_a2) + R"(}}
  ]
})";
    return s;
}

// Upper-triangular interaction with unit diagonal: rank-1 pencil with a
// higher-order resolvent pole, mirroring the fourth example config.
inline std::string triangular_pop(int n_steps, double diag) {
    return R"({
  "lattice": {"n_steps": )" + std::to_string(n_steps) + R"(, "horizon_years": 2.0,
              "rate": 0.025, "sigma": 0.15, "s0": 1.0},
  "y_chain": {"y0": 1.0, "sigma_y": 0.12, "p_y": 0.5},
  "order_flow": {"l_a": 2.0, "l_b": 2.0},
  "populations": [
    {"label": "pop1", "weight": 0.5,
     "gamma_min": 0.5, "gamma_max": 1.5, "n_gamma": 1,
     "theta_row": [)" + std::to_string(diag) + R"(, 0.1],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": 0.0}},
    {"label": "pop2", "weight": 0.5,
     "gamma_min": 0.5, "gamma_max": 1.5, "n_gamma": 1,
     "theta_row": [0.0, )" + std::to_string(diag) + R"(],
     "z_chain": {"z0": 1.0, "sigma_z": 0.12, "p_z": 0.5},
     "liability": {"C": 0.0, "f_a": 0.0}}
  ]
})";
}

}  // namespace testcfg
