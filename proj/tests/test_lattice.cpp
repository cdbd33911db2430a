#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "treemfe/errors.hpp"
#include "treemfe/lattice.hpp"

using namespace treemfe;

namespace {

LatticeParams table_lattice(int n_steps = 48) {
    LatticeParams lp;
    lp.n_steps = n_steps;
    lp.horizon = 2.0;
    lp.rate = 0.025;
    const double dt = lp.horizon / n_steps;
    lp.u_tilde = std::exp(0.15 * std::sqrt(dt));
    lp.d_tilde = std::exp(-0.15 * std::sqrt(dt));
    lp.s0 = 1.0;
    return lp;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("reference lattice constants") {
    const LatticeParams lp = table_lattice();
    CHECK(lp.dt() == doctest::Approx(1.0 / 24).epsilon(1e-15));
    CHECK(lp.beta() == doctest::Approx(1.0010422093898181).epsilon(1e-15));
    CHECK(lp.u_tilde == doctest::Approx(1.0310921927909442).epsilon(1e-15));
    CHECK(lp.d_tilde == doctest::Approx(0.96984538045353208).epsilon(1e-15));
    CHECK(lp.up() == doctest::Approx(0.030049983401126079).epsilon(1e-13));
    CHECK(lp.down() == doctest::Approx(-0.031196828936286058).epsilon(1e-13));
    CHECK(risk_neutral_up_prob(lp) == doctest::Approx(0.50936249162521263).epsilon(1e-13));
    // Loose figures quoted alongside the reference parameters.
    CHECK(std::abs(lp.u_tilde - 1.0310915) < 1e-5);
    CHECK(std::abs(risk_neutral_up_prob(lp) - 0.509357) < 1e-5);
    CHECK(lp.up() > 0.0);
    CHECK(lp.down() < 0.0);
}

TEST_CASE("beta_pow and gamma_scale use exact integer exponents") {
    const LatticeParams lp = table_lattice(8);
    double acc = 1.0;
    for (int k = 0; k <= 8; ++k) {
        CHECK(lp.beta_pow(k) == doctest::Approx(acc).epsilon(1e-15));
        acc *= lp.beta();
    }
    for (int n = 1; n <= 8; ++n)
        CHECK(lp.gamma_scale(n) == doctest::Approx(lp.beta_pow(8 - n)).epsilon(1e-15));
}

TEST_CASE("lattice validation") {
    LatticeParams lp = table_lattice();
    CHECK_NOTHROW(lp.validate());
    SUBCASE("nonpositive steps") {
        lp.n_steps = 0;
        CHECK_THROWS_AS(lp.validate(), InvalidParams);
    }
    SUBCASE("nonpositive horizon") {
        lp.horizon = -2.0;
        CHECK_THROWS_AS(lp.validate(), InvalidParams);
    }
    SUBCASE("degenerate branch returns") {
        lp.d_tilde = lp.beta() * 1.0001;  // d >= 0 breaks no-arbitrage ordering
        CHECK_THROWS_AS(lp.validate(), InvalidParams);
    }
    SUBCASE("nonpositive s0") {
        lp.s0 = 0.0;
        CHECK_THROWS_AS(lp.validate(), InvalidParams);
    }
}

TEST_CASE("stock lattice recombines with k up-moves at index k") {
    const LatticeParams lp = table_lattice(6);
    const StockLattice lat = build_stock_lattice(lp);
    CHECK(lat.n_steps() == 6);
    CHECK(lat.value(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lat.value(1, 1) == doctest::Approx(lp.u_tilde).epsilon(1e-15));
    CHECK(lat.value(1, 0) == doctest::Approx(lp.d_tilde).epsilon(1e-15));
    for (int n = 0; n <= 6; ++n) {
        REQUIRE(static_cast<int>(lat.node_values[n].size()) == n + 1);
        for (int k = 0; k <= n; ++k) {
            CHECK(lat.value(n, k) ==
                  doctest::Approx(std::pow(lp.u_tilde, k) * std::pow(lp.d_tilde, n - k))
                      .epsilon(1e-14));
            if (k > 0) CHECK(lat.value(n, k) > lat.value(n, k - 1));
        }
    }
    // Up-then-down equals down-then-up: both land on index 1 at n=2.
    CHECK(lat.value(2, 1) == doctest::Approx(lp.u_tilde * lp.d_tilde).epsilon(1e-15));
}

TEST_CASE("additive binomial chain") {
    const double dt = 1.0 / 3;
    const Chain c = Chain::additive_binomial(1.0, 0.12, 0.5, dt, 4);
    c.validate();
    const double h = 0.12 * std::sqrt(dt);
    for (int n = 0; n <= 4; ++n) {
        REQUIRE(c.n_states(n) == n + 1);
        for (int j = 0; j <= n; ++j)
            CHECK(c.state(n, j) == doctest::Approx(1.0 + (2 * j - n) * h).epsilon(1e-14));
    }
    CHECK(c.prob(1, 0, 1) == doctest::Approx(0.5));
    CHECK(c.prob(1, 0, 0) == doctest::Approx(0.5));
    const auto marg = c.forward_marginals();
    for (int n = 0; n <= 4; ++n)
        for (int j = 0; j <= n; ++j)
            CHECK(marg[n][j] == doctest::Approx(oracles::binom_pmf(n, j, 0.5)).epsilon(1e-13));
}

TEST_CASE("multiplicative binomial chain") {
    const double dt = 0.25;
    const Chain c = Chain::multiplicative_binomial(2.0, 0.3, 0.6, dt, 3);
    c.validate();
    const double g = std::exp(0.3 * std::sqrt(dt));
    for (int n = 0; n <= 3; ++n)
        for (int j = 0; j <= n; ++j)
            CHECK(c.state(n, j) ==
                  doctest::Approx(2.0 * std::pow(g, j) * std::pow(1.0 / g, n - j))
                      .epsilon(1e-14));
    const auto marg = c.forward_marginals();
    for (int j = 0; j <= 3; ++j)
        CHECK(marg[3][j] == doctest::Approx(oracles::binom_pmf(3, j, 0.6)).epsilon(1e-13));
}

TEST_CASE("zero-volatility chain collapses to one state") {
    const Chain c = Chain::multiplicative_binomial(1.5, 0.0, 0.5, 0.1, 5);
    c.validate();
    for (int n = 0; n <= 5; ++n) {
        CHECK(c.n_states(n) == 1);
        CHECK(c.state(n, 0) == doctest::Approx(1.5));
    }
}

TEST_CASE("chain validation rejects broken rows") {
    Chain c = Chain::additive_binomial(0.0, 0.1, 0.5, 0.5, 2);
    SUBCASE("row does not sum to one") {
        c.transitions[0][0][0] = 0.7;
        CHECK_THROWS_AS(c.validate(), InvalidParams);
    }
    SUBCASE("negative entry") {
        c.transitions[1][0][0] = -0.25;
        c.transitions[1][0][1] = 1.25;
        CHECK_THROWS_AS(c.validate(), InvalidParams);
    }
}

TEST_CASE("step_expectation is the transition-row dot product") {
    const Chain c = Chain::additive_binomial(1.0, 0.2, 0.3, 0.5, 2);
    const std::vector<double> vals = {2.0, 5.0};
    CHECK(step_expectation(c, 0, 0, vals) == doctest::Approx(0.7 * 2.0 + 0.3 * 5.0));
}

TEST_CASE("forward joint distribution") {
    const LatticeParams lp = table_lattice(5);
    const StockLattice lat = build_stock_lattice(lp);
    const Chain y = Chain::additive_binomial(1.0, 0.12, 0.5, lp.dt(), 5);

    SUBCASE("p identically one pushes all stock mass to the top node") {
        std::vector<Grid2> p(5);
        for (int n = 0; n < 5; ++n) p[n] = Grid2(n + 1, n + 1, 1.0);
        const auto law = forward_joint_distribution(lat, y, p);
        for (int n = 0; n <= 5; ++n) {
            double top = 0.0, total = 0.0;
            for (int s = 0; s <= n; ++s)
                for (int yj = 0; yj <= n; ++yj) {
                    total += law[n](s, yj);
                    if (s == n) top += law[n](s, yj);
                }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(top == doctest::Approx(1.0).epsilon(1e-13));
        }
    }

    SUBCASE("constant p gives independent binomial marginals") {
        const double q = 0.42;
        std::vector<Grid2> p(5);
        for (int n = 0; n < 5; ++n) p[n] = Grid2(n + 1, n + 1, q);
        const auto law = forward_joint_distribution(lat, y, p);
        for (int n = 0; n <= 5; ++n)
            for (int s = 0; s <= n; ++s)
                for (int yj = 0; yj <= n; ++yj)
                    CHECK(law[n](s, yj) == doctest::Approx(oracles::binom_pmf(n, s, q) *
                                                           oracles::binom_pmf(n, yj, 0.5))
                                               .epsilon(1e-12));
    }
}

}  // TEST_SUITE
