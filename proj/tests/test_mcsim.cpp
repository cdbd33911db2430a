#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "configs.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "treemfe/engine.hpp"
#include "treemfe/errors.hpp"
#include "treemfe/mcsim.hpp"
#include "treemfe/model.hpp"

using namespace treemfe;

TEST_SUITE("mcsim") {

TEST_CASE("counter hash is a pure function of its key") {
    const std::uint64_t a = counter_hash(1, 2, 3, 4);
    CHECK(a == counter_hash(1, 2, 3, 4));
    CHECK(a != counter_hash(2, 2, 3, 4));
    CHECK(a != counter_hash(1, 3, 3, 4));
    CHECK(a != counter_hash(1, 2, 4, 4));
    CHECK(a != counter_hash(1, 2, 3, 5));

    double acc = 0.0;
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 20000; ++i) {
        const double x = counter_uniform(7, 0, 1, i);
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        acc += x;
        seen.insert(counter_hash(7, 0, 1, i));
    }
    CHECK(static_cast<int>(seen.size()) == 20000);  // no collisions on this key set
    CHECK(std::abs(acc / 20000 - 0.5) < 0.011);     // ~5 sigma
}

TEST_CASE("agent sampling composition and determinism") {
    testcfg::TwoPop o;
    o.n_steps = 4;
    const MarketSpec spec = parse_config(testcfg::two_pop(o));

    SUBCASE("largest-remainder population counts") {
        const auto agents = sample_agents(spec, 10, 99);
        int n0 = 0;
        for (const auto& a : agents) n0 += (a.pop == 0);
        CHECK(static_cast<int>(agents.size()) == 10);
        CHECK(n0 == 3);  // weights (0.3, 0.7)
        const auto agents7 = sample_agents(spec, 7, 99);
        int n0b = 0;
        for (const auto& a : agents7) n0b += (a.pop == 0);
        CHECK(n0b == 2);  // 2.1 -> 2, remainder goes to the larger fraction
    }
    SUBCASE("z-paths follow the chain support") {
        const auto agents = sample_agents(spec, 50, 123);
        for (const auto& a : agents) {
            REQUIRE(static_cast<int>(a.z_path.size()) == 5);
            CHECK(a.z_path[0] == 0);
            for (int k = 0; k < 4; ++k) {
                const int step = a.z_path[k + 1] - a.z_path[k];
                CHECK(step >= 0);
                CHECK(step <= 1);
            }
            CHECK(a.type >= 0);
            CHECK(a.type < 2);
        }
    }
    SUBCASE("same seed reproduces, different seed varies") {
        const auto a = sample_agents(spec, 40, 5);
        const auto b = sample_agents(spec, 40, 5);
        const auto c = sample_agents(spec, 40, 6);
        REQUIRE(a.size() == b.size());
        bool all_equal = true, any_diff_c = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            all_equal = all_equal && a[i].pop == b[i].pop && a[i].type == b[i].type &&
                        a[i].z_path == b[i].z_path;
            any_diff_c = any_diff_c || a[i].type != c[i].type || a[i].z_path != c[i].z_path;
        }
        CHECK(all_equal);
        CHECK(any_diff_c);
    }
    SUBCASE("type frequencies concentrate on the weights") {
        testcfg::SinglePop s;
        s.n_steps = 2;
        s.n_gamma = 4;  // five equally weighted types
        const MarketSpec sp = parse_config(testcfg::single_pop(s));
        const auto agents = sample_agents(sp, 20000, 31);
        std::vector<int> counts(5, 0);
        for (const auto& a : agents) ++counts[a.type];
        for (int t = 0; t < 5; ++t)
            CHECK(std::abs(counts[t] / 20000.0 - 0.2) < 3.0 * std::sqrt(0.2 * 0.8 / 20000));
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(sample_agents(spec, 1, 0), InvalidParams);
    }
}

TEST_CASE("clearing error experiment") {
    testcfg::SinglePop o;
    o.n_steps = 6;
    const MarketSpec spec = parse_config(testcfg::single_pop(o));
    const auto sol = solve_mc_mfe(spec);

    SUBCASE("mse decreases with the sample size at the LLN rate") {
        const auto exp1 = clearing_error(spec, sol, {50, 200, 800}, 60, 2024);
        REQUIRE(static_cast<int>(exp1.mse.size()) == 3);
        CHECK(exp1.time_index == 3);
        CHECK(exp1.mse[0] > exp1.mse[1]);
        CHECK(exp1.mse[1] > exp1.mse[2]);
        CHECK(std::isfinite(exp1.slope));
        CHECK(exp1.slope < -0.6);
        CHECK(exp1.slope > -1.4);
        for (double me : exp1.mean_excess) CHECK(std::abs(me) < 0.2);
    }
    SUBCASE("deterministic in the seed") {
        const auto a = clearing_error(spec, sol, {50, 200}, 40, 7);
        const auto b = clearing_error(spec, sol, {50, 200}, 40, 7);
        const auto c = clearing_error(spec, sol, {50, 200}, 40, 8);
        CHECK(a.mse == b.mse);
        CHECK(a.mean_excess == b.mean_excess);
        CHECK(a.mse != c.mse);
    }
    SUBCASE("homogeneous zero-flow population clears exactly") {
        // Constant liabilities and zero order flow force every position to
        // bitwise 0.0, so the finite-sample excess has no rounding residue.
        testcfg::SinglePop h;
        h.n_steps = 6;
        h.n_gamma = 0;
        h.gamma_min = 1.0;
        h.gamma_max = 1.0;
        h.f_a = 0.0;
        h.c = 1.0;
        h.l_a = 0.0;
        h.l_b = 0.0;
        const std::string doc = apply_overrides(
            testcfg::single_pop(h), {"populations[0].z_chain.sigma_z=0.0"});
        const MarketSpec hspec = parse_config(doc);
        const auto hsol = solve_mc_mfe(hspec);
        const auto exp2 = clearing_error(hspec, hsol, {50, 200}, 40, 11);
        for (double m : exp2.mse) CHECK(m == 0.0);
        for (double me : exp2.mean_excess) CHECK(me == 0.0);
        CHECK(std::isnan(exp2.slope));
    }
    SUBCASE("fixed node evaluation") {
        ClearingOptions opts;
        opts.time_index = 2;
        opts.fixed_node = true;
        opts.node_s = 1;
        opts.node_y = 2;
        const auto exp3 = clearing_error(spec, sol, {50, 200}, 40, 3, opts);
        CHECK(exp3.time_index == 2);
        CHECK(exp3.fixed_node);
        CHECK(exp3.mse[0] > 0.0);
        ClearingOptions bad = opts;
        bad.node_s = 5;
        CHECK_THROWS_AS(clearing_error(spec, sol, {50, 200}, 40, 3, bad), IndexOutOfRange);
    }
    SUBCASE("experiment validation") {
        CHECK_THROWS_AS(clearing_error(spec, sol, {100}, 40, 1), ExperimentError);
        CHECK_THROWS_AS(clearing_error(spec, sol, {200, 100}, 40, 1), ExperimentError);
        CHECK_THROWS_AS(clearing_error(spec, sol, {100, 100}, 40, 1), ExperimentError);
        CHECK_THROWS_AS(clearing_error(spec, sol, {100, 200}, 20, 1), ExperimentError);
        CHECK_THROWS_AS(clearing_error(spec, sol, {0, 100}, 40, 1), ExperimentError);
        SolveOptions lean;
        lean.keep_strategies = false;
        const auto lsol = solve_mc_mfe(spec, lean);
        CHECK_THROWS_AS(clearing_error(spec, lsol, {50, 200}, 40, 1), Error);
    }
}

}  // TEST_SUITE
