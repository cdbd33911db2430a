#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "treemfe/errors.hpp"
#include "treemfe/linalg.hpp"

using namespace treemfe;

namespace {

Mat symmetric_concern(double diag, double off) {
    Mat t(2);
    t(0, 0) = diag; t(0, 1) = off;
    t(1, 0) = off; t(1, 1) = diag;
    return t;
}

Mat triangular_concern(double diag) {
    Mat t(2);
    t(0, 0) = diag; t(0, 1) = 0.1;
    t(1, 0) = 0.0; t(1, 1) = diag;
    return t;
}

// Exact truncation error of the rank-1 resolvent series for the symmetric
// (0.6, 0.4) concern matrix, derived from the closed-form inverse
// (eps (0.8 + eps))^{-1} [[0.4+eps, 0.4], [0.4, 0.4+eps]].
double closed_form_error(double eps, int order) {
    return std::pow(eps, order + 1) / (std::pow(0.8, order + 1) * (0.8 + eps));
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("dense solve and inverse") {
    Mat a(3);
    a(0, 0) = 4; a(0, 1) = 1; a(0, 2) = 2;
    a(1, 0) = 1; a(1, 1) = 3; a(1, 2) = 0;
    a(2, 0) = 2; a(2, 1) = 0; a(2, 2) = 5;
    const Vec b = {1.0, -2.0, 3.0};
    const Vec x = solve_dense(a, b);
    const Vec ax = a.apply(x);
    for (int i = 0; i < 3; ++i) CHECK(ax[i] == doctest::Approx(b[i]).epsilon(1e-12));

    const Mat inv = inverse(a);
    const Mat prod = a * inv;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));

    Mat sing(2);
    sing(0, 0) = 1; sing(0, 1) = 2;
    sing(1, 0) = 2; sing(1, 1) = 4;
    CHECK_THROWS_AS(solve_dense(sing, {1.0, 1.0}), SingularMatrix);
}

TEST_CASE("svd reconstructs and orders singular values") {
    Mat a(3);
    a(0, 0) = 2; a(0, 1) = -1; a(0, 2) = 0.5;
    a(1, 0) = 0; a(1, 1) = 1;  a(1, 2) = 4;
    a(2, 0) = 1; a(2, 1) = 1;  a(2, 2) = 1;
    const Svd dec = svd(a);
    REQUIRE(static_cast<int>(dec.sigma.size()) == 3);
    CHECK(dec.sigma[0] >= dec.sigma[1]);
    CHECK(dec.sigma[1] >= dec.sigma[2]);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double rec = 0.0, utu = 0.0, vtv = 0.0;
            for (int k = 0; k < 3; ++k) {
                rec += dec.u(i, k) * dec.sigma[k] * dec.v(j, k);
                utu += dec.u(k, i) * dec.u(k, j);
                vtv += dec.v(k, i) * dec.v(k, j);
            }
            CHECK(rec == doctest::Approx(a(i, j)).epsilon(1e-11).scale(1.0));
            CHECK(utu == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-11).scale(1.0));
            CHECK(vtv == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-11).scale(1.0));
        }
}

TEST_CASE("operator norm") {
    Mat a(2);
    a(0, 0) = 3; a(1, 1) = -2;
    CHECK(op_norm(a) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("pseudo-inverse of the symmetric singular pencil") {
    const Mat a = Mat::identity(2) - symmetric_concern(0.6, 0.4);
    const Mat g = pseudo_inverse(a);
    CHECK(g(0, 0) == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(-0.625).epsilon(1e-12));
    CHECK(g(1, 0) == doctest::Approx(-0.625).epsilon(1e-12));
    CHECK(g(1, 1) == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identities") {
    Mat a(3);  // rank 2: third row = first + second
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 0;
    a(1, 0) = 0; a(1, 1) = 1; a(1, 2) = 3;
    a(2, 0) = 1; a(2, 1) = 3; a(2, 2) = 3;
    const Mat g = pseudo_inverse(a);
    const Mat aga = a * g * a;
    const Mat gag = g * a * g;
    const Mat ag = a * g;
    const Mat ga = g * a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(aga(i, j) == doctest::Approx(a(i, j)).epsilon(1e-10).scale(1.0));
            CHECK(gag(i, j) == doctest::Approx(g(i, j)).epsilon(1e-10).scale(1.0));
            CHECK(ag(i, j) == doctest::Approx(ag(j, i)).epsilon(1e-10).scale(1.0));
            CHECK(ga(i, j) == doctest::Approx(ga(j, i)).epsilon(1e-10).scale(1.0));
        }
}

TEST_CASE("singular structure of the reference pencils") {
    SUBCASE("symmetric a=0.6: symmetric rank-1 kernel") {
        const auto st = singular_structure(Mat::identity(2) - symmetric_concern(0.6, 0.4));
        REQUIRE(st.kernel_dim == 1);
        const double r = 1.0 / std::sqrt(2.0);
        CHECK(st.right[0] == doctest::Approx(r).epsilon(1e-12));
        CHECK(st.right[1] == doctest::Approx(r).epsilon(1e-12));
        CHECK(st.left[0] == doctest::Approx(r).epsilon(1e-12));
        CHECK(st.left[1] == doctest::Approx(r).epsilon(1e-12));
    }
    SUBCASE("triangular a=1: orthogonal left/right kernels") {
        const auto st = singular_structure(Mat::identity(2) - triangular_concern(1.0));
        REQUIRE(st.kernel_dim == 1);
        CHECK(st.right[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(st.right[1] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
        CHECK(st.left[0] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
        CHECK(st.left[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(dot(st.left, st.right)) < 1e-12);
    }
    SUBCASE("regular pencil has empty kernel") {
        const auto st = singular_structure(Mat::identity(2) - symmetric_concern(0.3, 0.4));
        CHECK(st.kernel_dim == 0);
    }
    SUBCASE("identity concern has full kernel") {
        const auto st = singular_structure(Mat::identity(2) - Mat::identity(2));
        CHECK(st.kernel_dim == 2);
    }
}

TEST_CASE("laurent expansion of the symmetric pencil") {
    const Mat theta = symmetric_concern(0.6, 0.4);
    const LaurentExpansion exp = laurent_expand(theta, 3);
    CHECK(exp.order == 3);
    CHECK(exp.convergence_radius == doctest::Approx(0.8).epsilon(1e-12));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(exp.r_minus1(i, j) == doctest::Approx(0.5).epsilon(1e-12));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(exp.v[0] == doctest::Approx(r).epsilon(1e-12));
    CHECK(exp.kappa[0] == doctest::Approx(r).epsilon(1e-12));
    CHECK(exp.g(0, 0) == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("laurent expansion error branches") {
    CHECK_THROWS_AS(laurent_expand(symmetric_concern(0.3, 0.4), 2), NotSingular);
    CHECK_THROWS_AS(laurent_expand(triangular_concern(1.0), 2), HigherOrderPole);
    CHECK_THROWS_AS(laurent_expand(Mat::identity(2), 2), RegimeError);
}

TEST_CASE("resolvent truncation error matches the closed form") {
    const Mat theta = symmetric_concern(0.6, 0.4);
    // Exact values; the measured error carries ~1e-14 absolute noise from
    // the direct inverse, visible only at the smallest magnitudes.
    for (const double eps : {1e-2, 1e-3}) {
        for (int order = 0; order <= 2; ++order) {
            const double expected = closed_form_error(eps, order);
            const double got = laurent_eval_error(theta, eps, order);
            CHECK(std::abs(got - expected) <= 1e-6 * expected + 5e-13);
        }
    }
    CHECK(laurent_eval_error(theta, 1e-3, 0) ==
          doctest::Approx(0.001560549313358302).epsilon(1e-9));
    CHECK(laurent_eval_error(theta, 1e-3, 1) ==
          doctest::Approx(1.9506866416978772e-06).epsilon(1e-6));
    CHECK(laurent_eval_error(theta, 1e-3, 2) ==
          doctest::Approx(2.4383583021223462e-09).epsilon(1e-3));
    // Error strictly decreases with the truncation order.
    double prev = 1e9;
    for (int order = 0; order <= 3; ++order) {
        const double e = laurent_eval_error(theta, 1e-3, order);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("resolvent truncation error log-log slopes") {
    const Mat theta = symmetric_concern(0.6, 0.4);
    const std::vector<double> eps = {1e-2, 1e-3};
    for (int order = 0; order <= 2; ++order) {
        std::vector<double> errs;
        for (double e : eps) errs.push_back(laurent_eval_error(theta, e, order));
        const double slope = oracles::loglog_slope(eps, errs);
        CHECK(std::abs(slope - (order + 1)) < 0.1);
    }
}

TEST_CASE("vector helpers") {
    const Vec a = {3.0, 4.0};
    CHECK(norm2(a) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(dot(a, {1.0, 2.0}) == doctest::Approx(11.0).epsilon(1e-15));
    const Mat o = outer({1.0, 2.0}, {3.0, 4.0});
    CHECK(o(0, 0) == doctest::Approx(3.0));
    CHECK(o(1, 0) == doctest::Approx(6.0));
    CHECK(o(0, 1) == doctest::Approx(4.0));
    CHECK(o(1, 1) == doctest::Approx(8.0));
}

}  // TEST_SUITE
