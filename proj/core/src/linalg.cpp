#include "treemfe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace treemfe {

Mat Mat::identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::transpose() const {
    Mat t(n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Vec Mat::apply(const Vec& x) const {
    Vec y(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vec Mat::apply_transposed(const Vec& x) const {
    Vec y(n_, 0.0);
    for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i) y[i] += (*this)(j, i) * x[j];
    return y;
}

Mat operator*(const Mat& a, const Mat& b) {
    const int n = a.size();
    Mat c(n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Mat operator+(const Mat& a, const Mat& b) {
    Mat c(a.size());
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j) c(i, j) = a(i, j) + b(i, j);
    return c;
}

Mat operator-(const Mat& a, const Mat& b) {
    Mat c(a.size());
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

Mat operator*(double s, const Mat& a) {
    Mat c(a.size());
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j) c(i, j) = s * a(i, j);
    return c;
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::abs(x));
    return m;
}

Mat outer(const Vec& a, const Vec& b) {
    const int n = static_cast<int>(a.size());
    Mat m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = a[i] * b[j];
    return m;
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec solve_dense(const Mat& a, const Vec& b, double rel_tol) {
    const int n = a.size();
    if (static_cast<int>(b.size()) != n)
        throw IndexOutOfRange("solve_dense: size mismatch");
    Mat w = a;
    Vec x = b;
    const double scale = std::max(a.max_abs(), 1e-300);

    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(w(r, col)) > std::abs(w(piv, col))) piv = r;
        if (std::abs(w(piv, col)) <= rel_tol * scale)
            throw SingularMatrix("solve_dense: pivot below relative threshold");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(w(piv, j), w(col, j));
            std::swap(x[piv], x[col]);
        }
        const double inv_p = 1.0 / w(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = w(r, col) * inv_p;
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) w(r, j) -= f * w(col, j);
            x[r] -= f * x[col];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int j = i + 1; j < n; ++j) s -= w(i, j) * x[j];
        x[i] = s / w(i, i);
    }
    return x;
}

Mat inverse(const Mat& a, double rel_tol) {
    const int n = a.size();
    Mat inv(n);
    for (int j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        Vec col = solve_dense(a, e, rel_tol);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

namespace {

// Sign-fix a unit vector so the largest-magnitude component is positive;
// ties resolved at the first occurrence. Deterministic output contract.
void sign_normalize(Vec& v) {
    int arg = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
}

}  // namespace

Svd svd(const Mat& a) {
    const int n = a.size();
    // One-sided Jacobi (Hestenes): rotate column pairs of W = A*V until all
    // pairs are orthogonal; then sigma_k = ||W_k||, U_k = W_k / sigma_k.
    Mat w = a;
    Mat v = Mat::identity(n);

    const double tol = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < n; ++i) {
                    app += w(i, p) * w(i, p);
                    aqq += w(i, q) * w(i, q);
                    apq += w(i, p) * w(i, q);
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < n; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    Vec sigma(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += w(i, k) * w(i, k);
        sigma[k] = std::sqrt(s);
    }

    // Sort descending; stable on ties for determinism.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](int i, int j) { return sigma[i] > sigma[j]; });

    Svd out;
    out.u = Mat(n);
    out.v = Mat(n);
    out.sigma.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const int src = perm[k];
        out.sigma[k] = sigma[src];
        for (int i = 0; i < n; ++i) out.v(i, k) = v(i, src);
        if (sigma[src] > 0.0) {
            for (int i = 0; i < n; ++i) out.u(i, k) = w(i, src) / sigma[src];
        }
        // Columns with sigma == 0 leave U columns zero; consumers needing a
        // left null space use singular_structure, which works on A^T.
    }
    return out;
}

double op_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    return svd(a).sigma.front();
}

Mat pseudo_inverse(const Mat& a, double tol) {
    const int n = a.size();
    const Svd dec = svd(a);
    const double cutoff = tol * (dec.sigma.empty() ? 0.0 : dec.sigma.front());
    Mat pinv(n);
    for (int k = 0; k < n; ++k) {
        if (dec.sigma[k] <= cutoff || dec.sigma[k] == 0.0) continue;
        const double inv_s = 1.0 / dec.sigma[k];
        for (int i = 0; i < n; ++i) {
            const double vik = dec.v(i, k) * inv_s;
            if (vik == 0.0) continue;
            for (int j = 0; j < n; ++j) pinv(i, j) += vik * dec.u(j, k);
        }
    }
    return pinv;
}

SingularStructure singular_structure(const Mat& a, double tol) {
    SingularStructure out;
    const int n = a.size();
    const Svd dec = svd(a);
    out.sigma_max = dec.sigma.front();
    out.sigma_min = dec.sigma.back();
    const double cutoff = tol * out.sigma_max;
    for (double s : dec.sigma)
        if (s <= cutoff) ++out.kernel_dim;
    if (out.sigma_max == 0.0) out.kernel_dim = n;
    if (out.kernel_dim == 1) {
        out.right.assign(n, 0.0);
        for (int i = 0; i < n; ++i) out.right[i] = dec.v(i, n - 1);
        sign_normalize(out.right);
        // Left kernel from the right kernel of A^T; both share the spectrum.
        const Svd dect = svd(a.transpose());
        out.left.assign(n, 0.0);
        for (int i = 0; i < n; ++i) out.left[i] = dect.v(i, n - 1);
        sign_normalize(out.left);
    }
    return out;
}

LaurentExpansion laurent_expand(const Mat& theta, int order, double tol) {
    const int n = theta.size();
    const Mat a = Mat::identity(n) - theta;
    const SingularStructure st = singular_structure(a, tol);
    if (st.kernel_dim == 0)
        throw NotSingular("laurent_expand: (I - Theta) is invertible");
    if (st.kernel_dim > 1)
        throw RegimeError("laurent_expand: kernel dimension " +
                              std::to_string(st.kernel_dim) + " exceeds 1",
                          st.kernel_dim);
    const double vk = dot(st.left, st.right);
    if (std::abs(vk) <= tol)
        throw HigherOrderPole(
            "laurent_expand: left and right kernel vectors are orthogonal "
            "(pole order >= 2)");

    LaurentExpansion ex;
    ex.order = order;
    ex.v = st.left;
    ex.kappa = st.right;
    ex.g = pseudo_inverse(a, tol);
    ex.r_minus1 = (1.0 / vk) * outer(st.right, st.left);
    ex.p = Mat::identity(n) - ex.r_minus1;

    const Mat pg = ex.p * ex.g;
    const double pg_norm = op_norm(pg);
    ex.convergence_radius = pg_norm > 0.0 ? 1.0 / pg_norm : 0.0;

    Mat pgk = pg;  // (PG)^{n+1}
    ex.regular_terms.reserve(order + 1);
    for (int k = 0; k <= order; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        ex.regular_terms.push_back(sign * (pgk * ex.p));
        if (k < order) pgk = pgk * pg;
    }
    return ex;
}

double laurent_eval_error(const Mat& theta, double eps, int order, double tol) {
    if (eps == 0.0)
        throw InvalidParams("laurent_eval_error: eps must be nonzero");
    const LaurentExpansion ex = laurent_expand(theta, order, tol);
    if (ex.convergence_radius > 0.0 && std::abs(eps) >= ex.convergence_radius)
        throw InvalidParams("laurent_eval_error: |eps| outside convergence region");

    const int n = theta.size();
    const Mat shifted = (Mat::identity(n) - theta) + eps * Mat::identity(n);
    const Mat direct = inverse(shifted);

    Mat series = (1.0 / eps) * ex.r_minus1;
    double epow = 1.0;  // eps^k
    for (int k = 0; k <= order; ++k) {
        series = series + epow * ex.regular_terms[static_cast<std::size_t>(k)];
        epow *= eps;
    }
    return op_norm(direct - series);
}

}  // namespace treemfe
