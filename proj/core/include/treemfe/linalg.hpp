#pragma once

#include <vector>

#include "treemfe/errors.hpp"

namespace treemfe {

using Vec = std::vector<double>;

// Small dense square matrix, row-major. Problem sizes are the number of
// populations (m <= ~16), so no attempt is made at large-scale performance.
class Mat {
public:
    Mat() = default;
    explicit Mat(int n, double fill = 0.0)
        : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {}

    static Mat identity(int n);

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    int size() const { return n_; }

    Mat transpose() const;
    Vec apply(const Vec& x) const;            // A x
    Vec apply_transposed(const Vec& x) const; // A^T x

    friend Mat operator*(const Mat& a, const Mat& b);
    friend Mat operator+(const Mat& a, const Mat& b);
    friend Mat operator-(const Mat& a, const Mat& b);
    friend Mat operator*(double s, const Mat& a);

    double max_abs() const;

private:
    int n_ = 0;
    std::vector<double> a_;
};

Mat outer(const Vec& a, const Vec& b);
double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);

// Gaussian elimination with partial pivoting.
// Throws SingularMatrix when a pivot falls below rel_tol * max|A|.
Vec solve_dense(const Mat& a, const Vec& b, double rel_tol = 1e-13);

// Inverse via column-wise solves; throws SingularMatrix.
Mat inverse(const Mat& a, double rel_tol = 1e-13);

// Singular value decomposition A = U diag(sigma) V^T of a square matrix,
// singular values sorted descending. Computed by one-sided Jacobi rotations
// with a deterministic sweep order.
struct Svd {
    Mat u;
    Vec sigma;
    Mat v;
};
Svd svd(const Mat& a);

// Spectral norm (largest singular value).
double op_norm(const Mat& a);

// Moore-Penrose pseudo-inverse: singular values below tol * sigma_max are
// treated as zero. For a rank-deficient square matrix this coincides with
// inverting the restriction to the orthogonal complement of the kernel.
Mat pseudo_inverse(const Mat& a, double tol = 1e-10);

// Rank structure of a square matrix from its singular spectrum.
// kernel_dim counts singular values <= tol * sigma_max. For kernel_dim == 1,
// right/left hold unit kernel vectors of A and A^T, sign-normalized so the
// largest-magnitude component is positive.
struct SingularStructure {
    int kernel_dim = 0;
    Vec right;  // kernel of A      (kappa when A = I - Theta)
    Vec left;   // kernel of A^T    (v when A = I - Theta)
    double sigma_max = 0.0;
    double sigma_min = 0.0;
};
SingularStructure singular_structure(const Mat& a, double tol = 1e-10);

// Laurent expansion of the resolvent (I - Theta + eps*I)^{-1} around eps = 0
// for a rank-1-singular (I - Theta) with a simple pole:
//   (1/eps) * kappa v^T / (v,kappa)  +  sum_{n=0..K} (-eps)^n (PG)^{n+1} P,
// where G is the pseudo-inverse of (I - Theta) and P = I - kappa v^T/(v,kappa).
struct LaurentExpansion {
    Mat r_minus1;
    std::vector<Mat> regular_terms;  // R_0 .. R_K
    int order = 0;
    Vec v;
    Vec kappa;
    Mat g;
    Mat p;
    double convergence_radius = 0.0;  // 1 / ||PG||
};

// Throws NotSingular when (I - Theta) is invertible, RegimeError when the
// kernel dimension exceeds 1, HigherOrderPole when (v,kappa) ~ 0.
LaurentExpansion laurent_expand(const Mat& theta, int order, double tol = 1e-10);

// Operator-norm distance between the direct inverse of (I - Theta + eps*I)
// and the Laurent series truncated at order K. Decays as O(eps^{K+1}).
double laurent_eval_error(const Mat& theta, double eps, int order, double tol = 1e-10);

}  // namespace treemfe
