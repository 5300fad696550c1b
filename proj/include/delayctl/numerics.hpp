#pragma once

// Small dense kernels used throughout: signed matrix powers from a single
// factorization, symmetric definiteness tests, spectral radii, and the matrix
// representation of second-moment maps X -> F X F' + sum sigma^2 M X M'.

#include <deque>
#include <vector>

#include "delayctl/types.hpp"

namespace delayctl {

template <typename Derived>
[[nodiscard]] Matrix symmetrize(const Eigen::MatrixBase<Derived>& M) {
    return 0.5 * (M + M.transpose());
}

/// Kronecker product, column-major vec convention: vec(A X B') = (B (x) A) vec(X).
Matrix kron(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B);

/// Caches the signed powers of a square matrix. Negative powers share one LU
/// factorization of A; positive powers are built incrementally.
class PowerTable {
public:
    explicit PowerTable(Matrix A, double inv_tol = ToleranceSet{}.inv_tol);

    /// A^k for any integer k (A^0 = I). Throws SingularMatrix on the first
    /// negative power if A fails the invertibility tolerance.
    const Matrix& operator()(int k) const;

    [[nodiscard]] Index dim() const { return a_.rows(); }
    [[nodiscard]] bool invertible() const { return invertible_; }

private:
    Matrix a_;
    Matrix a_inv_;
    bool invertible_ = false;
    double inv_tol_ = 0;
    // Deques keep handed-out references valid while the cache grows.
    mutable std::deque<Matrix> pos_;  // pos_[k] = A^k
    mutable std::deque<Matrix> neg_;  // neg_[k] = A^-k
};

/// A^k with sign-aware exponent; one factorization backs all negative powers.
Matrix mat_pow_signed(const Eigen::Ref<const Matrix>& A, int k,
                      double inv_tol = ToleranceSet{}.inv_tol);

struct DefinitenessResult {
    bool positive_definite = false;
    double min_eigenvalue = 0;
};

/// Symmetrizes M internally, then tests
/// lambda_min > pd_tol * max(1, |lambda|_max).
DefinitenessResult is_positive_definite(const Eigen::Ref<const Matrix>& M,
                                        double pd_tol = ToleranceSet{}.pd_tol);

/// One sigma^2 M X M' term of a second-moment map.
struct NoiseTerm {
    double sigma2 = 0;
    Matrix M;
};

/// Matrix of X -> F X F' + sum_i sigma_i^2 M_i X M_i' acting on column-stacked
/// k x k matrices. The represented loop is mean-square stable iff the spectral
/// radius of the returned k^2 x k^2 matrix is below one.
Matrix second_moment_operator_matrix(const Eigen::Ref<const Matrix>& F,
                                     const std::vector<NoiseTerm>& terms);

/// max |lambda_i(M)|; accuracy is that of the underlying eigensolver
/// (~1e-10 relative for well-scaled inputs).
double spectral_radius(const Eigen::Ref<const Matrix>& M);

}  // namespace delayctl
