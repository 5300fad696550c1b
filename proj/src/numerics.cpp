#include "delayctl/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <cstdlib>

namespace delayctl {

Matrix kron(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < A.cols(); ++j) {
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return out;
}

PowerTable::PowerTable(Matrix A, double inv_tol) : a_(std::move(A)), inv_tol_(inv_tol) {
    if (a_.rows() != a_.cols()) {
        throw DimensionMismatch("PowerTable: matrix must be square");
    }
    pos_.push_back(Matrix::Identity(a_.rows(), a_.cols()));
    Eigen::JacobiSVD<Matrix> svd(a_);
    const auto& sv = svd.singularValues();
    invertible_ = sv.size() > 0 && sv(sv.size() - 1) > inv_tol_ * sv(0);
    if (invertible_) {
        a_inv_ = Eigen::PartialPivLU<Matrix>(a_).solve(Matrix::Identity(a_.rows(), a_.cols()));
    }
}

const Matrix& PowerTable::operator()(int k) const {
    if (k >= 0) {
        while (static_cast<int>(pos_.size()) <= k) {
            pos_.push_back(pos_.back() * a_);
        }
        return pos_[static_cast<std::size_t>(k)];
    }
    if (!invertible_) {
        throw SingularMatrix("negative power of a matrix that fails the invertibility tolerance");
    }
    const int j = -k;
    if (neg_.empty()) {
        neg_.push_back(a_inv_);
    }
    while (static_cast<int>(neg_.size()) < j) {
        neg_.push_back(neg_.back() * a_inv_);
    }
    return neg_[static_cast<std::size_t>(j - 1)];
}

Matrix mat_pow_signed(const Eigen::Ref<const Matrix>& A, int k, double inv_tol) {
    PowerTable table(A, inv_tol);
    return table(k);
}

DefinitenessResult is_positive_definite(const Eigen::Ref<const Matrix>& M, double pd_tol) {
    if (M.rows() != M.cols()) {
        throw DimensionMismatch("is_positive_definite: matrix must be square");
    }
    if (M.rows() == 0) {
        return {false, 0.0};
    }
    const Matrix S = symmetrize(M);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericalFailure("is_positive_definite: eigenvalue computation failed");
    }
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
    const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    return {lo > pd_tol * scale, lo};
}

Matrix second_moment_operator_matrix(const Eigen::Ref<const Matrix>& F,
                                     const std::vector<NoiseTerm>& terms) {
    if (F.rows() != F.cols()) {
        throw DimensionMismatch("second_moment_operator_matrix: F must be square");
    }
    Matrix S = kron(F, F);
    for (const NoiseTerm& term : terms) {
        if (term.M.rows() != F.rows() || term.M.cols() != F.cols()) {
            throw DimensionMismatch("second_moment_operator_matrix: noise term dimension mismatch");
        }
        if (term.sigma2 != 0.0) {
            S += term.sigma2 * kron(term.M, term.M);
        }
    }
    return S;
}

double spectral_radius(const Eigen::Ref<const Matrix>& M) {
    if (M.rows() != M.cols()) {
        throw DimensionMismatch("spectral_radius: matrix must be square");
    }
    if (M.rows() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
        throw NumericalFailure("spectral_radius: eigenvalue computation failed");
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace delayctl
