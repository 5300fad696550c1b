#include "delayctl/lyapunov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <sstream>

#include "delayctl/numerics.hpp"

namespace delayctl {

namespace {

void check_gain(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K,
                const char* where) {
    if (K.rows() != sys.m || K.cols() != sys.n) {
        throw DimensionMismatch(std::string(where) + ": K must be m x n");
    }
}

// Closed-loop second-moment terms of the auxiliary system
// beta_{t+1} = (A + LK) beta_t + sum_tau w_t^tau A^D C_tau K beta_t.
struct BetaLoop {
    Matrix F;
    std::vector<NoiseTerm> terms;
};

BetaLoop beta_loop(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K) {
    BetaLoop loop;
    const Matrix L = input_matrix_L(sys);
    const Matrix AD = mat_pow_signed(sys.A, sys.D);
    loop.F = sys.A + L * K;
    for (const NoiseChannel& ch : noise_channels(sys)) {
        if (ch.sigma2 != 0.0) {
            loop.terms.push_back({ch.sigma2, AD * ch.C * K});
        }
    }
    return loop;
}

MomentReport augmented_check(const Matrix& A, const std::vector<Matrix>& B,
                             const std::vector<NoiseChannel>& channels, const FeedbackLaw& law,
                             int max_augmented_dim, double pd_tol) {
    const Index n = A.rows();
    const Index m = B.front().cols();
    const int D = static_cast<int>(B.size()) - 1;
    if (law.delay() != D || law.K[0].rows() != m || law.K[0].cols() != n) {
        throw DimensionMismatch("exact_ms_check: law does not match the system");
    }
    for (int tau = 1; tau <= D; ++tau) {
        const Matrix& K = law.K[static_cast<std::size_t>(tau)];
        if (K.rows() != m || K.cols() != m) {
            throw DimensionMismatch("exact_ms_check: delayed gain must be m x m");
        }
    }

    const Index dim = n + D * m;
    if (dim > max_augmented_dim) {
        std::ostringstream msg;
        msg << "exact_ms_check: augmented dimension " << dim << " exceeds the cap "
            << max_augmented_dim << "; only Monte Carlo evidence is available at this size";
        throw Error(msg.str());
    }

    // Row layout of xi = (x, u_{t-1}, ..., u_{t-D}).
    auto ucol = [n, m](int tau) { return n + (tau - 1) * m; };
    Matrix Kxi(m, dim);
    Kxi.leftCols(n) = law.K[0];
    for (int tau = 1; tau <= D; ++tau) {
        Kxi.middleCols(ucol(tau), m) = law.K[static_cast<std::size_t>(tau)];
    }

    Matrix F = Matrix::Zero(dim, dim);
    F.topLeftCorner(n, n) = A + B[0] * law.K[0];
    for (int tau = 1; tau <= D; ++tau) {
        F.block(0, ucol(tau), n, m) =
            B[0] * law.K[static_cast<std::size_t>(tau)] + B[static_cast<std::size_t>(tau)];
    }
    if (D > 0) {
        F.block(n, 0, m, dim) = Kxi;
        for (int tau = 2; tau <= D; ++tau) {
            F.block(ucol(tau), ucol(tau - 1), m, m).setIdentity();
        }
    }

    std::vector<NoiseTerm> terms;
    for (const NoiseChannel& ch : channels) {
        if (ch.sigma2 == 0.0) {
            continue;
        }
        Matrix Ct = Matrix::Zero(dim, dim);
        if (ch.delay == 0) {
            Ct.topRows(n) = ch.C * Kxi;
        } else {
            Ct.block(0, ucol(ch.delay), n, m) = ch.C;
        }
        terms.push_back({ch.sigma2, std::move(Ct)});
    }

    MomentReport report;
    report.augmented_dim = dim;
    report.rho = spectral_radius(second_moment_operator_matrix(F, terms));
    report.stable = report.rho < 1.0 - pd_tol;
    return report;
}

}  // namespace

Matrix ddle_residual(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K,
                     const Eigen::Ref<const Matrix>& P, const Eigen::Ref<const Matrix>& Q) {
    check_gain(sys, K, "ddle_residual");
    if (P.rows() != sys.n || P.cols() != sys.n || Q.rows() != sys.n || Q.cols() != sys.n) {
        throw DimensionMismatch("ddle_residual: P and Q must be n x n");
    }
    const BetaLoop loop = beta_loop(sys, K);
    Matrix image = loop.F.transpose() * P * loop.F;
    for (const NoiseTerm& term : loop.terms) {
        image += term.sigma2 * term.M.transpose() * P * term.M;
    }
    return symmetrize(P - Q - image);
}

DdleResult solve_ddle(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K,
                      const Eigen::Ref<const Matrix>& Q) {
    check_gain(sys, K, "solve_ddle");
    if (Q.rows() != sys.n || Q.cols() != sys.n) {
        throw DimensionMismatch("solve_ddle: Q must be n x n");
    }
    const BetaLoop loop = beta_loop(sys, K);
    const Matrix S = second_moment_operator_matrix(loop.F, loop.terms);

    DdleResult result;
    result.rho = spectral_radius(S);
    if (result.rho >= 1.0) {
        return result;
    }
    const Index n2 = S.rows();
    const Matrix lhs = Matrix::Identity(n2, n2) - S.transpose();
    const Vector vecQ = Q.reshaped();
    const Vector vecP = Eigen::PartialPivLU<Matrix>(lhs).solve(vecQ);
    if (!vecP.allFinite()) {
        throw NumericalFailure("solve_ddle: linear solve produced non-finite values");
    }
    result.status = DdleStatus::solved;
    result.P = symmetrize(vecP.reshaped(sys.n, sys.n));
    return result;
}

Matrix assemble_lmi(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& S,
                    const Eigen::Ref<const Matrix>& Y) {
    if (S.rows() != sys.n || S.cols() != sys.n) {
        throw DimensionMismatch("assemble_lmi: S must be n x n");
    }
    if (Y.rows() != sys.m || Y.cols() != sys.n) {
        throw DimensionMismatch("assemble_lmi: Y must be m x n");
    }
    if (sys.C.size() != static_cast<std::size_t>(sys.D) + 1 || sys.sigma2.size() != sys.C.size()) {
        throw DimensionMismatch("assemble_lmi: malformed system");
    }
    const Matrix L = input_matrix_L(sys);
    const Matrix AD = mat_pow_signed(sys.A, sys.D);

    const int blocks = sys.D + 3;
    Matrix lmi = Matrix::Zero(blocks * sys.n, blocks * sys.n);
    for (int b = 0; b < blocks; ++b) {
        lmi.block(b * sys.n, b * sys.n, sys.n, sys.n) = S;
    }
    lmi.block(sys.n, 0, sys.n, sys.n) = sys.A * S + L * Y;
    for (int tau = 0; tau <= sys.D; ++tau) {
        lmi.block((2 + tau) * sys.n, 0, sys.n, sys.n) =
            std::sqrt(sys.sigma2[static_cast<std::size_t>(tau)]) * AD *
            sys.C[static_cast<std::size_t>(tau)] * Y;
    }
    return lmi.selfadjointView<Eigen::Lower>();
}

StabilizationCertificate certificate_from_ddare(const MultiDelaySystem& sys,
                                                [[maybe_unused]] const Eigen::Ref<const Matrix>& Q,
                                                [[maybe_unused]] const Eigen::Ref<const Matrix>& R,
                                                const DdareSolution& sol) {
    StabilizationCertificate cert;
    Eigen::LLT<Matrix> psi(symmetrize(sol.Psi));
    if (psi.info() != Eigen::Success) {
        throw NumericalFailure("certificate_from_ddare: Psi is not positive definite");
    }
    cert.K = -psi.solve(sol.L.transpose() * sol.Z * sys.A);
    cert.P = sol.Z;
    Eigen::LLT<Matrix> llt(symmetrize(sol.Z));
    if (llt.info() != Eigen::Success) {
        throw SingularMatrix("certificate_from_ddare: Z is not invertible");
    }
    cert.S = symmetrize(-llt.solve(Matrix::Identity(sys.n, sys.n)));
    cert.Y = cert.K * cert.S;

    Eigen::SelfAdjointEigenSolver<Matrix> margin(
        ddle_residual(sys, cert.K, cert.P, Matrix::Zero(sys.n, sys.n)), Eigen::EigenvaluesOnly);
    cert.ddli_margin = margin.eigenvalues()(0);
    Eigen::SelfAdjointEigenSolver<Matrix> lmi(assemble_lmi(sys, cert.S, cert.Y),
                                              Eigen::EigenvaluesOnly);
    cert.lmi_max_eig = lmi.eigenvalues()(lmi.eigenvalues().size() - 1);
    return cert;
}

VerificationReport verify_certificate(const MultiDelaySystem& sys,
                                      const StabilizationCertificate& cert,
                                      const ToleranceSet& tol) {
    VerificationReport report;
    if (cert.K.rows() != sys.m || cert.K.cols() != sys.n || cert.P.rows() != sys.n ||
        cert.P.cols() != sys.n) {
        throw DimensionMismatch("verify_certificate: certificate does not match the system");
    }
    const auto pd = is_positive_definite(cert.P, tol.pd_tol);
    if (!pd.positive_definite) {
        report.reasons.emplace_back("P not positive definite");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> margin(
        ddle_residual(sys, cert.K, cert.P, Matrix::Zero(sys.n, sys.n)), Eigen::EigenvaluesOnly);
    report.ddli_margin = margin.eigenvalues()(0);
    if (!(report.ddli_margin > tol.pd_tol)) {
        report.reasons.emplace_back("Lyapunov inequality not strict");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> lmi(assemble_lmi(sys, cert.S, cert.Y),
                                              Eigen::EigenvaluesOnly);
    report.lmi_max_eig = lmi.eigenvalues()(lmi.eigenvalues().size() - 1);
    if (!(report.lmi_max_eig < -tol.pd_tol)) {
        report.reasons.emplace_back("LMI not negative definite");
    }

    const BetaLoop loop = beta_loop(sys, cert.K);
    report.rho = spectral_radius(second_moment_operator_matrix(loop.F, loop.terms));

    report.valid = report.reasons.empty();
    return report;
}

MomentReport exact_ms_check(const MultiDelaySystem& sys, const FeedbackLaw& law,
                            int max_augmented_dim, double pd_tol) {
    return augmented_check(sys.A, sys.B, noise_channels(sys), law, max_augmented_dim, pd_tol);
}

MomentReport exact_ms_check(const RestrictedSystem& sys, const FeedbackLaw& law,
                            int max_augmented_dim, double pd_tol) {
    return augmented_check(sys.A, input_matrices(sys), noise_channels(sys), law,
                           max_augmented_dim, pd_tol);
}

}  // namespace delayctl
