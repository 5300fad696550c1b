#include "delayctl/ddare.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <utility>

#include "delayctl/numerics.hpp"

namespace delayctl {

namespace {

// Normalized plant description shared by the multi-delay and restricted paths.
struct Plant {
    Matrix A;
    int D = 0;
    Index n = 0;
    Index m = 0;
    std::vector<Matrix> B;  // D+1 slots
    std::vector<NoiseChannel> channels;
};

Plant make_plant(const MultiDelaySystem& sys) {
    const auto want = static_cast<std::size_t>(sys.D) + 1;
    if (sys.D < 0 || sys.B.size() != want || sys.C.size() != want || sys.sigma2.size() != want ||
        sys.A.rows() != sys.n || sys.A.cols() != sys.n) {
        throw DimensionMismatch("ddare: malformed multi-delay system");
    }
    return {sys.A, sys.D, sys.n, sys.m, sys.B, noise_channels(sys)};
}

Plant make_plant(const RestrictedSystem& sys) {
    if (sys.D < 0 || sys.A.rows() != sys.A.cols()) {
        throw DimensionMismatch("ddare: malformed restricted system");
    }
    return {sys.A, sys.D, sys.n(), sys.m(), input_matrices(sys), noise_channels(sys)};
}

void check_weights(const Plant& plant, const Eigen::Ref<const Matrix>& Q,
                   const Eigen::Ref<const Matrix>& R, double pd_tol) {
    if (Q.rows() != plant.n || Q.cols() != plant.n || R.rows() != plant.m ||
        R.cols() != plant.m) {
        throw DimensionMismatch("ddare: Q must be n x n and R must be m x m");
    }
    if (!is_positive_definite(Q, pd_tol).positive_definite) {
        throw Error("ddare: Q must be positive definite");
    }
    if (!is_positive_definite(R, pd_tol).positive_definite) {
        throw Error("ddare: R must be positive definite");
    }
}

// Everything of Eq-form that does not depend on the iterate.
struct OperatorData {
    Matrix L;     // sum A^{D-j} B_j
    Matrix AD;    // A^D
    Matrix U_RQ;  // R + sum_tau sum_h sigma^2 C'(A')^{D-h} Q A^{D-h} C
    const Plant* plant = nullptr;
};

OperatorData make_operator_data(const Plant& plant, const Eigen::Ref<const Matrix>& Q,
                                const Eigen::Ref<const Matrix>& R) {
    PowerTable powers(plant.A);
    OperatorData data;
    data.plant = &plant;
    data.L = Matrix::Zero(plant.n, plant.m);
    for (int j = 0; j <= plant.D; ++j) {
        data.L += powers(plant.D - j) * plant.B[static_cast<std::size_t>(j)];
    }
    data.AD = powers(plant.D);
    data.U_RQ = R;
    for (const NoiseChannel& ch : plant.channels) {
        for (int h = 1; h <= ch.delay; ++h) {
            const Matrix& ADh = powers(plant.D - h);
            data.U_RQ += ch.sigma2 * ch.C.transpose() * ADh.transpose() * Q * ADh * ch.C;
        }
    }
    data.U_RQ = symmetrize(data.U_RQ);
    return data;
}

Matrix psi_of(const OperatorData& data, const Eigen::Ref<const Matrix>& Z) {
    Matrix Psi = data.L.transpose() * Z * data.L + data.U_RQ;
    const Matrix ZAD = Z * data.AD;
    for (const NoiseChannel& ch : data.plant->channels) {
        if (ch.sigma2 != 0.0) {
            Psi += ch.sigma2 * ch.C.transpose() * data.AD.transpose() * ZAD * ch.C;
        }
    }
    return symmetrize(Psi);
}

DdareStep apply_operator(const OperatorData& data, const Eigen::Ref<const Matrix>& Q,
                         const Eigen::Ref<const Matrix>& Z) {
    DdareStep step;
    step.Psi = psi_of(data, Z);
    Eigen::LLT<Matrix> llt(step.Psi);
    if (llt.info() != Eigen::Success) {
        throw NumericalFailure("ddare: Psi is not positive definite");
    }
    const Matrix& A = data.plant->A;
    const Matrix LtZA = data.L.transpose() * Z * A;
    step.Z_next = symmetrize(A.transpose() * Z * A + Q - LtZA.transpose() * llt.solve(LtZA));
    return step;
}

DdareResult run_iteration(const Plant& plant, const Eigen::Ref<const Matrix>& Q,
                          const Eigen::Ref<const Matrix>& R, const ToleranceSet& tol,
                          const DdareOptions& options) {
    if (!tol.valid()) {
        throw Error("ddare: invalid tolerance set");
    }
    check_weights(plant, Q, R, tol.pd_tol);
    const OperatorData data = make_operator_data(plant, Q, R);

    Matrix Z = Matrix::Zero(plant.n, plant.n);
    const bool decreasing = options.dominating_start.has_value();
    if (decreasing) {
        Z = *options.dominating_start;
        if (Z.rows() != plant.n || Z.cols() != plant.n) {
            throw DimensionMismatch("ddare: dominating start has wrong dimensions");
        }
        const Matrix Z1 = apply_operator(data, Q, Z).Z_next;
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Z - Z1), Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) < -tol.pd_tol * std::max(1.0, Z.norm())) {
            throw AssumptionViolated("ddare: start does not dominate the operator image");
        }
    }

    DdareResult result;
    DdareSolution sol;
    if (options.record_trace) {
        sol.trace.push_back(Z.norm());
    }

    Matrix Psi;
    for (int k = 0; k < tol.max_iter; ++k) {
        DdareStep step = apply_operator(data, Q, Z);
        if (!step.Z_next.allFinite()) {
            throw NumericalFailure("ddare: iterate is not finite");
        }
        const double gap = (step.Z_next - Z).norm();
        const double norm = step.Z_next.norm();
        if (options.record_trace) {
            sol.trace.push_back(norm);
            const Matrix delta =
                decreasing ? symmetrize(Z - step.Z_next) : symmetrize(step.Z_next - Z);
            Eigen::SelfAdjointEigenSolver<Matrix> es(delta, Eigen::EigenvaluesOnly);
            if (es.eigenvalues()(0) < -tol.pd_tol * std::max(1.0, norm)) {
                ++sol.monotonicity_violations;
            }
        }
        Z = std::move(step.Z_next);
        Psi = std::move(step.Psi);
        result.iterations = k + 1;
        if (gap <= tol.fp_rel * std::max(1.0, norm)) {
            result.status = SolveStatus::converged;
            break;
        }
        if (norm > tol.div_norm) {
            result.status = SolveStatus::diverged;
            break;
        }
    }

    result.final_iterate = Z;
    result.final_norm = Z.norm();
    if (result.status == SolveStatus::converged) {
        if (!is_positive_definite(Z, tol.pd_tol).positive_definite) {
            // A converged fixed point that is not positive definite does not
            // certify stabilizability (possible only for degenerate inputs).
            result.status = SolveStatus::iteration_cap;
            result.solution.reset();
            return result;
        }
        sol.Z = Z;
        sol.Psi = Psi;
        sol.U_RQ = data.U_RQ;
        sol.L = data.L;
        sol.iterations = result.iterations;
        sol.final_residual = (apply_operator(data, Q, Z).Z_next - Z).norm();
        result.solution = std::move(sol);
    }
    return result;
}

FeedbackLaw gain_from(const Plant& plant, const Eigen::Ref<const Matrix>& Z,
                      const Eigen::Ref<const Matrix>& Psi, const Matrix& L) {
    PowerTable powers(plant.A);
    Eigen::LLT<Matrix> llt(symmetrize(Psi));
    if (llt.info() != Eigen::Success) {
        throw NumericalFailure("synthesize_gain: Psi is not positive definite");
    }
    const Matrix LtZ = L.transpose() * Z;
    FeedbackLaw law;
    law.K.reserve(static_cast<std::size_t>(plant.D) + 1);
    law.K.push_back(-llt.solve(LtZ * powers(plant.D + 1)));
    for (int tau = 1; tau <= plant.D; ++tau) {
        Matrix sum = Matrix::Zero(plant.n, plant.m);
        for (int j = tau; j <= plant.D; ++j) {
            sum += powers(plant.D + tau - j) * plant.B[static_cast<std::size_t>(j)];
        }
        law.K.push_back(-llt.solve(LtZ * sum));
    }
    return law;
}

}  // namespace

std::vector<NoiseChannel> noise_channels(const MultiDelaySystem& sys) {
    std::vector<NoiseChannel> channels;
    channels.reserve(sys.C.size());
    for (std::size_t tau = 0; tau < sys.C.size(); ++tau) {
        channels.push_back({static_cast<int>(tau), sys.sigma2[tau], sys.C[tau]});
    }
    return channels;
}

std::vector<NoiseChannel> noise_channels(const RestrictedSystem& sys) {
    return {{0, sys.sigma0_2, sys.C0}, {sys.D, sys.sigmaD_2, sys.Cbar}};
}

std::vector<Matrix> input_matrices(const RestrictedSystem& sys) {
    std::vector<Matrix> B(static_cast<std::size_t>(sys.D) + 1, Matrix::Zero(sys.n(), sys.m()));
    B.back() = sys.Bbar;
    return B;
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged:
            return "converged";
        case SolveStatus::diverged:
            return "diverged";
        case SolveStatus::iteration_cap:
            return "iteration_cap";
    }
    return "unknown";
}

DdareStep ddare_operator(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                         const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z) {
    const Plant plant = make_plant(sys);
    return apply_operator(make_operator_data(plant, Q, R), Q, Z);
}

DdareStep ddare_operator(const RestrictedSystem& sys, const Eigen::Ref<const Matrix>& Q,
                         const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z) {
    const Plant plant = make_plant(sys);
    return apply_operator(make_operator_data(plant, Q, R), Q, Z);
}

DdareResult solve_ddare(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R, const ToleranceSet& tol,
                        const DdareOptions& options) {
    return run_iteration(make_plant(sys), Q, R, tol, options);
}

DdareResult solve_ddare(const RestrictedSystem& sys, const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R, const ToleranceSet& tol,
                        const DdareOptions& options) {
    return run_iteration(make_plant(sys), Q, R, tol, options);
}

FeedbackLaw synthesize_gain(const MultiDelaySystem& sys, const DdareSolution& sol) {
    return gain_from(make_plant(sys), sol.Z, sol.Psi, sol.L);
}

FeedbackLaw synthesize_gain(const RestrictedSystem& sys, const DdareSolution& sol) {
    return gain_from(make_plant(sys), sol.Z, sol.Psi, sol.L);
}

FeedbackLaw synthesize_gain(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                            const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z) {
    const Plant plant = make_plant(sys);
    const OperatorData data = make_operator_data(plant, Q, R);
    return gain_from(plant, Z, psi_of(data, Z), data.L);
}

PFormSolution p_form_check(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                           const Eigen::Ref<const Matrix>& R, const DdareSolution& sol,
                           const ToleranceSet& tol) {
    const Plant plant = make_plant(sys);
    PowerTable powers(plant.A, tol.inv_tol);

    PFormSolution out;
    const Matrix& AD = powers(plant.D);
    out.P = symmetrize(AD.transpose() * sol.Z * AD);
    out.Qhat = symmetrize(AD.transpose() * Q * AD);
    out.H = Matrix::Zero(plant.n, plant.m);
    for (int j = 0; j <= plant.D; ++j) {
        out.H += powers(-j) * plant.B[static_cast<std::size_t>(j)];
    }
    out.W_RQ = R;
    for (const NoiseChannel& ch : plant.channels) {
        for (int h = 1; h <= ch.delay; ++h) {
            const Matrix& Ah = powers(-h);
            out.W_RQ += ch.sigma2 * ch.C.transpose() * Ah.transpose() * out.Qhat * Ah * ch.C;
        }
    }
    out.W_RQ = symmetrize(out.W_RQ);
    out.Lambda = out.H.transpose() * out.P * out.H + out.W_RQ;
    for (const NoiseChannel& ch : plant.channels) {
        if (ch.sigma2 != 0.0) {
            out.Lambda += ch.sigma2 * ch.C.transpose() * out.P * ch.C;
        }
    }
    out.Lambda = symmetrize(out.Lambda);

    Eigen::LLT<Matrix> llt(out.Lambda);
    if (llt.info() != Eigen::Success) {
        throw NumericalFailure("p_form_check: Lambda is not positive definite");
    }
    const Matrix HtPA = out.H.transpose() * out.P * plant.A;
    const Matrix residual = symmetrize(-out.P + plant.A.transpose() * out.P * plant.A + out.Qhat -
                                       HtPA.transpose() * llt.solve(HtPA));
    out.residual = residual.norm();
    out.lambda_gap = (out.Lambda - sol.Psi).norm() / std::max(1.0, sol.Psi.norm());

    if (out.residual > 10.0 * tol.fp_rel * std::max(1.0, out.P.norm())) {
        std::ostringstream msg;
        msg << "p_form_check: equation residual " << out.residual << " exceeds "
            << 10.0 * tol.fp_rel * std::max(1.0, out.P.norm());
        throw ConsistencyFailure(msg.str());
    }
    if (out.lambda_gap > 1e-8) {
        std::ostringstream msg;
        msg << "p_form_check: Lambda differs from Psi by relative " << out.lambda_gap;
        throw ConsistencyFailure(msg.str());
    }
    return out;
}

CareReconstruction care_reconstruct(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                                    const Eigen::Ref<const Matrix>& R, const DdareSolution& sol,
                                    const ToleranceSet& tol) {
    const Plant plant = make_plant(sys);
    const PFormSolution pf = p_form_check(sys, Q, R, sol, tol);
    PowerTable powers(plant.A, tol.inv_tol);
    const Matrix& A = plant.A;
    const int D = plant.D;

    CareReconstruction out;
    Matrix P1 = powers(D).transpose() * pf.P * powers(D);
    for (int i = 0; i < D; ++i) {
        P1 += powers(i).transpose() * pf.Qhat * powers(i);
    }
    out.P.push_back(symmetrize(P1));
    const Matrix core = symmetrize(pf.P - A.transpose() * pf.P * A - pf.Qhat);
    for (int i = 2; i <= D + 1; ++i) {
        out.P.push_back(symmetrize(powers(i - 2).transpose() * core * powers(i - 2)));
    }

    out.M = pf.H.transpose() * pf.P * A;
    out.Upsilon = R;
    for (const Matrix& Pi : out.P) {
        out.Upsilon += pf.H.transpose() * Pi * pf.H;
    }
    for (const NoiseChannel& ch : plant.channels) {
        if (ch.sigma2 == 0.0) {
            continue;
        }
        const Matrix Hj = powers(-ch.delay) * ch.C;
        out.Upsilon += ch.sigma2 * Hj.transpose() * out.P[0] * Hj;
        for (std::size_t i = 2; i <= out.P.size(); ++i) {
            if (ch.delay <= static_cast<int>(i) - 2) {
                out.Upsilon += ch.sigma2 * Hj.transpose() * out.P[i - 1] * Hj;
            }
        }
    }
    out.Upsilon = symmetrize(out.Upsilon);

    Matrix sum = Matrix::Zero(plant.n, plant.n);
    for (const Matrix& Pi : out.P) {
        sum += Pi;
    }
    const double pnorm = std::max(1.0, pf.P.norm());
    out.sum_residual = (sum - pf.P).norm() / pnorm;

    Matrix eq;
    if (D >= 1) {
        eq = out.P[0] - A.transpose() * out.P[0] * A - A.transpose() * out.P.back() * A - pf.Qhat;
    } else {
        // Single unknown: the first equation collapses to the plain
        // fixed-point identity P = A' P A + Qhat - M' Upsilon^{-1} M.
        Eigen::LLT<Matrix> lam(pf.Lambda);
        eq = out.P[0] - A.transpose() * out.P[0] * A - pf.Qhat +
             out.M.transpose() * lam.solve(out.M);
    }
    out.equation_residual = eq.norm() / std::max(1.0, out.P[0].norm());

    out.upsilon_gap = (out.Upsilon - sol.Psi).norm() / std::max(1.0, sol.Psi.norm());
    if (D >= 1) {
        Eigen::LLT<Matrix> llt(out.Upsilon);
        if (llt.info() != Eigen::Success) {
            throw NumericalFailure("care_reconstruct: Upsilon is not positive definite");
        }
        const Matrix coupling = out.P[1] + out.M.transpose() * llt.solve(out.M);
        out.coupling_residual = coupling.norm() / std::max(1.0, out.P[1].norm());
    }

    if (out.sum_residual > 1e-8) {
        std::ostringstream msg;
        msg << "care_reconstruct: sum of P_i misses P by relative " << out.sum_residual;
        throw ConsistencyFailure(msg.str());
    }
    if (out.equation_residual > 1e-7 || out.coupling_residual > 1e-7) {
        std::ostringstream msg;
        msg << "care_reconstruct: residuals " << out.equation_residual << ", "
            << out.coupling_residual << " exceed 1e-7";
        throw ConsistencyFailure(msg.str());
    }
    return out;
}

}  // namespace delayctl
