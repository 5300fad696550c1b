#pragma once

// Delay-dependent algebraic Riccati machinery. The fixed-point equation
//   Z = A' Z A + Q - A' Z L Psi(Z)^{-1} L' Z A,
//   Psi(Z) = L' Z L + sum_tau sigma_tau^2 C_tau' (A')^D Z A^D C_tau + U_{R,Q},
//   L = sum_j A^{D-j} B_j,
//   U_{R,Q} = R + sum_{tau>=1} sum_{h=1}^{tau} sigma_tau^2 C_tau' (A')^{D-h} Q A^{D-h} C_tau,
// has a positive definite solution exactly when the multi-delay loop is
// mean-square stabilizable; the solution also yields the stabilizing law.

#include <optional>
#include <vector>

#include "delayctl/model.hpp"
#include "delayctl/reduction.hpp"
#include "delayctl/types.hpp"

namespace delayctl {

/// One noise channel of the loop: sigma2 scales C at the given delay slot.
struct NoiseChannel {
    int delay = 0;
    double sigma2 = 0;
    Matrix C;
};

std::vector<NoiseChannel> noise_channels(const MultiDelaySystem& sys);
std::vector<NoiseChannel> noise_channels(const RestrictedSystem& sys);

/// Input matrices by delay slot (the restricted structure has only B_D).
std::vector<Matrix> input_matrices(const RestrictedSystem& sys);

struct DdareStep {
    Matrix Z_next;
    Matrix Psi;
};

DdareStep ddare_operator(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                         const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z);
DdareStep ddare_operator(const RestrictedSystem& sys, const Eigen::Ref<const Matrix>& Q,
                         const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z);

struct DdareSolution {
    Matrix Z;
    Matrix Psi;
    Matrix U_RQ;
    Matrix L;
    int iterations = 0;
    double final_residual = 0;  ///< ||operator(Z) - Z||_F of the returned Z
    std::vector<double> trace;  ///< iterate Frobenius norms when recording
    int monotonicity_violations = 0;
};

enum class SolveStatus { converged, diverged, iteration_cap };

const char* to_string(SolveStatus status);

struct DdareResult {
    SolveStatus status = SolveStatus::iteration_cap;
    std::optional<DdareSolution> solution;  ///< set exactly when converged
    int iterations = 0;
    Matrix final_iterate;  ///< last iterate, also on failure
    double final_norm = 0;

    [[nodiscard]] bool converged() const { return status == SolveStatus::converged; }
};

struct DdareOptions {
    bool record_trace = false;  ///< also enables the monotonicity audit
    /// Start from a user-supplied dominating iterate instead of zero; the
    /// iteration then decreases monotonically. Throws AssumptionViolated
    /// unless Z0 >= operator(Z0) up to the definiteness slack.
    std::optional<Matrix> dominating_start;
};

/// Iterates the operator from Z_0 = 0 until
/// ||Z_{k+1} - Z_k||_F <= fp_rel * max(1, ||Z_{k+1}||_F). Divergence past
/// div_norm or exhaustion of max_iter means no positive definite solution was
/// found, i.e. the system was not certified stabilizable.
DdareResult solve_ddare(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R, const ToleranceSet& tol = {},
                        const DdareOptions& options = {});
DdareResult solve_ddare(const RestrictedSystem& sys, const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R, const ToleranceSet& tol = {},
                        const DdareOptions& options = {});

/// The stabilizing law u_t = K_0 x_t + sum K_tau u_{t-tau} with
/// K_0 = -Psi^{-1} L' Z A^{D+1} and
/// K_tau = -Psi^{-1} L' Z A^D sum_{j=tau}^{D} A^{tau-j} B_j.
FeedbackLaw synthesize_gain(const MultiDelaySystem& sys, const DdareSolution& sol);
FeedbackLaw synthesize_gain(const RestrictedSystem& sys, const DdareSolution& sol);

/// Same law from a bare iterate; Psi is recomputed from Z. Useful for probing
/// non-converged iterates.
FeedbackLaw synthesize_gain(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                            const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Z);

/// Equivalent form of the equation after the congruence P = (A')^D Z A^D:
///   P = A' P A + Qhat - A' P H Lambda^{-1} H' P A,
/// with H = sum_j A^{-j} B_j, Qhat = (A')^D Q A^D, and Lambda matching Psi.
struct PFormSolution {
    Matrix P;
    Matrix Lambda;
    Matrix H;
    Matrix W_RQ;
    Matrix Qhat;
    double residual = 0;         ///< Frobenius residual of the P-form equation
    double lambda_gap = 0;       ///< relative gap between Lambda and Psi
};

/// Builds the P-form quantities from a converged solution and checks the
/// equation residual (<= 10 fp_rel ||P||) and Lambda == Psi (1e-8 relative).
/// Throws ConsistencyFailure when a check fails.
PFormSolution p_form_check(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                           const Eigen::Ref<const Matrix>& R, const DdareSolution& sol,
                           const ToleranceSet& tol = {});

/// Splitting of P into the D+1 coupled-equation unknowns:
///   P_1 = (A')^D P A^D + sum_{i=0}^{D-1} (A')^i Qhat A^i,
///   P_i = (A')^{i-2} (P - A' P A - Qhat) A^{i-2},  i in [2, D+1],
/// with M = H' P A and the coupling P_2 = -M' Upsilon^{-1} M.
struct CareReconstruction {
    std::vector<Matrix> P;  ///< P_1 .. P_{D+1}
    Matrix M;
    Matrix Upsilon;
    double sum_residual = 0;       ///< relative gap of sum P_i vs P
    double equation_residual = 0;  ///< relative residual of the P_1 equation
    double coupling_residual = 0;  ///< relative residual of P_2 + M' Upsilon^{-1} M
    double upsilon_gap = 0;        ///< relative gap between Upsilon and Psi
};

/// Reconstructs the coupled-Riccati unknowns from a converged solution and
/// verifies sum P_i = P (1e-8 relative) and the two residuals (1e-7
/// relative). Throws ConsistencyFailure when a check fails.
CareReconstruction care_reconstruct(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& Q,
                                    const Eigen::Ref<const Matrix>& R, const DdareSolution& sol,
                                    const ToleranceSet& tol = {});

}  // namespace delayctl
