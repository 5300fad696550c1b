#pragma once

// Lyapunov-type certification for the multi-delay loop. The delay-dependent
// Lyapunov equation (with L = sum_j A^{D-j} B_j)
//   P = Q + (A + L K)' P (A + L K)
//         + sum_tau sigma_tau^2 K' C_tau' (A')^D P A^D C_tau K
// has a positive definite solution for some K exactly when the loop is
// mean-square stabilizable; the matching feasibility form is the block LMI of
// the (S, Y) = (-P^{-1}, K S) change of variables. The module also hosts the
// exact second-moment stability oracle for the original delayed loop.

#include <optional>
#include <string>
#include <vector>

#include "delayctl/ddare.hpp"
#include "delayctl/model.hpp"
#include "delayctl/reduction.hpp"
#include "delayctl/types.hpp"

namespace delayctl {

struct StabilizationCertificate {
    Matrix K;  ///< m x n auxiliary gain, closed loop A + L K
    Matrix P;  ///< n x n positive definite Lyapunov weight
    Matrix S;  ///< -P^{-1}
    Matrix Y;  ///< K S
    double lmi_max_eig = 0;
    double ddli_margin = 0;  ///< smallest eigenvalue of P minus the Lyapunov image
};

/// Outcome of the exact augmented second-moment test.
struct MomentReport {
    double rho = 0;           ///< spectral radius of the augmented second-moment map
    Index augmented_dim = 0;  ///< n + D m
    bool stable = false;      ///< rho < 1 - pd_tol
};

struct VerificationReport {
    bool valid = false;
    double ddli_margin = 0;
    double lmi_max_eig = 0;
    double rho = 0;  ///< second-moment radius of the auxiliary closed loop
    std::vector<std::string> reasons;
};

/// P - Q - (A+LK)' P (A+LK) - sum sigma^2 K' C' (A')^D P A^D C K, symmetrized.
Matrix ddle_residual(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K,
                     const Eigen::Ref<const Matrix>& P, const Eigen::Ref<const Matrix>& Q);

enum class DdleStatus { solved, unstable };

struct DdleResult {
    DdleStatus status = DdleStatus::unstable;
    std::optional<Matrix> P;  ///< set exactly when solved
    double rho = 0;           ///< spectral radius of the closed-loop moment map

    [[nodiscard]] bool solved() const { return status == DdleStatus::solved; }
};

/// Solves the linear fixed point P = Q + T*(P) for the closed loop with gain
/// K via vectorization; Unstable when the moment map has spectral radius >= 1
/// (no positive definite solution exists).
DdleResult solve_ddle(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& K,
                      const Eigen::Ref<const Matrix>& Q);

/// The (D+3)n-square symmetric block matrix with diagonal blocks S and first
/// block column [S; AS + LY; sigma_0 A^D C_0 Y; ...; sigma_D A^D C_D Y].
/// Negative definiteness certifies stabilizability.
Matrix assemble_lmi(const MultiDelaySystem& sys, const Eigen::Ref<const Matrix>& S,
                    const Eigen::Ref<const Matrix>& Y);

/// Certificate carried by the Riccati solution: K = -Psi^{-1} L' Z A with
/// P = Z; strictness of the Lyapunov inequality follows from the equation
/// residual Q + K' U_{R,Q} K > 0.
StabilizationCertificate certificate_from_ddare(const MultiDelaySystem& sys,
                                                const Eigen::Ref<const Matrix>& Q,
                                                const Eigen::Ref<const Matrix>& R,
                                                const DdareSolution& sol);

/// Recomputes the margin, the LMI eigenvalue, and the closed-loop moment
/// radius from scratch; valid requires all three strict with pd_tol slack.
VerificationReport verify_certificate(const MultiDelaySystem& sys,
                                      const StabilizationCertificate& cert,
                                      const ToleranceSet& tol = {});

/// Exact mean-square stability decision for the original delayed loop under
/// the given feedback law: augments the state with the input history, forms
/// the second-moment operator, and reports its spectral radius. Throws Error
/// when n + D m exceeds max_augmented_dim (the operator matrix has
/// (n + D m)^2 squared entries).
MomentReport exact_ms_check(const MultiDelaySystem& sys, const FeedbackLaw& law,
                            int max_augmented_dim = 64, double pd_tol = ToleranceSet{}.pd_tol);
MomentReport exact_ms_check(const RestrictedSystem& sys, const FeedbackLaw& law,
                            int max_augmented_dim = 64, double pd_tol = ToleranceSet{}.pd_tol);

}  // namespace delayctl
