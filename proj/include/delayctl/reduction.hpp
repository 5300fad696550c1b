#pragma once

// Delay-free reformulation of the multi-delay loop: the auxiliary state
// eta_t = x_t + sum_{tau=1}^{D} [sum_{j=tau}^{D} A^{tau-j-1} (B_j + w^j_{t+j-tau} C_j)] u_{t-tau},
// its one-step recursion, the conditional-expectation predictor, the
// aggregate input matrices L and H, and the rewrite of auxiliary-state
// feedback as an admissible delayed feedback law.

#include <vector>

#include "delayctl/model.hpp"
#include "delayctl/types.hpp"

namespace delayctl {

/// u_t = K[0] x_t + sum_{tau=1}^{D} K[tau] u_{t-tau}. K[0] is m x n, the
/// delayed gains are m x m.
struct FeedbackLaw {
    std::vector<Matrix> K;

    [[nodiscard]] int delay() const { return static_cast<int>(K.size()) - 1; }

    /// Evaluates the law; u_hist is u_{t-1} .. u_{t-D}, most recent first.
    [[nodiscard]] Vector apply(const Eigen::Ref<const Vector>& x,
                               const std::vector<Vector>& u_hist) const;
};

/// Gains of the auxiliary-state law u_t = L0 etahat_{t|t-1} + sum Ltau[tau-1] u_{t-tau}.
struct AuxGain {
    Matrix L0;                 ///< m x n
    std::vector<Matrix> Ltau;  ///< D gains, m x m
};

/// Realized noise values addressed by (delay index j, absolute time s).
/// Both the defining sum for eta_t (which reads w^j_{t+j-tau}) and the
/// recursion (which reads w^j_{t+j}) draw from one record of this shape.
class NoiseRecord {
public:
    NoiseRecord(int channels, long t_begin, long t_end);

    [[nodiscard]] double at(int j, long s) const;
    double& at(int j, long s);

    [[nodiscard]] int channels() const { return static_cast<int>(values_.size()); }
    [[nodiscard]] long t_begin() const { return t0_; }
    [[nodiscard]] long t_end() const { return t1_; }

private:
    long t0_;
    long t1_;
    std::vector<std::vector<double>> values_;
};

/// L = sum_{j=0}^{D} A^{D-j} B_j.
Matrix input_matrix_L(const MultiDelaySystem& sys);

/// H = sum_{j=0}^{D} A^{-j} B_j; satisfies L = A^D H. Throws SingularMatrix
/// when A fails the invertibility tolerance.
Matrix input_matrix_H(const MultiDelaySystem& sys, double inv_tol = ToleranceSet{}.inv_tol);

/// Per-tau coefficients sum_{j=tau}^{D} A^{tau-j-1} B_j of the predictor,
/// indexed tau = 1..D (entry tau-1). Precomputes all needed signed powers
/// from one factorization of A.
std::vector<Matrix> predictor_coefficients(const MultiDelaySystem& sys,
                                           double inv_tol = ToleranceSet{}.inv_tol);

/// etahat_{t|t-1} = x_t + sum_{tau=1}^{D} sum_{j=tau}^{D} A^{tau-j-1} B_j u_{t-tau}.
/// u_hist is u_{t-1} .. u_{t-D}; throws HistoryLengthMismatch unless it has
/// exactly D entries.
Vector predictor(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
                 const std::vector<Vector>& u_hist);

/// The auxiliary state eta_t evaluated from realized noises. The record must
/// cover w^j_s for s in [t, t+D-1]; otherwise throws MissingNoise.
Vector eta_definition(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
                      const std::vector<Vector>& u_hist, const NoiseRecord& noise, long t);

/// eta_{t+1} = A eta_t + sum_{j=0}^{D} A^{-j} (B_j + w^j_{t+j} C_j) u_t.
Vector eta_recursion_step(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& eta,
                          const Eigen::Ref<const Vector>& u, const NoiseRecord& noise, long t);

/// Rewrites an auxiliary-state law as a delayed feedback law:
/// K_0 = L0, K_tau = sum_{j=tau}^{D} L0 A^{tau-j-1} B_j + Ltau.
FeedbackLaw realize_controller(const MultiDelaySystem& sys, const AuxGain& gain);

}  // namespace delayctl
