#pragma once

// System data model: the multi-delay plant with one multiplicative
// control-dependent noise per delay channel, the restricted single-delay
// structure used for delay margins, and the packet-loss network description
// that maps onto the noise model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "delayctl/types.hpp"

namespace delayctl {

/// x_{t+1} = A x_t + sum_{tau=0}^{D} (B_tau + w_t^tau C_tau) u_{t-tau},
/// with E w_t^tau = 0 and E (w_t^tau)^2 = sigma2[tau], independent across
/// tau and t.
struct MultiDelaySystem {
    Index n = 0;  ///< state dimension
    Index m = 0;  ///< input dimension
    int D = 0;    ///< largest input delay
    Matrix A;
    std::vector<Matrix> B;       ///< D+1 input matrices, B[tau] is n x m
    std::vector<Matrix> C;       ///< D+1 noise coupling matrices, n x m
    std::vector<double> sigma2;  ///< D+1 noise variances
};

/// Single delayed channel plus an instantaneous noise channel:
/// x_{t+1} = A x_t + w_t^0 C0 u_t + (Bbar + w_t^D Cbar) u_{t-D}.
struct RestrictedSystem {
    Matrix A;
    Matrix C0;
    Matrix Bbar;
    Matrix Cbar;
    int D = 0;
    double sigma0_2 = 0;
    double sigmaD_2 = 0;

    [[nodiscard]] Index n() const { return A.rows(); }
    [[nodiscard]] Index m() const { return Bbar.cols(); }

    /// Exact embedding into the multi-delay form (B_tau = 0 for tau < D,
    /// C_tau = 0 for 0 < tau < D). At D = 0 both noise channels share the
    /// only delay slot, so the embedding exists only when at most one of
    /// them is active; otherwise throws DuplicateDelay.
    [[nodiscard]] MultiDelaySystem to_multi_delay() const;

    /// True when A, C0, Bbar, Cbar are all square diagonal, so the system
    /// decouples into scalar subsystems.
    [[nodiscard]] bool is_diagonal(double tol = 0.0) const;
};

struct WncsPath {
    int delay = 0;
    double loss_prob = 0;
};

/// Plant driven over parallel routes, each with a fixed delay and Bernoulli
/// packet loss: x_{t+1} = A x_t + sum_i gamma_t^i Bplant u_{t-d_i}.
struct WncsDescription {
    Matrix A;
    Matrix Bplant;
    std::vector<WncsPath> paths;
};

struct ValidationIssue {
    std::string message;
    int index = -1;  ///< offending delay/channel index, -1 when not applicable
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    [[nodiscard]] bool ok() const { return issues.empty(); }
};

/// Checks dimensions, variance signs, and invertibility of A (smallest
/// singular value > inv_tol * largest). Returns all violations; never throws.
ValidationReport validate_system(const MultiDelaySystem& sys, const ToleranceSet& tol = {});

/// Centers the arrival indicators: w_t^i = gamma_t^i - (1 - p_i) gives
/// B_{d_i} = (1-p_i) Bplant, C_{d_i} = Bplant, sigma2_{d_i} = p_i (1-p_i).
/// Throws DuplicateDelay when two paths share a delay.
MultiDelaySystem wncs_to_model(const WncsDescription& w);

enum class NoiseModel { gaussian, two_point, bernoulli_loss };

const char* to_string(NoiseModel model);

/// A full problem document: the plant (multi-delay, restricted, or both when
/// the restricted form embeds exactly), weights, initial data, and
/// simulation controls.
struct ProblemSpec {
    std::optional<MultiDelaySystem> system;
    std::optional<RestrictedSystem> restricted;
    Matrix Q;
    Matrix R;
    Vector x0;
    std::vector<Vector> u_init;  ///< u_{-1} .. u_{-D}
    int horizon = 100;
    int trials = 1000;
    std::uint64_t seed = 1;
    NoiseModel noise_model = NoiseModel::gaussian;
    std::optional<std::vector<double>> loss_prob;  ///< per-delay p_i when known
    ToleranceSet tol;

    /// The multi-delay form; throws Error when the document only carries a
    /// restricted system that does not embed (D = 0 with both channels).
    [[nodiscard]] const MultiDelaySystem& mds() const;
};

}  // namespace delayctl
