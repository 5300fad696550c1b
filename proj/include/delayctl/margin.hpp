#pragma once

// Delay margins for the restricted structure [A, C0; Bbar, Cbar]_D. Diagonal
// systems decouple into scalar subsystems with a closed-form margin; general
// restricted systems are scanned with the Riccati solver as the per-delay
// oracle, which is sound because stabilizability is monotone in the delay.

#include <optional>
#include <vector>

#include "delayctl/model.hpp"
#include "delayctl/types.hpp"

namespace delayctl {

/// Scalar restricted subsystem [a, c; bbar, cbar]_D.
struct ScalarSubsystem {
    double a = 0;
    double c = 0;
    double bbar = 0;
    double cbar = 0;
    double sigma0_2 = 0;
    double sigmaD_2 = 0;
};

/// Coefficients of the scalar fixed-point equation written as
/// c2 z^2 + c1 z + c0 = 0 for delay D and weights (q, r):
///   c   = bbar^2 + sigma0^2 c^2 a^{2D} + sigmaD^2 cbar^2 a^{2D}
///   c_0 = r + sum_{h=1}^{D} sigmaD^2 cbar^2 a^{2(D-h)} q
///   c2  = (a^2 - 1) c - a^2 bbar^2
///   c1  = (a^2 - 1) c_0 + q c
///   c0  = q c_0
struct QuadraticCoeffs {
    double c2 = 0;
    double c1 = 0;
    double c0 = 0;

    /// The unique positive root; exists exactly when c2 < 0.
    [[nodiscard]] std::optional<double> positive_root() const;
};

QuadraticCoeffs scalar_quadratic_coeffs(const ScalarSubsystem& s, double q, double r, int D);

/// Strict solvability condition, independent of (q, r):
/// a^{2D} (sigma0^2 c^2 + sigmaD^2 cbar^2) (a^2 - 1) < bbar^2.
bool scalar_stabilizable(const ScalarSubsystem& s, int D);

struct PerDelayEntry {
    int D = 0;
    bool stabilizable = false;
};

struct DelayMarginResult {
    /// Value of the closed-form margin; +infinity and 0 both occur.
    double d_max_real = 0;
    /// Largest integer delay that every subsystem tolerates; empty means no
    /// stabilizable delay exists, unbounded when the margin is infinite.
    std::optional<int> max_stable_int_delay;
    bool int_margin_unbounded = false;
    /// Subsystem attaining the minimum in the closed form, when finite.
    std::optional<int> binding_index;
    std::vector<PerDelayEntry> per_delay_table;
    bool cap_reached = false;          ///< search exhausted D_cap while stabilizable
    bool monotonicity_anomaly = false; ///< search saw success above a failure
};

/// Closed-form margin of a diagonal system from its scalar subsystems.
/// Stable subsystems (a^2 < 1) impose no constraint; unstable ones must have
/// bbar != 0 (throws AssumptionViolated otherwise).
DelayMarginResult diagonal_delay_margin(const std::vector<ScalarSubsystem>& subs);

/// Splits a diagonal restricted system into scalar subsystems; empty when the
/// system is not diagonal.
std::optional<std::vector<ScalarSubsystem>> diagonal_subsystems(const RestrictedSystem& sys,
                                                                double tol = 0.0);

struct MarginSearchOptions {
    int d_cap = 64;
    /// Keep probing past the first failure (anomaly audit); off by default
    /// since monotonicity makes the early exit correct.
    bool full_table = false;
};

/// Largest D <= d_cap at which the Riccati solve converges for the template
/// (its own D field is ignored; sigmaD_2 is held fixed as D varies). The D=0
/// probe failing yields an empty integer margin.
DelayMarginResult general_delay_margin_search(const RestrictedSystem& template_sys,
                                              const Eigen::Ref<const Matrix>& Q,
                                              const Eigen::Ref<const Matrix>& R,
                                              const MarginSearchOptions& options = {},
                                              const ToleranceSet& tol = {});

}  // namespace delayctl
