#include "delayctl/margin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "delayctl/ddare.hpp"

namespace delayctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double noise_weight(const ScalarSubsystem& s) {
    return s.sigma0_2 * s.c * s.c + s.sigmaD_2 * s.cbar * s.cbar;
}

/// Margin of one subsystem: +inf for a^2 <= 1 or a noiseless channel,
/// 0 when a^2 >= h + 1 with h = bbar^2 / noise_weight.
double scalar_margin(const ScalarSubsystem& s) {
    const double a2 = s.a * s.a;
    if (a2 <= 1.0) {
        return kInf;
    }
    const double w = noise_weight(s);
    if (w == 0.0) {
        return kInf;
    }
    const double h = s.bbar * s.bbar / w;
    if (a2 >= h + 1.0) {
        return 0.0;
    }
    return (std::log(h) - std::log(a2 - 1.0)) / std::log(a2);
}

}  // namespace

std::optional<double> QuadraticCoeffs::positive_root() const {
    if (!(c2 < 0.0)) {
        return std::nullopt;
    }
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    return (-c1 - std::sqrt(disc)) / (2.0 * c2);
}

QuadraticCoeffs scalar_quadratic_coeffs(const ScalarSubsystem& s, double q, double r, int D) {
    const double a2 = s.a * s.a;
    const double a2D = std::pow(a2, D);
    const double c = s.bbar * s.bbar + s.sigma0_2 * s.c * s.c * a2D +
                     s.sigmaD_2 * s.cbar * s.cbar * a2D;
    double c_0 = r;
    for (int h = 1; h <= D; ++h) {
        c_0 += s.sigmaD_2 * s.cbar * s.cbar * std::pow(a2, D - h) * q;
    }
    QuadraticCoeffs out;
    out.c2 = (a2 - 1.0) * c - a2 * s.bbar * s.bbar;
    out.c1 = (a2 - 1.0) * c_0 + q * c;
    out.c0 = q * c_0;
    return out;
}

bool scalar_stabilizable(const ScalarSubsystem& s, int D) {
    const double a2 = s.a * s.a;
    return std::pow(a2, D) * noise_weight(s) * (a2 - 1.0) < s.bbar * s.bbar;
}

DelayMarginResult diagonal_delay_margin(const std::vector<ScalarSubsystem>& subs) {
    DelayMarginResult result;
    result.d_max_real = kInf;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        const ScalarSubsystem& s = subs[i];
        const double a2 = s.a * s.a;
        if (a2 >= 1.0 && s.bbar == 0.0) {
            throw AssumptionViolated("diagonal_delay_margin: unstable subsystem with bbar = 0");
        }
        const double margin = scalar_margin(s);
        if (margin < result.d_max_real) {
            result.d_max_real = margin;
            result.binding_index = static_cast<int>(i);
        }
    }

    if (std::isinf(result.d_max_real)) {
        result.int_margin_unbounded = true;
        return result;
    }

    // Integer margin by scanning the strict per-delay inequality; the scan is
    // the ground truth at exact-integer boundaries. Delays below the formula
    // value minus one are stabilizable by monotonicity, so huge margins only
    // need the boundary neighbourhood scanned.
    auto all_stabilizable = [&subs](int D) {
        return std::all_of(subs.begin(), subs.end(),
                           [D](const ScalarSubsystem& s) { return scalar_stabilizable(s, D); });
    };
    const double cap_value = std::ceil(result.d_max_real) + 2.0;
    const int scan_cap = static_cast<int>(std::min(cap_value, 1e9));
    const int scan_from =
        cap_value <= 4096.0 ? 0 : std::max(0, static_cast<int>(result.d_max_real) - 2);
    int last_ok = scan_from - 1;
    for (int D = scan_from; D <= scan_cap; ++D) {
        const bool ok = all_stabilizable(D);
        result.per_delay_table.push_back({D, ok});
        if (!ok) {
            break;
        }
        last_ok = D;
    }
    if (last_ok >= 0) {
        result.max_stable_int_delay = last_ok;
    }
    return result;
}

std::optional<std::vector<ScalarSubsystem>> diagonal_subsystems(const RestrictedSystem& sys,
                                                                double tol) {
    if (!sys.is_diagonal(tol)) {
        return std::nullopt;
    }
    std::vector<ScalarSubsystem> subs;
    subs.reserve(static_cast<std::size_t>(sys.n()));
    for (Index i = 0; i < sys.n(); ++i) {
        subs.push_back({sys.A(i, i), sys.C0(i, i), sys.Bbar(i, i), sys.Cbar(i, i), sys.sigma0_2,
                        sys.sigmaD_2});
    }
    return subs;
}

DelayMarginResult general_delay_margin_search(const RestrictedSystem& template_sys,
                                              const Eigen::Ref<const Matrix>& Q,
                                              const Eigen::Ref<const Matrix>& R,
                                              const MarginSearchOptions& options,
                                              const ToleranceSet& tol) {
    if (options.d_cap < 0) {
        throw Error("general_delay_margin_search: d_cap must be non-negative");
    }
    DelayMarginResult result;
    int last_ok = -1;
    int first_fail = -1;
    for (int D = 0; D <= options.d_cap; ++D) {
        RestrictedSystem probe = template_sys;
        probe.D = D;
        const bool ok = solve_ddare(probe, Q, R, tol).converged();
        result.per_delay_table.push_back({D, ok});
        if (ok) {
            last_ok = D;
            if (first_fail >= 0) {
                result.monotonicity_anomaly = true;
            }
        } else if (first_fail < 0) {
            first_fail = D;
            if (!options.full_table) {
                break;
            }
        }
    }
    if (last_ok >= 0) {
        result.max_stable_int_delay = last_ok;
    }
    result.d_max_real = last_ok >= 0 ? static_cast<double>(last_ok) : 0.0;
    if (first_fail < 0 && last_ok == options.d_cap) {
        result.cap_reached = true;
    }
    return result;
}

}  // namespace delayctl
