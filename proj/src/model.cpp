#include "delayctl/model.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <set>
#include <sstream>

#include "delayctl/numerics.hpp"

namespace delayctl {

MultiDelaySystem RestrictedSystem::to_multi_delay() const {
    const Index nn = n();
    const Index mm = m();
    if (A.rows() != A.cols() || C0.rows() != nn || C0.cols() != mm || Cbar.rows() != nn ||
        Cbar.cols() != mm || Bbar.rows() != nn) {
        throw DimensionMismatch("RestrictedSystem: inconsistent dimensions");
    }
    MultiDelaySystem sys;
    sys.n = nn;
    sys.m = mm;
    sys.D = D;
    sys.A = A;
    sys.B.assign(static_cast<std::size_t>(D) + 1, Matrix::Zero(nn, mm));
    sys.C.assign(static_cast<std::size_t>(D) + 1, Matrix::Zero(nn, mm));
    sys.sigma2.assign(static_cast<std::size_t>(D) + 1, 0.0);
    sys.B.back() = Bbar;
    if (D == 0) {
        const bool c0_active = sigma0_2 > 0 && !C0.isZero(0.0);
        const bool cD_active = sigmaD_2 > 0 && !Cbar.isZero(0.0);
        if (c0_active && cD_active) {
            throw DuplicateDelay(
                "restricted system with D = 0 carries two active noise channels at delay 0; "
                "the multi-delay form admits one noise per delay");
        }
        if (cD_active) {
            sys.C[0] = Cbar;
            sys.sigma2[0] = sigmaD_2;
        } else {
            sys.C[0] = C0;
            sys.sigma2[0] = sigma0_2;
        }
        return sys;
    }
    sys.C.front() = C0;
    sys.sigma2.front() = sigma0_2;
    sys.C.back() = Cbar;
    sys.sigma2.back() = sigmaD_2;
    return sys;
}

bool RestrictedSystem::is_diagonal(double tol) const {
    if (A.rows() != A.cols() || n() != m()) {
        return false;
    }
    auto diag = [tol](const Matrix& M) {
        return (M - Matrix(M.diagonal().asDiagonal())).cwiseAbs().maxCoeff() <= tol;
    };
    return diag(A) && diag(C0) && diag(Bbar) && diag(Cbar);
}

ValidationReport validate_system(const MultiDelaySystem& sys, const ToleranceSet& tol) {
    ValidationReport report;
    auto add = [&report](std::string msg, int index = -1) {
        report.issues.push_back({std::move(msg), index});
    };

    if (sys.n <= 0 || sys.m <= 0) {
        add("state and input dimensions must be positive");
        return report;
    }
    if (sys.D < 0) {
        add("maximum delay must be non-negative");
        return report;
    }
    if (sys.A.rows() != sys.n || sys.A.cols() != sys.n) {
        add("A must be n x n");
    }
    const auto want = static_cast<std::size_t>(sys.D) + 1;
    if (sys.B.size() != want) {
        add("B length must be D+1");
    }
    if (sys.C.size() != want) {
        add("C length must be D+1");
    }
    if (sys.sigma2.size() != want) {
        add("sigma2 length must be D+1");
    }
    for (std::size_t tau = 0; tau < sys.B.size(); ++tau) {
        if (sys.B[tau].rows() != sys.n || sys.B[tau].cols() != sys.m) {
            add("B must be n x m", static_cast<int>(tau));
        }
    }
    for (std::size_t tau = 0; tau < sys.C.size(); ++tau) {
        if (sys.C[tau].rows() != sys.n || sys.C[tau].cols() != sys.m) {
            add("C must be n x m", static_cast<int>(tau));
        }
    }
    for (std::size_t tau = 0; tau < sys.sigma2.size(); ++tau) {
        if (!(sys.sigma2[tau] >= 0.0)) {
            add("negative variance", static_cast<int>(tau));
        }
    }
    if (!sys.A.allFinite()) {
        add("A has non-finite entries");
    } else if (sys.A.rows() == sys.n && sys.A.cols() == sys.n) {
        Eigen::JacobiSVD<Matrix> svd(sys.A);
        const auto& sv = svd.singularValues();
        if (sv.size() == 0 || !(sv(sv.size() - 1) > tol.inv_tol * sv(0))) {
            add("A not invertible");
        }
    }
    return report;
}

MultiDelaySystem wncs_to_model(const WncsDescription& w) {
    if (w.A.rows() != w.A.cols() || w.Bplant.rows() != w.A.rows()) {
        throw DimensionMismatch("wncs_to_model: A must be square and Bplant must have n rows");
    }
    std::set<int> seen;
    int max_delay = 0;
    for (const WncsPath& path : w.paths) {
        if (path.delay < 0) {
            throw Error("wncs_to_model: path delay must be non-negative");
        }
        if (!(path.loss_prob >= 0.0 && path.loss_prob <= 1.0)) {
            throw Error("wncs_to_model: loss probability must lie in [0, 1]");
        }
        if (!seen.insert(path.delay).second) {
            std::ostringstream msg;
            msg << "wncs_to_model: two paths share delay " << path.delay;
            throw DuplicateDelay(msg.str());
        }
        max_delay = std::max(max_delay, path.delay);
    }

    MultiDelaySystem sys;
    sys.n = w.A.rows();
    sys.m = w.Bplant.cols();
    sys.D = w.paths.empty() ? 0 : max_delay;
    sys.A = w.A;
    const auto slots = static_cast<std::size_t>(sys.D) + 1;
    sys.B.assign(slots, Matrix::Zero(sys.n, sys.m));
    sys.C.assign(slots, Matrix::Zero(sys.n, sys.m));
    sys.sigma2.assign(slots, 0.0);
    for (const WncsPath& path : w.paths) {
        const double p = path.loss_prob;
        const auto tau = static_cast<std::size_t>(path.delay);
        sys.B[tau] = (1.0 - p) * w.Bplant;
        sys.C[tau] = w.Bplant;
        sys.sigma2[tau] = p * (1.0 - p);
    }
    return sys;
}

const char* to_string(NoiseModel model) {
    switch (model) {
        case NoiseModel::gaussian:
            return "gaussian";
        case NoiseModel::two_point:
            return "two_point";
        case NoiseModel::bernoulli_loss:
            return "bernoulli_loss";
    }
    return "unknown";
}

const MultiDelaySystem& ProblemSpec::mds() const {
    if (!system) {
        throw Error(
            "problem document carries no multi-delay system (a D = 0 restricted system with two "
            "active noise channels does not embed); use the restricted-system operations");
    }
    return *system;
}

}  // namespace delayctl
