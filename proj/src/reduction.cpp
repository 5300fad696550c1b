#include "delayctl/reduction.hpp"

#include <sstream>

#include "delayctl/numerics.hpp"

namespace delayctl {

namespace {

void require_valid_shape(const MultiDelaySystem& sys, const char* where) {
    const auto want = static_cast<std::size_t>(sys.D) + 1;
    if (sys.D < 0 || sys.B.size() != want || sys.C.size() != want ||
        sys.A.rows() != sys.n || sys.A.cols() != sys.n) {
        throw DimensionMismatch(std::string(where) + ": malformed system");
    }
}

}  // namespace

Vector FeedbackLaw::apply(const Eigen::Ref<const Vector>& x,
                          const std::vector<Vector>& u_hist) const {
    if (K.empty()) {
        throw DimensionMismatch("FeedbackLaw: no gains");
    }
    if (static_cast<int>(u_hist.size()) != delay()) {
        throw HistoryLengthMismatch("FeedbackLaw::apply: history length must equal D");
    }
    Vector u = K[0] * x;
    for (std::size_t tau = 1; tau < K.size(); ++tau) {
        u += K[tau] * u_hist[tau - 1];
    }
    return u;
}

NoiseRecord::NoiseRecord(int channels, long t_begin, long t_end) : t0_(t_begin), t1_(t_end) {
    if (channels < 0 || t_end < t_begin) {
        throw Error("NoiseRecord: empty or negative shape");
    }
    values_.assign(static_cast<std::size_t>(channels),
                   std::vector<double>(static_cast<std::size_t>(t_end - t_begin), 0.0));
}

double NoiseRecord::at(int j, long s) const {
    if (j < 0 || j >= channels() || s < t0_ || s >= t1_) {
        std::ostringstream msg;
        msg << "NoiseRecord: no value for channel " << j << " at time " << s;
        throw MissingNoise(msg.str());
    }
    return values_[static_cast<std::size_t>(j)][static_cast<std::size_t>(s - t0_)];
}

double& NoiseRecord::at(int j, long s) {
    if (j < 0 || j >= channels() || s < t0_ || s >= t1_) {
        std::ostringstream msg;
        msg << "NoiseRecord: no value for channel " << j << " at time " << s;
        throw MissingNoise(msg.str());
    }
    return values_[static_cast<std::size_t>(j)][static_cast<std::size_t>(s - t0_)];
}

Matrix input_matrix_L(const MultiDelaySystem& sys) {
    require_valid_shape(sys, "input_matrix_L");
    PowerTable powers(sys.A);
    Matrix L = Matrix::Zero(sys.n, sys.m);
    for (int j = 0; j <= sys.D; ++j) {
        L += powers(sys.D - j) * sys.B[static_cast<std::size_t>(j)];
    }
    return L;
}

Matrix input_matrix_H(const MultiDelaySystem& sys, double inv_tol) {
    require_valid_shape(sys, "input_matrix_H");
    PowerTable powers(sys.A, inv_tol);
    Matrix H = sys.B[0];
    for (int j = 1; j <= sys.D; ++j) {
        H += powers(-j) * sys.B[static_cast<std::size_t>(j)];
    }
    return H;
}

std::vector<Matrix> predictor_coefficients(const MultiDelaySystem& sys, double inv_tol) {
    require_valid_shape(sys, "predictor_coefficients");
    PowerTable powers(sys.A, inv_tol);
    std::vector<Matrix> coeffs;
    coeffs.reserve(static_cast<std::size_t>(sys.D));
    for (int tau = 1; tau <= sys.D; ++tau) {
        Matrix c = Matrix::Zero(sys.n, sys.m);
        for (int j = tau; j <= sys.D; ++j) {
            c += powers(tau - j - 1) * sys.B[static_cast<std::size_t>(j)];
        }
        coeffs.push_back(std::move(c));
    }
    return coeffs;
}

Vector predictor(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
                 const std::vector<Vector>& u_hist) {
    if (static_cast<int>(u_hist.size()) != sys.D) {
        throw HistoryLengthMismatch("predictor: history length must equal D");
    }
    const std::vector<Matrix> coeffs = predictor_coefficients(sys);
    Vector eta = x;
    for (int tau = 1; tau <= sys.D; ++tau) {
        eta += coeffs[static_cast<std::size_t>(tau - 1)] * u_hist[static_cast<std::size_t>(tau - 1)];
    }
    return eta;
}

Vector eta_definition(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
                      const std::vector<Vector>& u_hist, const NoiseRecord& noise, long t) {
    if (static_cast<int>(u_hist.size()) != sys.D) {
        throw HistoryLengthMismatch("eta_definition: history length must equal D");
    }
    PowerTable powers(sys.A);
    Vector eta = x;
    for (int tau = 1; tau <= sys.D; ++tau) {
        for (int j = tau; j <= sys.D; ++j) {
            const double w = noise.at(j, t + j - tau);
            eta += powers(tau - j - 1) * (sys.B[static_cast<std::size_t>(j)] +
                                          w * sys.C[static_cast<std::size_t>(j)]) *
                   u_hist[static_cast<std::size_t>(tau - 1)];
        }
    }
    return eta;
}

Vector eta_recursion_step(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& eta,
                          const Eigen::Ref<const Vector>& u, const NoiseRecord& noise, long t) {
    if (eta.size() != sys.n || u.size() != sys.m) {
        throw DimensionMismatch("eta_recursion_step: vector dimensions do not match the system");
    }
    PowerTable powers(sys.A);
    Vector next = sys.A * eta;
    for (int j = 0; j <= sys.D; ++j) {
        const double w = noise.at(j, t + j);
        next += powers(-j) *
                (sys.B[static_cast<std::size_t>(j)] + w * sys.C[static_cast<std::size_t>(j)]) * u;
    }
    return next;
}

FeedbackLaw realize_controller(const MultiDelaySystem& sys, const AuxGain& gain) {
    if (gain.L0.rows() != sys.m || gain.L0.cols() != sys.n ||
        static_cast<int>(gain.Ltau.size()) != sys.D) {
        throw DimensionMismatch("realize_controller: gain dimensions do not match the system");
    }
    const std::vector<Matrix> coeffs = predictor_coefficients(sys);
    FeedbackLaw law;
    law.K.reserve(static_cast<std::size_t>(sys.D) + 1);
    law.K.push_back(gain.L0);
    for (int tau = 1; tau <= sys.D; ++tau) {
        law.K.push_back(gain.L0 * coeffs[static_cast<std::size_t>(tau - 1)] +
                        gain.Ltau[static_cast<std::size_t>(tau - 1)]);
    }
    return law;
}

}  // namespace delayctl
