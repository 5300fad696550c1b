#include "delayctl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace delayctl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double sum_range(const std::vector<double>& values, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        double s = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            s += values[i];
        }
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return sum_range(values, lo, mid) + sum_range(values, mid, hi);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
    key_ = splitmix64(splitmix64(seed) ^ (0x6A09E667F3BCC909ULL + stream));
}

std::uint64_t CounterRng::word(long t, int tau, int k) const {
    std::uint64_t x = key_;
    x = splitmix64(x ^ static_cast<std::uint64_t>(t));
    x = splitmix64(x ^ (static_cast<std::uint64_t>(static_cast<unsigned>(tau)) << 32));
    x = splitmix64(x ^ static_cast<std::uint64_t>(static_cast<unsigned>(k)));
    return x;
}

double CounterRng::uniform(long t, int tau, int k) const {
    // 53 significant bits mapped into (0, 1].
    return (static_cast<double>(word(t, tau, k) >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal(long t, int tau) const {
    const double u1 = uniform(t, tau, 0);
    const double u2 = uniform(t, tau, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_noise(NoiseModel model, double sigma2, const CounterRng& rng, long t, int tau,
                    std::optional<double> loss_prob) {
    if (sigma2 < 0) {
        throw InvalidVariance("sample_noise: negative variance");
    }
    if (sigma2 == 0 && model != NoiseModel::bernoulli_loss) {
        return 0.0;
    }
    switch (model) {
        case NoiseModel::gaussian:
            return std::sqrt(sigma2) * rng.normal(t, tau);
        case NoiseModel::two_point:
            return (rng.word(t, tau, 0) & 1ULL) ? std::sqrt(sigma2) : -std::sqrt(sigma2);
        case NoiseModel::bernoulli_loss: {
            double p = 0;
            if (loss_prob) {
                p = *loss_prob;
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw InvalidVariance("sample_noise: loss probability outside [0, 1]");
                }
            } else {
                if (sigma2 > 0.25) {
                    throw InvalidVariance(
                        "sample_noise: sigma2 > 1/4 is not a Bernoulli variance and no loss "
                        "probability was given");
                }
                p = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * sigma2));
            }
            const double gamma = rng.uniform(t, tau, 0) <= p ? 0.0 : 1.0;
            return gamma - (1.0 - p);
        }
    }
    throw Error("sample_noise: unknown noise model");
}

NoisePath make_noise_path(const MultiDelaySystem& sys, NoiseModel model, std::uint64_t seed,
                          std::uint64_t stream, long t_begin, long t_end,
                          const std::optional<std::vector<double>>& loss_prob) {
    NoisePath path{NoiseRecord(sys.D + 1, t_begin, t_end), model, seed, stream};
    const CounterRng rng(seed, stream);
    for (int tau = 0; tau <= sys.D; ++tau) {
        std::optional<double> p;
        if (loss_prob && static_cast<std::size_t>(tau) < loss_prob->size() &&
            (*loss_prob)[static_cast<std::size_t>(tau)] >= 0) {
            p = (*loss_prob)[static_cast<std::size_t>(tau)];
        }
        for (long t = t_begin; t < t_end; ++t) {
            path.record.at(tau, t) =
                sample_noise(model, sys.sigma2[static_cast<std::size_t>(tau)], rng, t, tau, p);
        }
    }
    return path;
}

Vector step(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
            const std::vector<Vector>& u_window, const Eigen::Ref<const Vector>& omega) {
    if (static_cast<int>(u_window.size()) != sys.D + 1 || omega.size() != sys.D + 1 ||
        x.size() != sys.n) {
        throw DimensionMismatch("step: window lengths must be D+1 and x must be n");
    }
    Vector next = sys.A * x;
    for (int tau = 0; tau <= sys.D; ++tau) {
        const auto i = static_cast<std::size_t>(tau);
        next += (sys.B[i] + omega(tau) * sys.C[i]) * u_window[i];
    }
    return next;
}

SimulationResult simulate_closed_loop(const ProblemSpec& spec, const FeedbackLaw& law,
                                      const SimulationOptions& options) {
    const MultiDelaySystem& sys = spec.mds();
    if (law.delay() != sys.D) {
        throw DimensionMismatch("simulate_closed_loop: law delay must match the system");
    }
    if (spec.x0.size() != sys.n || static_cast<int>(spec.u_init.size()) != sys.D) {
        throw DimensionMismatch("simulate_closed_loop: initial data does not match the system");
    }
    if (spec.trials <= 0 || spec.horizon <= 0) {
        throw Error("simulate_closed_loop: trials and horizon must be positive");
    }

    const int T = spec.horizon;
    const int N = spec.trials;
    SimulationResult result;
    result.trials = N;
    result.horizon = T;
    result.seed = spec.seed;
    result.ms.assign(static_cast<std::size_t>(T) + 1, 0.0);
    result.input_ms.assign(static_cast<std::size_t>(T) + 1, 0.0);

    // Per-time accumulators: one entry per trial, reduced pairwise afterwards.
    std::vector<std::vector<double>> x_sq(static_cast<std::size_t>(T) + 1,
                                          std::vector<double>(static_cast<std::size_t>(N), 0.0));
    std::vector<std::vector<double>> u_sq(static_cast<std::size_t>(T) + 1,
                                          std::vector<double>(static_cast<std::size_t>(N), 0.0));
    std::vector<bool> aborted(static_cast<std::size_t>(N), false);

    for (int trial = 0; trial < N; ++trial) {
        const CounterRng rng(spec.seed, static_cast<std::uint64_t>(trial));
        Vector x = spec.x0;
        std::vector<Vector> u_hist = spec.u_init;  // u_{t-1} .. u_{t-D}
        Matrix traj;
        if (options.record_states) {
            traj.resize(sys.n, T + 1);
            traj.col(0) = x;
        }
        x_sq[0][static_cast<std::size_t>(trial)] = x.squaredNorm();
        for (int t = 0; t <= T; ++t) {
            Vector u = law.apply(x, u_hist);
            u_sq[static_cast<std::size_t>(t)][static_cast<std::size_t>(trial)] = u.squaredNorm();
            if (t == T) {
                break;
            }
            Vector omega(sys.D + 1);
            for (int tau = 0; tau <= sys.D; ++tau) {
                std::optional<double> p;
                if (spec.loss_prob &&
                    static_cast<std::size_t>(tau) < spec.loss_prob->size() &&
                    (*spec.loss_prob)[static_cast<std::size_t>(tau)] >= 0) {
                    p = (*spec.loss_prob)[static_cast<std::size_t>(tau)];
                }
                omega(tau) = sample_noise(spec.noise_model,
                                          sys.sigma2[static_cast<std::size_t>(tau)], rng, t, tau, p);
            }
            std::vector<Vector> window;
            window.reserve(static_cast<std::size_t>(sys.D) + 1);
            window.push_back(u);
            for (const Vector& uh : u_hist) {
                window.push_back(uh);
            }
            x = step(sys, x, window, omega);
            if (!x.allFinite()) {
                aborted[static_cast<std::size_t>(trial)] = true;
                ++result.aborted_trials;
                break;
            }
            if (sys.D > 0) {
                u_hist.insert(u_hist.begin(), u);
                u_hist.pop_back();
            }
            x_sq[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(trial)] =
                x.squaredNorm();
            if (options.record_states) {
                traj.col(t + 1) = x;
            }
        }
        if (options.record_states) {
            result.states.push_back(std::move(traj));
        }
    }

    // Aborted trials are excluded from the averages and reported.
    int included = 0;
    for (int trial = 0; trial < N; ++trial) {
        if (!aborted[static_cast<std::size_t>(trial)]) {
            ++included;
            continue;
        }
        for (int t = 0; t <= T; ++t) {
            x_sq[static_cast<std::size_t>(t)][static_cast<std::size_t>(trial)] = 0.0;
            u_sq[static_cast<std::size_t>(t)][static_cast<std::size_t>(trial)] = 0.0;
        }
    }
    const double denom = included > 0 ? static_cast<double>(included) : 1.0;
    for (int t = 0; t <= T; ++t) {
        result.ms[static_cast<std::size_t>(t)] =
            pairwise_sum(x_sq[static_cast<std::size_t>(t)]) / denom;
        result.input_ms[static_cast<std::size_t>(t)] =
            pairwise_sum(u_sq[static_cast<std::size_t>(t)]) / denom;
    }
    // The initial state is deterministic, so m_0 is exact by definition.
    if (included > 0) {
        result.ms[0] = spec.x0.squaredNorm();
    }
    return result;
}

const char* to_string(DecayVerdict verdict) {
    switch (verdict) {
        case DecayVerdict::decaying:
            return "decaying";
        case DecayVerdict::not_decaying:
            return "not_decaying";
        case DecayVerdict::decayed:
            return "decayed";
    }
    return "unknown";
}

DecayReport check_ms_decay(const std::vector<double>& ms, int window, double ratio) {
    if (ms.empty() || window <= 0 || static_cast<std::size_t>(window) >= ms.size()) {
        throw Error("check_ms_decay: window must be positive and shorter than the sequence");
    }
    DecayReport report;
    const double global_max = *std::max_element(ms.begin(), ms.end());
    if (global_max == 0.0) {
        report.verdict = DecayVerdict::decayed;
        return report;
    }
    const std::size_t tail_begin = ms.size() - static_cast<std::size_t>(window);
    const double tail_max = *std::max_element(ms.begin() + static_cast<long>(tail_begin), ms.end());
    report.tail_ratio = tail_max / global_max;
    report.verdict =
        report.tail_ratio <= ratio ? DecayVerdict::decaying : DecayVerdict::not_decaying;

    // Least-squares line on log m_t over the tail; zero entries are skipped.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (std::size_t i = tail_begin; i < ms.size(); ++i) {
        if (ms[i] <= 0.0) {
            continue;
        }
        const double xi = static_cast<double>(i);
        const double yi = std::log(ms[i]);
        sx += xi;
        sy += yi;
        sxx += xi * xi;
        sxy += xi * yi;
        ++count;
    }
    if (count >= 2) {
        const double det = count * sxx - sx * sx;
        if (det != 0.0) {
            report.fitted_rate = std::exp((count * sxy - sx * sy) / det);
        }
    }
    return report;
}

double pairwise_sum(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    return sum_range(values, 0, values.size());
}

}  // namespace delayctl
