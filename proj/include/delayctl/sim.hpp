#pragma once

// Seeded Monte Carlo engine for the original delayed closed loop. Noise draws
// come from counter-based streams keyed on (seed, trial, time, channel), so
// results are independent of trial execution order.

#include <cstdint>
#include <optional>
#include <vector>

#include "delayctl/model.hpp"
#include "delayctl/reduction.hpp"
#include "delayctl/types.hpp"

namespace delayctl {

/// Stateless generator: every draw is a pure function of the key tuple.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    /// k-th raw 64-bit word for (time t, channel tau).
    [[nodiscard]] std::uint64_t word(long t, int tau, int k) const;
    /// Uniform draw in (0, 1].
    [[nodiscard]] double uniform(long t, int tau, int k) const;
    /// Standard normal via Box-Muller on two counter words.
    [[nodiscard]] double normal(long t, int tau) const;

private:
    std::uint64_t key_ = 0;
};

/// Zero-mean draw with variance sigma2 under the chosen model. bernoulli_loss
/// recovers p from sigma2 = p (1-p) (smaller root) unless p is supplied;
/// sigma2 > 1/4 without p is InvalidVariance.
double sample_noise(NoiseModel model, double sigma2, const CounterRng& rng, long t, int tau,
                    std::optional<double> loss_prob = std::nullopt);

/// Realized noise table for one trial plus the metadata that reproduces it.
struct NoisePath {
    NoiseRecord record;
    NoiseModel model = NoiseModel::gaussian;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Materializes w_t^tau for tau in [0, D], t in [t_begin, t_end).
NoisePath make_noise_path(const MultiDelaySystem& sys, NoiseModel model, std::uint64_t seed,
                          std::uint64_t stream, long t_begin, long t_end,
                          const std::optional<std::vector<double>>& loss_prob = std::nullopt);

/// One step of the plant: x_{t+1} = A x_t + sum_tau (B_tau + w^tau C_tau) u_{t-tau}.
/// u_window is u_t .. u_{t-D} (current input first), omega holds w_t^0 .. w_t^D.
Vector step(const MultiDelaySystem& sys, const Eigen::Ref<const Vector>& x,
            const std::vector<Vector>& u_window, const Eigen::Ref<const Vector>& omega);

struct SimulationOptions {
    bool record_states = false;  ///< keep per-trial state trajectories
};

struct SimulationResult {
    int trials = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
    int aborted_trials = 0;         ///< trials dropped after a non-finite state
    std::vector<double> ms;         ///< length T+1, (1/N) sum ||x_t||^2
    std::vector<double> input_ms;   ///< length T+1, same for u_t
    std::vector<Matrix> states;     ///< per trial, n x (T+1), when recorded
};

/// Runs spec.trials independent trials of the closed loop under the law,
/// starting from (x0, u_init) with per-trial counter streams; accumulation is
/// pairwise over the trial index, so any execution order gives identical
/// sums. Trials that leave the representable range are dropped and counted.
SimulationResult simulate_closed_loop(const ProblemSpec& spec, const FeedbackLaw& law,
                                      const SimulationOptions& options = {});

enum class DecayVerdict { decaying, not_decaying, decayed };

const char* to_string(DecayVerdict verdict);

struct DecayReport {
    DecayVerdict verdict = DecayVerdict::not_decaying;
    double tail_ratio = 0;    ///< max over last window / max over all
    double fitted_rate = 0;   ///< exp of the least-squares slope of log m_t on the tail
};

/// Decaying when the max over the last `window` entries is at most
/// ratio times the global max; an all-zero sequence reports decayed.
DecayReport check_ms_decay(const std::vector<double>& ms, int window, double ratio);

/// Deterministic pairwise reduction over the index order.
double pairwise_sum(const std::vector<double>& values);

}  // namespace delayctl
