#pragma once
// Firing-rate dynamics for one neural layer, integrated as a stochastic
// differential equation with explicit Euler-Maruyama stepping:
//
//   x' = x + (dt/tau) * (-x + S(drive)) + noise_amplitude * sqrt(dt) * z
//
// with z a standard normal draw per neuron per step, and rates clamped at 0
// from below after each step. With noise_amplitude = 0 trajectories are
// bit-reproducible and converge to the fixed point S(drive) under constant
// drive.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mothnet/rng.hpp"

namespace mothnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct SdeParams {
    double tau = 1.0;              // time constant, simulation units
    double dt = 0.05;              // integration step
    double noise_amplitude = 0.0;  // Wiener increment scale per neuron

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("SdeParams: tau must be > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("SdeParams: dt must be > 0");
        if (!(dt < tau)) throw std::invalid_argument("SdeParams: dt must be < tau");
        if (!(noise_amplitude >= 0.0))
            throw std::invalid_argument("SdeParams: noise_amplitude must be >= 0");
    }
};

struct SigmoidParams {
    double max_rate = 1.0;  // saturation firing rate
    double slope = 1.0;     // gain
    double offset = 0.0;    // half-activation input

    void validate() const {
        if (!(max_rate > 0.0)) throw std::invalid_argument("SigmoidParams: max_rate must be > 0");
        if (!(slope > 0.0)) throw std::invalid_argument("SigmoidParams: slope must be > 0");
        if (!std::isfinite(offset)) throw std::invalid_argument("SigmoidParams: offset must be finite");
    }
};

struct LayerState {
    Vector rates;  // per-neuron firing rates, finite and >= 0

    LayerState() = default;
    explicit LayerState(Vector r) : rates(std::move(r)) {}
    static LayerState zeros(Eigen::Index n) { return LayerState(Vector::Zero(n)); }
    Eigen::Index size() const { return rates.size(); }
};

/* Logistic response: max_rate / (1 + exp(-slope * (input - offset))).
 * Monotone nondecreasing, bounded in [0, max_rate], saturates for extreme
 * inputs. */
inline double sigmoid(double input, const SigmoidParams& p) {
    return p.max_rate / (1.0 + std::exp(-p.slope * (input - p.offset)));
}

inline Vector sigmoid(const Vector& input, const SigmoidParams& p) {
    return input.unaryExpr([&](double x) { return sigmoid(x, p); });
}

/* One Euler-Maruyama step. Throws on dimension mismatch or non-finite drive. */
inline LayerState euler_maruyama_step(const LayerState& state, const Vector& drive,
                                      const SdeParams& sde, const SigmoidParams& sig,
                                      Rng& rng) {
    if (drive.size() != state.size())
        throw std::invalid_argument("euler_maruyama_step: drive length != state length");
    if (!drive.allFinite())
        throw std::runtime_error("euler_maruyama_step: non-finite drive entry");

    const double a = sde.dt / sde.tau;
    const double nscale = sde.noise_amplitude * std::sqrt(sde.dt);
    LayerState out;
    out.rates.resize(state.size());
    for (Eigen::Index i = 0; i < state.size(); i++) {
        double x = state.rates[i];
        double next = x + a * (-x + sigmoid(drive[i], sig));
        if (nscale > 0.0) next += nscale * rng.normal();
        out.rates[i] = next < 0.0 ? 0.0 : next;  // rates are non-negative
    }
    return out;
}

/* Integrate for a fixed duration under a time-dependent external drive.
 * Returns floor(duration/dt) + 1 states, the first equal to `initial`. */
inline std::vector<LayerState> simulate_window(const LayerState& initial,
                                               const std::function<Vector(double)>& drive_fn,
                                               double duration, const SdeParams& sde,
                                               const SigmoidParams& sig, Rng& rng) {
    sde.validate();
    sig.validate();
    if (!(duration >= sde.dt))
        throw std::invalid_argument("simulate_window: duration must be >= dt");

    const auto n_steps = static_cast<std::size_t>(std::floor(duration / sde.dt));
    std::vector<LayerState> traj;
    traj.reserve(n_steps + 1);
    traj.push_back(initial);
    for (std::size_t k = 0; k < n_steps; k++) {
        double t = static_cast<double>(k) * sde.dt;
        traj.push_back(euler_maruyama_step(traj.back(), drive_fn(t), sde, sig, rng));
    }
    return traj;
}

}  // namespace mothnet
