#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pixdiff/forward.hpp"
#include "pixdiff/grid.hpp"
#include "pixdiff/rng.hpp"
#include "pixdiff/schedule.hpp"

namespace pixdiff {

// Reverse-posterior parameters q(x_{i-1} | x_i, x0) = N(mu, beta_tilde).
struct PosteriorParams {
    Grid mu;
    Grid beta_tilde;
    bool guard_hit = false;  // a (1 - alpha_bar) denominator was floored
};

namespace detail {

// Scalar cores. Tests mirror these expressions term by term, so keep the
// operation order stable.
inline double posterior_mu_from_x0(double x0, double x, double alpha, double abar_prev,
                                   double abar_i, bool& guard) {
    double denom = 1.0 - abar_i;
    if (denom < kDenomFloor) {
        denom = kDenomFloor;
        guard = true;
    }
    const double beta = 1.0 - alpha;
    return std::sqrt(abar_prev) * beta / denom * x0 +
           std::sqrt(alpha) * (1.0 - abar_prev) / denom * x;
}

inline double posterior_mu_from_noise(double x, double eps, double alpha, double abar_i,
                                      bool& guard) {
    double denom = 1.0 - abar_i;
    if (denom < kDenomFloor) {
        denom = kDenomFloor;
        guard = true;
    }
    return (x - (1.0 - alpha) / std::sqrt(denom) * eps) / std::sqrt(alpha);
}

inline void check_posterior_args(const Grid& x_i, const ScheduleTable& tab, int i,
                                 const char* who) {
    require(i >= 1 && i <= tab.total_steps, std::string(who) + ": step out of [1, total_steps]");
    require_same_shape(x_i, tab.alpha, who);
}

}  // namespace detail

// Posterior mean parameterized by the clean image:
// mu = sqrt(abar_{i-1}) beta_i / (1 - abar_i) * x0
//    + sqrt(alpha_i) (1 - abar_{i-1}) / (1 - abar_i) * x_i.
inline PosteriorParams posterior_from_x0(const Image& x0, const Grid& x_i,
                                         const ScheduleTable& tab, int i) {
    detail::check_posterior_args(x_i, tab, i, "posterior_from_x0");
    require_same_shape(x0, x_i, "posterior_from_x0");
    PosteriorParams p;
    p.mu = Grid(x_i.shape);
    p.beta_tilde = tab.beta_tilde[static_cast<std::size_t>(i)];
    const Grid& abar_prev = tab.alpha_bar[static_cast<std::size_t>(i) - 1];
    const Grid& abar_i = tab.alpha_bar[static_cast<std::size_t>(i)];
    for (std::size_t q = 0; q < x_i.size(); ++q)
        p.mu[q] = detail::posterior_mu_from_x0(x0[q], x_i[q], tab.alpha[q], abar_prev[q],
                                               abar_i[q], p.guard_hit);
    return p;
}

// Posterior mean parameterized by the composite noise:
// mu = (x_i - (1 - alpha_i) / sqrt(1 - abar_i) * eps_tilde) / sqrt(alpha_i).
// Algebraically identical to posterior_from_x0 when eps_tilde is the true
// composite noise; kept as an independent computation path.
inline PosteriorParams posterior_from_noise(const Grid& x_i, const Grid& eps_tilde,
                                            const ScheduleTable& tab, int i) {
    detail::check_posterior_args(x_i, tab, i, "posterior_from_noise");
    require_same_shape(x_i, eps_tilde, "posterior_from_noise");
    PosteriorParams p;
    p.mu = Grid(x_i.shape);
    p.beta_tilde = tab.beta_tilde[static_cast<std::size_t>(i)];
    const Grid& abar_i = tab.alpha_bar[static_cast<std::size_t>(i)];
    for (std::size_t q = 0; q < x_i.size(); ++q)
        p.mu[q] = detail::posterior_mu_from_noise(x_i[q], eps_tilde[q], tab.alpha[q], abar_i[q],
                                                  p.guard_hit);
    return p;
}

// One reverse transition: x_{i-1} = mu + noise_scale * sqrt(beta_tilde) .* z.
// The draw is skipped entirely (keeping RNG streams aligned with reference
// implementations) when it could not change the output: noise_scale == 0 or
// beta_tilde identically zero, as at the final step where beta_tilde_1 = 0.
inline Grid reverse_step(const PosteriorParams& p, RngStream& rng, double noise_scale = 1.0) {
    require(noise_scale >= 0.0, "reverse_step: noise_scale must be >= 0");
    require_same_shape(p.mu, p.beta_tilde, "reverse_step");
    bool any_variance = false;
    for (double bt : p.beta_tilde.v)
        if (bt > 0.0) {
            any_variance = true;
            break;
        }
    Grid out = p.mu;
    if (noise_scale > 0.0 && any_variance) {
        Grid z(p.mu.shape);
        rng.fill_normal(z);
        for (std::size_t q = 0; q < out.size(); ++q)
            out[q] += noise_scale * std::sqrt(p.beta_tilde[q]) * z[q];
    }
    return out;
}

// One-shot reconstruction from a noise estimate at step i:
// x0_hat = (x_i - sqrt(1 - abar_i) .* eps_tilde) / sqrt(abar_i).
// The 1/sqrt(abar_i) factor amplifies estimate error enormously at late
// steps; the stepwise reverse loop exists precisely to avoid this.
inline Grid recover_x0(const Grid& x_i, const Grid& eps_tilde, const Grid& abar_i) {
    require_same_shape(x_i, eps_tilde, "recover_x0");
    require_same_shape(x_i, abar_i, "recover_x0");
    Grid out(x_i.shape);
    for (std::size_t q = 0; q < x_i.size(); ++q) {
        require(abar_i[q] > 0.0, "recover_x0: alpha_bar must be positive");
        out[q] = (x_i[q] - std::sqrt(1.0 - abar_i[q]) * eps_tilde[q]) / std::sqrt(abar_i[q]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Oracle reverse trajectories: run the reverse chain from a state at step i
// using ground-truth information, via either posterior parameterization.
// With the clean-image route the mean is a contraction toward x0 and the
// final transition reproduces x0 exactly (its x_i coefficient vanishes at
// i = 1); the noise route recomputes the true composite noise of the current
// state at every step.

enum class OracleRoute { from_x0, from_noise };

struct ReverseTrajectory {
    std::vector<int> steps;    // recorded step indices, descending to 0
    std::vector<Grid> states;  // parallel to steps when recording
    Grid final_state;
    bool guard_hit = false;
};

inline ReverseTrajectory oracle_reverse_trajectory(const Image& x0, const Grid& x_i, int i,
                                                   const ScheduleTable& tab, OracleRoute route,
                                                   RngStream& rng, double noise_scale = 1.0,
                                                   bool record_states = false) {
    detail::check_posterior_args(x_i, tab, i, "oracle_reverse_trajectory");
    require_same_shape(x0, x_i, "oracle_reverse_trajectory");
    ReverseTrajectory traj;
    auto record = [&](int j, const Grid& x) {
        traj.steps.push_back(j);
        if (record_states) traj.states.push_back(x);
    };
    Grid x = x_i;
    record(i, x);
    for (int j = i; j >= 1; --j) {
        PosteriorParams p;
        if (route == OracleRoute::from_x0) {
            p = posterior_from_x0(x0, x, tab, j);
        } else {
            const Grid eps =
                composite_noise(x, x0, tab.alpha_bar[static_cast<std::size_t>(j)]);
            p = posterior_from_noise(x, eps, tab, j);
        }
        traj.guard_hit = traj.guard_hit || p.guard_hit;
        x = reverse_step(p, rng, noise_scale);
        record(j - 1, x);
    }
    traj.final_state = std::move(x);
    return traj;
}

// Conditional-mean noise bundle: the best prediction of the composite noise
// at step j given the state at step i is rho_j * eps_tilde_i with
// rho_j = sqrt(abar_i (1 - abar_j) / (abar_j (1 - abar_i))). Feeding this
// bundle into the one-shot loop below with noise_scale 0 telescopes exactly
// back to x0.
inline std::vector<Grid> oracle_noise_bundle(const Grid& x_i, const Image& x0,
                                             const ScheduleTable& tab, int i) {
    detail::check_posterior_args(x_i, tab, i, "oracle_noise_bundle");
    require_same_shape(x0, x_i, "oracle_noise_bundle");
    const Grid& abar_i = tab.alpha_bar[static_cast<std::size_t>(i)];
    const Grid eps_i = composite_noise(x_i, x0, abar_i);
    std::vector<Grid> bundle(static_cast<std::size_t>(i) + 1, Grid(x_i.shape));
    for (int j = 1; j <= i; ++j) {
        const Grid& abar_j = tab.alpha_bar[static_cast<std::size_t>(j)];
        Grid& z = bundle[static_cast<std::size_t>(j)];
        for (std::size_t q = 0; q < x_i.size(); ++q) {
            const double denom =
                std::max(abar_j[q] * (1.0 - abar_i[q]), kDenomFloor);
            const double rho = std::sqrt(abar_i[q] * (1.0 - abar_j[q]) / denom);
            z[q] = rho * eps_i[q];
        }
    }
    return bundle;
}

// Best achievable mean-squared error when predicting the step-j composite
// noise from the step-i state alone: 1 - rho_j^2 per pixel, with rho_j as in
// oracle_noise_bundle. Learned predictors are benchmarked against this floor.
inline Grid ideal_head_mse(const ScheduleTable& tab, int i, int j) {
    require(i >= 1 && i <= tab.total_steps, "ideal_head_mse: i out of [1, total_steps]");
    require(j >= 1 && j <= i, "ideal_head_mse: need 1 <= j <= i");
    const Grid& abar_i = tab.alpha_bar[static_cast<std::size_t>(i)];
    const Grid& abar_j = tab.alpha_bar[static_cast<std::size_t>(j)];
    Grid out(tab.alpha.shape);
    for (std::size_t q = 0; q < out.size(); ++q) {
        const double denom = std::max(abar_j[q] * (1.0 - abar_i[q]), kDenomFloor);
        out[q] = 1.0 - abar_i[q] * (1.0 - abar_j[q]) / denom;
    }
    return out;
}

// ---------------------------------------------------------------------------
// One-shot sampling loop: estimate the image scale once, predict the
// composite noise for every remaining step in a single call, then walk the
// reverse chain with those fixed predictions.

// Returns the estimated per-pixel scale in (0,1) for the given state.
using ScaleFn = std::function<Grid(const Grid& x_i)>;

// Returns predicted composite noise for steps j = 1..i (index j; slot 0
// unused), from the state, the scale estimate, and the step index.
using NoiseBundleFn = std::function<std::vector<Grid>(const Grid& x_i, const Grid& scale, int i)>;

struct SamplingOptions {
    double noise_scale = 1.0;   // 0 disables the stochastic term (and its draws)
    bool record_states = false;
};

struct SamplingResult {
    Grid final_state;
    Grid scale_estimate;
    std::vector<int> steps;
    std::vector<Grid> states;
    int predictor_invocations = 0;  // noise-bundle calls (1 by construction)
    bool guard_hit = false;
};

inline SamplingResult run_sampling_algorithm(const Grid& x_i, int i, int total_steps,
                                             const ScaleFn& scale_fn,
                                             const NoiseBundleFn& noise_fn, RngStream& rng,
                                             const SamplingOptions& opt = {}) {
    require(i >= 1 && i <= total_steps, "run_sampling_algorithm: step out of [1, total_steps]");
    SamplingResult res;
    res.scale_estimate = scale_fn(x_i);
    require_same_shape(res.scale_estimate, x_i, "run_sampling_algorithm");
    const ScheduleTable tab = schedule_from_scale(res.scale_estimate, total_steps);
    std::vector<Grid> bundle = noise_fn(x_i, res.scale_estimate, i);
    res.predictor_invocations = 1;
    require(bundle.size() == static_cast<std::size_t>(i) + 1,
            "run_sampling_algorithm: noise bundle must cover steps 1..i");
    auto record = [&](int j, const Grid& x) {
        res.steps.push_back(j);
        if (opt.record_states) res.states.push_back(x);
    };
    Grid x = x_i;
    record(i, x);
    for (int j = i; j >= 1; --j) {
        PosteriorParams p =
            posterior_from_noise(x, bundle[static_cast<std::size_t>(j)], tab, j);
        res.guard_hit = res.guard_hit || p.guard_hit;
        x = reverse_step(p, rng, opt.noise_scale);
        record(j - 1, x);
    }
    res.final_state = std::move(x);
    return res;
}

// Oracle callables for the loop above (ground truth supplied from outside).
inline ScaleFn make_oracle_scale_fn(const Image& x0, double gamma) {
    return [x0, gamma](const Grid&) { return image_scale(x0, gamma); };
}

inline NoiseBundleFn make_oracle_noise_fn(const Image& x0, int total_steps) {
    return [x0, total_steps](const Grid& x_i, const Grid& scale, int i) {
        const ScheduleTable tab = schedule_from_scale(scale, total_steps);
        return oracle_noise_bundle(x_i, x0, tab, i);
    };
}

}  // namespace pixdiff
