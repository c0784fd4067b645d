#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pixdiff/csv.hpp"
#include "pixdiff/grid.hpp"
#include "pixdiff/rng.hpp"
#include "pixdiff/schedule.hpp"

namespace pixdiff {

namespace detail {
inline void require_retention(const Grid& alpha, const char* who) {
    for (double a : alpha.v)
        require(a > 0.0 && a <= 1.0, std::string(who) + ": retention values must lie in (0,1]");
}
}  // namespace detail

// One diffusion step: x' = sqrt(alpha) .* x + sqrt(1 - alpha) .* eps.
inline Grid forward_step(const Grid& x, const Grid& alpha, const Grid& eps) {
    require_same_shape(x, alpha, "forward_step");
    require_same_shape(x, eps, "forward_step");
    detail::require_retention(alpha, "forward_step");
    Grid out(x.shape);
    for (std::size_t p = 0; p < x.size(); ++p)
        out[p] = std::sqrt(alpha[p]) * x[p] + std::sqrt(1.0 - alpha[p]) * eps[p];
    return out;
}

inline Grid forward_step(const Grid& x, const Grid& alpha, RngStream& rng) {
    return forward_step(x, alpha, sample_standard_normal(x.shape, rng));
}

// Pixel-independent retention (conventional schedules).
inline Grid forward_step(const Grid& x, double alpha, const Grid& eps) {
    require(alpha > 0.0 && alpha <= 1.0, "forward_step: alpha must lie in (0,1]");
    require_same_shape(x, eps, "forward_step");
    Grid out(x.shape);
    const double sa = std::sqrt(alpha);
    const double sb = std::sqrt(1.0 - alpha);
    for (std::size_t p = 0; p < x.size(); ++p) out[p] = sa * x[p] + sb * eps[p];
    return out;
}

// Closed-form jump to step i: x_i = sqrt(abar) .* x0 + sqrt(1 - abar) .* eps.
inline Grid forward_jump(const Image& x0, const Grid& abar, const Grid& eps) {
    require_same_shape(x0, abar, "forward_jump");
    require_same_shape(x0, eps, "forward_jump");
    detail::require_retention(abar, "forward_jump");
    Grid out(x0.shape);
    for (std::size_t p = 0; p < x0.size(); ++p)
        out[p] = std::sqrt(abar[p]) * x0[p] + std::sqrt(1.0 - abar[p]) * eps[p];
    return out;
}

inline Grid forward_jump(const Image& x0, const Grid& abar, RngStream& rng) {
    return forward_jump(x0, abar, sample_standard_normal(x0.shape, rng));
}

// Composite noise implied by a state at step i:
// eps_tilde = (x_i - sqrt(abar) .* x0) / sqrt(1 - abar).
// The denominator is floored like the posterior denominators, so passing a
// step-0 state returns zeros scaled enormously -- callers use i >= 1.
inline Grid composite_noise(const Grid& x_i, const Image& x0, const Grid& abar) {
    require_same_shape(x_i, x0, "composite_noise");
    require_same_shape(x_i, abar, "composite_noise");
    Grid out(x_i.shape);
    for (std::size_t p = 0; p < x_i.size(); ++p) {
        const double denom = std::sqrt(std::max(1.0 - abar[p], kDenomFloor));
        out[p] = (x_i[p] - std::sqrt(abar[p]) * x0[p]) / denom;
    }
    return out;
}

// Pixel-ensemble statistics of a chain state at one recorded step, together
// with their exact expectations under the jump law
// x_i = sqrt(abar) x0 + sqrt(1-abar) eps.
struct StepStats {
    int step = 0;
    double mean_raw = 0.0;     // mean of x_i over pixels
    double var_raw = 0.0;      // population variance of x_i over pixels
    double mean_resid = 0.0;   // mean of implied composite noise (0 at step 0)
    double var_resid = 0.0;    // variance of implied composite noise (0 at step 0)
    double theory_mean = 0.0;  // E[mean_raw] = mean of sqrt(abar) x0
    double theory_var = 0.0;   // approx E[var_raw] = mean(1-abar) + var(sqrt(abar) x0)
};

struct TrajectoryReport {
    std::vector<StepStats> rows;
};

struct ForwardOptions {
    int record_stride = 1;      // record stats every k-th step; 0 and final always
    bool record_states = true;  // keep the full grid at each recorded step
};

struct ForwardTrajectory {
    std::vector<int> steps;    // recorded step indices
    std::vector<Grid> states;  // parallel to steps when record_states is set
    Grid final_state;          // x at the last simulated step
    TrajectoryReport report;
};

namespace detail {

// abar_of(i) fills the cumulative retention grid for step i.
template <typename AbarFn>
StepStats step_stats(int i, const Grid& x, const Image& x0, AbarFn&& abar_of) {
    StepStats st;
    st.step = i;
    st.mean_raw = x.mean();
    st.var_raw = x.variance();
    const Grid abar = abar_of(i);
    Grid signal(x.shape);
    double sum_noise_var = 0.0;
    for (std::size_t p = 0; p < x.size(); ++p) {
        signal[p] = std::sqrt(abar[p]) * x0[p];
        sum_noise_var += 1.0 - abar[p];
    }
    st.theory_mean = signal.mean();
    st.theory_var = sum_noise_var / static_cast<double>(x.size()) + signal.variance();
    if (i >= 1) {
        const Grid resid = composite_noise(x, x0, abar);
        st.mean_resid = resid.mean();
        st.var_resid = resid.variance();
    }
    return st;
}

// Shared chain engine. alpha_of(i) yields the per-step retention grid for
// step i (1-based); abar_of(i) the cumulative retention after i steps.
template <typename AlphaFn, typename AbarFn>
ForwardTrajectory run_chain(const Image& x0, int n_steps, AlphaFn&& alpha_of, AbarFn&& abar_of,
                            RngStream& rng, const ForwardOptions& opt) {
    require(n_steps >= 1, "simulate_chain: need at least one step");
    require(opt.record_stride >= 1, "simulate_chain: record_stride must be >= 1");
    ForwardTrajectory traj;
    auto record = [&](int i, const Grid& x) {
        traj.steps.push_back(i);
        if (opt.record_states) traj.states.push_back(x);
        traj.report.rows.push_back(step_stats(i, x, x0, abar_of));
    };
    Grid x = x0;
    record(0, x);
    Grid eps(x0.shape);
    for (int i = 1; i <= n_steps; ++i) {
        rng.fill_normal(eps);
        x = forward_step(x, alpha_of(i), eps);
        if (i % opt.record_stride == 0 || i == n_steps) record(i, x);
    }
    traj.final_state = std::move(x);
    return traj;
}

}  // namespace detail

// Chain under a per-pixel schedule (retention constant across steps).
inline ForwardTrajectory simulate_chain(const PixelSchedule& s, int n_steps, RngStream& rng,
                                        const ForwardOptions& opt = {}) {
    require(n_steps >= 1 && n_steps <= s.config.total_steps,
            "simulate_chain: n_steps out of [1, total_steps]");
    return detail::run_chain(
        s.x0, n_steps, [&](int) -> const Grid& { return s.alpha; },
        [&](int i) { return alpha_bar(s, i); }, rng, opt);
}

// Chain under a pixel-independent linear baseline.
inline ForwardTrajectory simulate_chain(const Image& x0, const BaselineSchedule& s, int n_steps,
                                        RngStream& rng, const ForwardOptions& opt = {}) {
    require_normalized(x0, "simulate_chain");
    require(n_steps >= 1 && n_steps <= s.config.total_steps,
            "simulate_chain: n_steps out of [1, total_steps]");
    Grid alpha(x0.shape);
    return detail::run_chain(
        x0, n_steps,
        [&](int i) -> const Grid& {
            alpha.fill(s.alpha_at(i));
            return alpha;
        },
        [&](int i) {
            Grid abar(x0.shape);
            abar.fill(s.alpha_bar_at(i));
            return abar;
        },
        rng, opt);
}

// Recorded-step statistics averaged over independent chains (useful for small
// grids where a single pixel ensemble is noisy). Run r uses rng.substream(r).
template <typename SimulateFn>
TrajectoryReport ensemble_report(int n_runs, RngStream& rng, SimulateFn&& simulate_one) {
    require(n_runs >= 1, "ensemble_report: need at least one run");
    TrajectoryReport acc;
    for (int r = 0; r < n_runs; ++r) {
        RngStream sub = rng.substream(static_cast<std::uint64_t>(r));
        TrajectoryReport rep = simulate_one(sub);
        if (r == 0) {
            acc = rep;
        } else {
            require(rep.rows.size() == acc.rows.size(), "ensemble_report: run shape mismatch");
            for (std::size_t k = 0; k < rep.rows.size(); ++k) {
                acc.rows[k].mean_raw += rep.rows[k].mean_raw;
                acc.rows[k].var_raw += rep.rows[k].var_raw;
                acc.rows[k].mean_resid += rep.rows[k].mean_resid;
                acc.rows[k].var_resid += rep.rows[k].var_resid;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(n_runs);
    for (StepStats& st : acc.rows) {
        st.mean_raw *= inv;
        st.var_raw *= inv;
        st.mean_resid *= inv;
        st.var_resid *= inv;
    }
    return acc;
}

inline void export_report_csv(const TrajectoryReport& rep, const std::string& path) {
    csv::Writer w(path, {"step", "mean_raw", "var_raw", "mean_resid", "var_resid", "theory_mean",
                         "theory_var"});
    for (const StepStats& st : rep.rows)
        w.row({static_cast<double>(st.step), st.mean_raw, st.var_raw, st.mean_resid, st.var_resid,
               st.theory_mean, st.theory_var});
}

}  // namespace pixdiff
