#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pixdiff/csv.hpp"
#include "pixdiff/grid.hpp"

namespace pixdiff {

// Floor applied to (1 - alpha_bar) denominators in posterior quantities.
inline constexpr double kDenomFloor = 1e-15;

struct ScheduleConfig {
    double gamma = 20.0;
    int total_steps = 200;
};

// Per-pixel schedule constraints: gamma must dominate every pixel value
// (gamma >= 10 * max(x0)) so that the scale e^{-gamma*x0} is strongly
// contrastive, and gamma < total_steps keeps the per-step retention
// alpha = e^{-gamma*x0/T} bounded away from 0 for all pixels.
inline void validate_schedule_config(const ScheduleConfig& cfg, const Image& x0) {
    require_normalized(x0, "schedule");
    require(cfg.total_steps >= 1, "schedule: total_steps must be >= 1");
    require(cfg.gamma > 0.0, "schedule: gamma must be positive");
    require(cfg.gamma < static_cast<double>(cfg.total_steps),
            "schedule: gamma must be < total_steps (gamma=" + std::to_string(cfg.gamma) +
                ", total_steps=" + std::to_string(cfg.total_steps) + ")");
    require(cfg.gamma >= 10.0 * x0.max(),
            "schedule: gamma must be >= 10 * max(x0) (gamma=" + std::to_string(cfg.gamma) +
                ", max(x0)=" + std::to_string(x0.max()) + ")");
}

// Image scale x_delta = e^{-gamma * x0}, elementwise. Bright pixels map to
// values near 0, dark pixels to values near 1; this is the per-pixel terminal
// retention of the diffusion (alpha_bar at step T).
inline Grid image_scale(const Image& x0, double gamma) {
    require_normalized(x0, "image_scale");
    require(gamma > 0.0, "image_scale: gamma must be positive");
    require(gamma >= 10.0 * x0.max(), "image_scale: gamma must be >= 10 * max(x0)");
    Grid scale(x0.shape);
    for (std::size_t i = 0; i < x0.size(); ++i) scale[i] = std::exp(-gamma * x0[i]);
    return scale;
}

// Per-pixel schedule: alpha = x_delta^{1/T} = e^{-gamma*x0/T}, constant
// across steps for each pixel, so alpha_bar_i = alpha^i telescopes exactly.
struct PixelSchedule {
    ScheduleConfig config;
    Image x0;
    Grid scale;  // x_delta
    Grid alpha;  // e^{-gamma*x0/T}
    Grid beta;   // 1 - alpha
};

inline PixelSchedule build_schedule(const Image& x0, const ScheduleConfig& cfg) {
    validate_schedule_config(cfg, x0);
    PixelSchedule s;
    s.config = cfg;
    s.x0 = x0;
    s.scale = image_scale(x0, cfg.gamma);
    s.alpha = Grid(x0.shape);
    s.beta = Grid(x0.shape);
    const double T = static_cast<double>(cfg.total_steps);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        s.alpha[i] = std::exp(-cfg.gamma * x0[i] / T);
        s.beta[i] = 1.0 - s.alpha[i];
    }
    return s;
}

// alpha_bar_i = alpha^i, computed in power form (no cumulative product).
inline Grid alpha_bar(const PixelSchedule& s, int i) {
    require(i >= 0 && i <= s.config.total_steps, "alpha_bar: step index out of [0, total_steps]");
    Grid out(s.alpha.shape);
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = std::pow(s.alpha[p], static_cast<double>(i));
    return out;
}

// Materialized per-step tables used by the reverse loop: alpha, alpha_bar_j
// for j = 0..T and beta_tilde_j for j = 1..T (index j in both vectors;
// beta_tilde[0] is unused and kept zero). beta_tilde_1 is exactly 0 because
// alpha_bar_0 = 1 exactly.
struct ScheduleTable {
    int total_steps = 0;
    Grid alpha;
    std::vector<Grid> alpha_bar;   // [0..T]
    std::vector<Grid> beta_tilde;  // [1..T]; [0] unused
    bool denom_guard_hit = false;  // some (1 - alpha_bar_j) was floored
};

namespace detail {
inline ScheduleTable finish_table(ScheduleTable tab) {
    const Shape shape = tab.alpha.shape;
    tab.beta_tilde.assign(static_cast<std::size_t>(tab.total_steps) + 1, Grid(shape));
    for (int j = 1; j <= tab.total_steps; ++j) {
        for (std::size_t p = 0; p < tab.alpha.size(); ++p) {
            double denom = 1.0 - tab.alpha_bar[static_cast<std::size_t>(j)][p];
            if (denom < kDenomFloor) {
                denom = kDenomFloor;
                tab.denom_guard_hit = true;
            }
            const double beta = 1.0 - tab.alpha[p];
            tab.beta_tilde[static_cast<std::size_t>(j)][p] =
                (1.0 - tab.alpha_bar[static_cast<std::size_t>(j) - 1][p]) / denom * beta;
        }
    }
    return tab;
}
}  // namespace detail

// Rebuild all scheduling quantities from a scale grid alone (the sampling
// path, where the scale is an estimate): alpha_j = exp(log(scale)/T),
// alpha_bar_j = exp(j*log(scale)/T).
inline ScheduleTable schedule_from_scale(const Grid& scale, int total_steps) {
    require(total_steps >= 1, "schedule_from_scale: total_steps must be >= 1");
    for (double s : scale.v)
        require(s > 0.0 && s < 1.0, "schedule_from_scale: scale values must lie in (0,1)");
    ScheduleTable tab;
    tab.total_steps = total_steps;
    tab.alpha = Grid(scale.shape);
    tab.alpha_bar.assign(static_cast<std::size_t>(total_steps) + 1, Grid(scale.shape));
    const double T = static_cast<double>(total_steps);
    for (std::size_t p = 0; p < scale.size(); ++p) {
        const double log_scale = std::log(scale[p]);
        tab.alpha[p] = std::exp(log_scale / T);
        for (int j = 0; j <= total_steps; ++j)
            tab.alpha_bar[static_cast<std::size_t>(j)][p] =
                std::exp(static_cast<double>(j) * log_scale / T);
    }
    return detail::finish_table(std::move(tab));
}

// Same tables from a ground-truth schedule (power form).
inline ScheduleTable materialize(const PixelSchedule& s) {
    ScheduleTable tab;
    tab.total_steps = s.config.total_steps;
    tab.alpha = s.alpha;
    tab.alpha_bar.assign(static_cast<std::size_t>(s.config.total_steps) + 1, Grid(s.alpha.shape));
    for (int j = 0; j <= s.config.total_steps; ++j)
        tab.alpha_bar[static_cast<std::size_t>(j)] = alpha_bar(s, j);
    return detail::finish_table(std::move(tab));
}

// Conventional pixel-independent linear baseline: beta_i ramps from beta_min
// to beta_max, alpha_bar by cumulative product.
struct BaselineConfig {
    double beta_min = 1e-4;
    double beta_max = 0.02;
    int total_steps = 500;
};

struct BaselineSchedule {
    BaselineConfig config;
    std::vector<double> beta;        // [1..T]; [0] unused
    std::vector<double> alpha_bar_;  // [0..T]

    double beta_at(int i) const {
        require(i >= 1 && i <= config.total_steps, "BaselineSchedule: step out of [1, total_steps]");
        return beta[static_cast<std::size_t>(i)];
    }
    double alpha_at(int i) const { return 1.0 - beta_at(i); }
    double alpha_bar_at(int i) const {
        require(i >= 0 && i <= config.total_steps, "BaselineSchedule: step out of [0, total_steps]");
        return alpha_bar_[static_cast<std::size_t>(i)];
    }
};

inline BaselineSchedule baseline_linear(const BaselineConfig& cfg) {
    require(cfg.total_steps >= 2, "baseline_linear: total_steps must be >= 2");
    require(cfg.beta_min > 0.0 && cfg.beta_min < cfg.beta_max && cfg.beta_max < 1.0,
            "baseline_linear: need 0 < beta_min < beta_max < 1");
    BaselineSchedule s;
    s.config = cfg;
    s.beta.assign(static_cast<std::size_t>(cfg.total_steps) + 1, 0.0);
    s.alpha_bar_.assign(static_cast<std::size_t>(cfg.total_steps) + 1, 1.0);
    const double span = cfg.beta_max - cfg.beta_min;
    const double denom = static_cast<double>(cfg.total_steps - 1);
    double prod = 1.0;
    for (int i = 1; i <= cfg.total_steps; ++i) {
        const double b = cfg.beta_min + static_cast<double>(i - 1) * span / denom;
        s.beta[static_cast<std::size_t>(i)] = b;
        prod *= 1.0 - b;
        s.alpha_bar_[static_cast<std::size_t>(i)] = prod;
    }
    return s;
}

// One row per pixel: index, x0, scale, alpha, then alpha_bar at each
// requested step.
inline void export_schedule_csv(const PixelSchedule& s, const std::vector<int>& steps,
                                const std::string& path) {
    std::vector<std::string> header{"pixel", "x0", "scale", "alpha"};
    for (int i : steps) {
        require(i >= 0 && i <= s.config.total_steps, "export_schedule_csv: step out of range");
        header.push_back("alpha_bar_" + std::to_string(i));
    }
    csv::Writer w(path, header);
    std::vector<Grid> bars;
    bars.reserve(steps.size());
    for (int i : steps) bars.push_back(alpha_bar(s, i));
    for (std::size_t p = 0; p < s.x0.size(); ++p) {
        std::vector<double> row{static_cast<double>(p), s.x0[p], s.scale[p], s.alpha[p]};
        for (const Grid& g : bars) row.push_back(g[p]);
        w.row(row);
    }
}

}  // namespace pixdiff
