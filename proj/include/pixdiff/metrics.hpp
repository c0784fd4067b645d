#pragma once

#include <cmath>

#include "pixdiff/forward.hpp"
#include "pixdiff/grid.hpp"

namespace pixdiff {

inline double mse(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "mse");
    require(a.size() > 0, "mse: empty grid");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// Structural similarity with uniform box windows over valid positions only
// (no padding, no Gaussian weighting), population moments, dynamic range 1.
struct SsimConfig {
    int window = 11;
    double c1 = 0.01 * 0.01;  // (k1 * L)^2, L = 1
    double c2 = 0.03 * 0.03;  // (k2 * L)^2

    // Small grids get a smaller window so enough valid positions remain.
    static SsimConfig for_shape(const Shape& s) {
        SsimConfig cfg;
        cfg.window = (s.width < 32 || s.height < 32) ? 7 : 11;
        if (cfg.window > s.width) cfg.window = s.width;
        if (cfg.window > s.height) cfg.window = s.height;
        return cfg;
    }
};

inline double ssim(const Grid& a, const Grid& b, const SsimConfig& cfg) {
    require_same_shape(a, b, "ssim");
    require(cfg.window >= 1, "ssim: window must be >= 1");
    require(cfg.window <= a.shape.width && cfg.window <= a.shape.height,
            "ssim: window exceeds image size");
    const int w = a.shape.width, h = a.shape.height, ch = a.shape.channels;
    const int win = cfg.window;
    const double n = static_cast<double>(win) * static_cast<double>(win);
    double total = 0.0;
    long count = 0;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y + win <= h; ++y) {
            for (int x = 0; x + win <= w; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const std::size_t idx = static_cast<std::size_t>(
                            ((y + dy) * w + (x + dx)) * ch + c);
                        const double va = a[idx], vb = b[idx];
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                const double ma = sa / n, mb = sb / n;
                const double va = saa / n - ma * ma;
                const double vb = sbb / n - mb * mb;
                const double cov = sab / n - ma * mb;
                total += (2.0 * ma * mb + cfg.c1) * (2.0 * cov + cfg.c2) /
                         ((ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

inline double ssim(const Grid& a, const Grid& b) { return ssim(a, b, SsimConfig::for_shape(a.shape)); }

// Earliest recorded step from which the pixel ensemble of the chain state
// stays indistinguishable from a standard normal (|mean| < mean_tol and
// |var - 1| < var_tol at that step and at every later recorded step).
// Returns total_steps + 1 when the final recorded step still fails.
inline int convergence_steps(const TrajectoryReport& rep, int total_steps, double mean_tol = 0.1,
                             double var_tol = 0.1) {
    require(mean_tol > 0.0 && var_tol > 0.0, "convergence_steps: tolerances must be positive");
    int ans = total_steps + 1;
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) {
        const bool ok =
            std::fabs(it->mean_raw) < mean_tol && std::fabs(it->var_raw - 1.0) < var_tol;
        if (!ok) break;
        ans = it->step;
    }
    return ans;
}

}  // namespace pixdiff
