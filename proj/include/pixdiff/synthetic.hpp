#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pixdiff/grid.hpp"
#include "pixdiff/rng.hpp"

namespace pixdiff {

namespace detail {
inline double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace detail

// Deterministic grayscale test image: diagonal gradient with three smooth
// bumps, values kept inside [0.25, 0.95] so every schedule constraint with
// gamma >= 10 is satisfiable.
inline Image make_synthetic_image(int width = 128, int height = 128) {
    require(width >= 4 && height >= 4, "make_synthetic_image: image too small");
    Image img(Shape{width, height, 1});
    struct Bump {
        double cx, cy, sigma, amp;
    };
    const Bump bumps[] = {
        {0.30, 0.35, 0.12, +0.25},
        {0.72, 0.28, 0.08, -0.20},
        {0.60, 0.75, 0.16, +0.18},
    };
    for (int y = 0; y < height; ++y) {
        const double fy = static_cast<double>(y) / static_cast<double>(height - 1);
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) / static_cast<double>(width - 1);
            double v = 0.35 + 0.40 * (0.5 * fx + 0.5 * fy);
            for (const Bump& b : bumps) {
                const double dx = fx - b.cx, dy = fy - b.cy;
                v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            }
            img[static_cast<std::size_t>(y * width + x)] = detail::clampd(v, 0.25, 0.95);
        }
    }
    return img;
}

// One procedurally generated corpus image: bilinear corner gradient plus a
// single soft bump, clamped into [0.05, 0.95]. Fully determined by
// (seed, index), independent of how many images were generated before it.
// The small bump amplitude keeps the family simple enough for the toy
// denoising networks to fit closely, while the bright corners keep the
// inverse-scale readout ill-conditioned (absolute scale errors are amplified
// by e^{gamma*x0}/gamma on inversion).
inline Image make_corpus_image(std::uint64_t seed, std::uint64_t index, int width, int height) {
    require(width >= 2 && height >= 2, "make_corpus_image: image too small");
    RngStream rng(seed, index);
    const double c00 = 0.15 + 0.75 * rng.uniform();
    const double c10 = 0.15 + 0.75 * rng.uniform();
    const double c01 = 0.15 + 0.75 * rng.uniform();
    const double c11 = 0.15 + 0.75 * rng.uniform();
    const double cx = rng.uniform(), cy = rng.uniform();
    const double sigma = 0.15 + 0.20 * rng.uniform();
    const double amp = 0.2 * (rng.uniform() - 0.5);
    Image img(Shape{width, height, 1});
    for (int y = 0; y < height; ++y) {
        const double fy = static_cast<double>(y) / static_cast<double>(height - 1);
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) / static_cast<double>(width - 1);
            double v = (1.0 - fx) * (1.0 - fy) * c00 + fx * (1.0 - fy) * c10 +
                       (1.0 - fx) * fy * c01 + fx * fy * c11;
            const double dx = fx - cx, dy = fy - cy;
            v += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            img[static_cast<std::size_t>(y * width + x)] = detail::clampd(v, 0.05, 0.95);
        }
    }
    return img;
}

struct CorpusConfig {
    int count = 512;
    int width = 8;
    int height = 8;
    std::uint64_t seed = 77;
    double val_fraction = 0.125;  // trailing fraction held out for validation
};

struct SyntheticCorpus {
    std::vector<Image> train;
    std::vector<Image> val;
};

inline SyntheticCorpus make_corpus(const CorpusConfig& cfg) {
    require(cfg.count >= 2, "make_corpus: need at least two images");
    require(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0,
            "make_corpus: val_fraction must lie in (0,1)");
    int n_val = static_cast<int>(cfg.val_fraction * cfg.count);
    if (n_val < 1) n_val = 1;
    SyntheticCorpus corpus;
    for (int k = 0; k < cfg.count; ++k) {
        Image img = make_corpus_image(cfg.seed, static_cast<std::uint64_t>(k), cfg.width,
                                      cfg.height);
        if (k < cfg.count - n_val)
            corpus.train.push_back(std::move(img));
        else
            corpus.val.push_back(std::move(img));
    }
    return corpus;
}

}  // namespace pixdiff
