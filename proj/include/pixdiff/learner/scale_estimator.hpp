#pragma once

#include <cmath>
#include <vector>

#include "pixdiff/grid.hpp"
#include "pixdiff/learner/net.hpp"
#include "pixdiff/posterior.hpp"
#include "pixdiff/rng.hpp"

namespace pixdiff::learner {

// Keeps network scale outputs strictly inside (0,1) even if the sigmoid
// saturates in floating point; schedule construction requires open-interval
// values.
inline constexpr double kScaleClamp = 1e-12;

// Per-pixel image-scale estimator: a small fully connected encoder-decoder
// mapping a noisy state (plus a step embedding) to the scale grid x_delta.
// Bound to a fixed image shape.
struct ScaleEstimator {
    Shape shape;
    int emb_dim = 16;
    int enc_dim = 32;         // width of the outer encoder/decoder layers
    int bottleneck_dim = 16;  // width of the central code
    Linear l1, l2, l3, l4;

    ScaleEstimator() = default;
    ScaleEstimator(Shape s, RngStream& rng, int emb = 16, int enc = 32, int bottleneck = 16)
        : shape(s),
          emb_dim(emb),
          enc_dim(enc),
          bottleneck_dim(bottleneck),
          l1(static_cast<int>(s.size()) + emb, enc, rng),
          l2(enc, bottleneck, rng),
          l3(bottleneck, enc, rng),
          l4(enc, static_cast<int>(s.size()), rng) {}
};

inline std::vector<ParamRef> params(ScaleEstimator& e) {
    std::vector<ParamRef> out;
    collect(e.l1, out);
    collect(e.l2, out);
    collect(e.l3, out);
    collect(e.l4, out);
    return out;
}

inline void zero_grad(ScaleEstimator& e) {
    e.l1.zero_grad();
    e.l2.zero_grad();
    e.l3.zero_grad();
    e.l4.zero_grad();
}

struct ScaleActs {
    std::vector<double> in;              // state pixels + step embedding
    std::vector<double> h1, h2, h3, out; // post-activation
};

inline void forward(const ScaleEstimator& e, const Grid& x_i, int step, ScaleActs& a) {
    require(x_i.shape == e.shape, "ScaleEstimator: state shape mismatch");
    require(step >= 0, "ScaleEstimator: step must be >= 0");
    a.in = x_i.v;
    const std::vector<double> emb = time_embedding(step, e.emb_dim);
    a.in.insert(a.in.end(), emb.begin(), emb.end());
    a.h1.assign(static_cast<std::size_t>(e.l1.out), 0.0);
    e.l1.forward(a.in.data(), a.h1.data());
    tanh_forward(a.h1);
    a.h2.assign(static_cast<std::size_t>(e.l2.out), 0.0);
    e.l2.forward(a.h1.data(), a.h2.data());
    tanh_forward(a.h2);
    a.h3.assign(static_cast<std::size_t>(e.l3.out), 0.0);
    e.l3.forward(a.h2.data(), a.h3.data());
    tanh_forward(a.h3);
    a.out.assign(static_cast<std::size_t>(e.l4.out), 0.0);
    e.l4.forward(a.h3.data(), a.out.data());
    sigmoid_forward(a.out);
}

// Accumulates parameter gradients for upstream dout (same length as out).
inline void backward(ScaleEstimator& e, const ScaleActs& a, std::vector<double> dout) {
    sigmoid_backward(a.out, dout);
    std::vector<double> dh3(a.h3.size(), 0.0);
    e.l4.backward(a.h3.data(), dout.data(), dh3.data());
    tanh_backward(a.h3, dh3);
    std::vector<double> dh2(a.h2.size(), 0.0);
    e.l3.backward(a.h2.data(), dh3.data(), dh2.data());
    tanh_backward(a.h2, dh2);
    std::vector<double> dh1(a.h1.size(), 0.0);
    e.l2.backward(a.h1.data(), dh2.data(), dh1.data());
    tanh_backward(a.h1, dh1);
    e.l1.backward(a.in.data(), dh1.data(), nullptr);
}

inline Grid estimate_scale(const ScaleEstimator& e, const Grid& x_i, int step) {
    ScaleActs a;
    forward(e, x_i, step, a);
    Grid scale(e.shape);
    for (std::size_t q = 0; q < scale.size(); ++q) {
        double v = a.out[q];
        if (v < kScaleClamp) v = kScaleClamp;
        if (v > 1.0 - kScaleClamp) v = 1.0 - kScaleClamp;
        scale[q] = v;
    }
    return scale;
}

// Mean-squared loss against the true scale grid; accumulates gradients.
inline double scale_loss_and_grad(ScaleEstimator& e, const Grid& x_i, int step,
                                  const Grid& target) {
    require(target.shape == e.shape, "scale_loss_and_grad: target shape mismatch");
    ScaleActs a;
    forward(e, x_i, step, a);
    const double n = static_cast<double>(a.out.size());
    std::vector<double> dout(a.out.size());
    double loss = 0.0;
    for (std::size_t q = 0; q < a.out.size(); ++q) {
        const double d = a.out[q] - target[q];
        loss += d * d;
        dout[q] = 2.0 * d / n;
    }
    backward(e, a, std::move(dout));
    return loss / n;
}

// Reconstruct the image from a scale estimate: x0_hat = -ln(scale)/gamma,
// clamped to at most 1 (estimates below e^{-gamma} would invert past the
// valid pixel range). The derivative of the inversion is -1/(gamma*scale),
// so small absolute scale errors at bright pixels blow up; tests quantify
// this amplification.
inline Image invert_scale(const Grid& scale, double gamma) {
    require(gamma > 0.0, "invert_scale: gamma must be positive");
    Image out(scale.shape);
    for (std::size_t q = 0; q < scale.size(); ++q) {
        require(scale[q] > 0.0 && scale[q] < 1.0, "invert_scale: scale must lie in (0,1)");
        double v = -std::log(scale[q]) / gamma;
        if (v > 1.0) v = 1.0;
        out[q] = v;
    }
    return out;
}

inline ScaleFn make_estimator_scale_fn(const ScaleEstimator& e, int step) {
    return [&e, step](const Grid& x_i) { return estimate_scale(e, x_i, step); };
}

}  // namespace pixdiff::learner
