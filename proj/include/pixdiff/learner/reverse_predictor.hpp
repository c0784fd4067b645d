#pragma once

#include <cmath>
#include <vector>

#include "pixdiff/grid.hpp"
#include "pixdiff/learner/net.hpp"
#include "pixdiff/posterior.hpp"
#include "pixdiff/rng.hpp"

namespace pixdiff::learner {

// Predicts the composite noise for every step j <= i of the reverse chain in
// a single pass: one shared backbone consumes the state, the scale estimate
// and the step embedding; light per-step heads (fused with the scale and the
// target-step embedding through shared affines) emit the per-step noise
// grids. backbone_evals counts backbone passes so tests can pin the
// one-pass-per-sample property.
struct ReversePredictor {
    Shape shape;
    int total_steps = 0;
    int emb_dim = 16;
    int hidden = 64;
    int head_hidden = 32;

    Linear in_x, in_scale, in_time;   // D->H, D->H, E->H (fused by addition)
    Linear mid;                       // H->H
    Linear head_scale, head_time;     // shared head fusions: D->H, E->H
    std::vector<Linear> head_h1;      // per head j: H->head_hidden ([0] unused)
    std::vector<Linear> head_h2;      // per head j: head_hidden->D ([0] unused)
    long backbone_evals = 0;

    ReversePredictor() = default;
    ReversePredictor(Shape s, int steps, RngStream& rng, int emb = 16, int h = 64, int hh = 32)
        : shape(s), total_steps(steps), emb_dim(emb), hidden(h), head_hidden(hh) {
        require(steps >= 1, "ReversePredictor: total_steps must be >= 1");
        const int d = static_cast<int>(s.size());
        in_x = Linear(d, h, rng);
        in_scale = Linear(d, h, rng);
        in_time = Linear(emb, h, rng);
        mid = Linear(h, h, rng);
        head_scale = Linear(d, h, rng);
        head_time = Linear(emb, h, rng);
        head_h1.resize(static_cast<std::size_t>(steps) + 1);
        head_h2.resize(static_cast<std::size_t>(steps) + 1);
        for (int j = 1; j <= steps; ++j) {
            head_h1[static_cast<std::size_t>(j)] = Linear(h, hh, rng);
            head_h2[static_cast<std::size_t>(j)] = Linear(hh, d, rng);
        }
    }
};

inline std::vector<ParamRef> params(ReversePredictor& n) {
    std::vector<ParamRef> out;
    collect(n.in_x, out);
    collect(n.in_scale, out);
    collect(n.in_time, out);
    collect(n.mid, out);
    collect(n.head_scale, out);
    collect(n.head_time, out);
    for (int j = 1; j <= n.total_steps; ++j) {
        collect(n.head_h1[static_cast<std::size_t>(j)], out);
        collect(n.head_h2[static_cast<std::size_t>(j)], out);
    }
    return out;
}

inline void zero_grad(ReversePredictor& n) {
    n.in_x.zero_grad();
    n.in_scale.zero_grad();
    n.in_time.zero_grad();
    n.mid.zero_grad();
    n.head_scale.zero_grad();
    n.head_time.zero_grad();
    for (int j = 1; j <= n.total_steps; ++j) {
        n.head_h1[static_cast<std::size_t>(j)].zero_grad();
        n.head_h2[static_cast<std::size_t>(j)].zero_grad();
    }
}

struct PredictorActs {
    int step = 0;                       // i: heads 1..i were evaluated
    std::vector<double> x, s, e_i;      // inputs
    std::vector<double> h0, h1;         // backbone post-tanh activations
    std::vector<double> fuse_scale;     // head_scale(s), shared by all heads
    std::vector<std::vector<double>> e_j, g, r, out;  // per head, [0] unused
};

inline void forward(ReversePredictor& n, const Grid& x_i, const Grid& scale, int i,
                    PredictorActs& a) {
    require(x_i.shape == n.shape, "ReversePredictor: state shape mismatch");
    require(scale.shape == n.shape, "ReversePredictor: scale shape mismatch");
    require(i >= 1 && i <= n.total_steps, "ReversePredictor: step out of [1, total_steps]");
    ++n.backbone_evals;
    a.step = i;
    a.x = x_i.v;
    a.s = scale.v;
    a.e_i = time_embedding(i, n.emb_dim);

    const std::size_t H = static_cast<std::size_t>(n.hidden);
    a.h0.assign(H, 0.0);
    n.in_x.forward(a.x.data(), a.h0.data());
    n.in_scale.forward_add(a.s.data(), a.h0.data());
    n.in_time.forward_add(a.e_i.data(), a.h0.data());
    tanh_forward(a.h0);
    a.h1.assign(H, 0.0);
    n.mid.forward(a.h0.data(), a.h1.data());
    tanh_forward(a.h1);

    a.fuse_scale.assign(H, 0.0);
    n.head_scale.forward(a.s.data(), a.fuse_scale.data());

    const std::size_t nslots = static_cast<std::size_t>(i) + 1;
    a.e_j.assign(nslots, {});
    a.g.assign(nslots, {});
    a.r.assign(nslots, {});
    a.out.assign(nslots, {});
    for (int j = 1; j <= i; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        a.e_j[sj] = time_embedding(j, n.emb_dim);
        std::vector<double>& g = a.g[sj];
        g.assign(H, 0.0);
        n.head_time.forward(a.e_j[sj].data(), g.data());
        for (std::size_t k = 0; k < H; ++k) g[k] += a.h1[k] + a.fuse_scale[k];
        tanh_forward(g);
        std::vector<double>& r = a.r[sj];
        r.assign(static_cast<std::size_t>(n.head_hidden), 0.0);
        n.head_h1[sj].forward(g.data(), r.data());
        tanh_forward(r);
        std::vector<double>& out = a.out[sj];
        out.assign(n.shape.size(), 0.0);
        n.head_h2[sj].forward(r.data(), out.data());
    }
}

// Accumulates parameter gradients given upstream per-head gradients dout
// (slot j for head j; slots may be empty for heads without loss).
inline void backward(ReversePredictor& n, const PredictorActs& a,
                     const std::vector<std::vector<double>>& dout) {
    require(dout.size() == a.out.size(), "ReversePredictor backward: slot count mismatch");
    const std::size_t H = static_cast<std::size_t>(n.hidden);
    std::vector<double> dh1(H, 0.0);
    std::vector<double> dfuse_scale(H, 0.0);
    for (int j = 1; j <= a.step; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        if (dout[sj].empty()) continue;
        std::vector<double> dr(a.r[sj].size(), 0.0);
        n.head_h2[sj].backward(a.r[sj].data(), dout[sj].data(), dr.data());
        tanh_backward(a.r[sj], dr);
        std::vector<double> dg(H, 0.0);
        n.head_h1[sj].backward(a.g[sj].data(), dr.data(), dg.data());
        tanh_backward(a.g[sj], dg);
        // g = tanh(h1 + head_scale(s) + head_time(e_j)): fan the gradient out.
        n.head_time.backward(a.e_j[sj].data(), dg.data(), nullptr);
        for (std::size_t k = 0; k < H; ++k) {
            dh1[k] += dg[k];
            dfuse_scale[k] += dg[k];
        }
    }
    n.head_scale.backward(a.s.data(), dfuse_scale.data(), nullptr);
    tanh_backward(a.h1, dh1);
    std::vector<double> dh0(H, 0.0);
    n.mid.backward(a.h0.data(), dh1.data(), dh0.data());
    tanh_backward(a.h0, dh0);
    n.in_x.backward(a.x.data(), dh0.data(), nullptr);
    n.in_scale.backward(a.s.data(), dh0.data(), nullptr);
    n.in_time.backward(a.e_i.data(), dh0.data(), nullptr);
}

// Noise bundle for the sampling loop: slot j holds the head-j prediction.
inline std::vector<Grid> predict_noises(ReversePredictor& n, const Grid& x_i, const Grid& scale,
                                        int i) {
    PredictorActs a;
    forward(n, x_i, scale, i, a);
    std::vector<Grid> bundle(static_cast<std::size_t>(i) + 1, Grid(n.shape));
    for (int j = 1; j <= i; ++j)
        bundle[static_cast<std::size_t>(j)].v = a.out[static_cast<std::size_t>(j)];
    return bundle;
}

// Mean-squared loss against per-step noise targets (slot j for step j,
// j = 1..i), averaged over heads and pixels; accumulates gradients.
inline double predictor_loss_and_grad(ReversePredictor& n, const Grid& x_i, const Grid& scale,
                                      int i, const std::vector<Grid>& targets) {
    require(targets.size() == static_cast<std::size_t>(i) + 1,
            "predictor_loss_and_grad: target slots must cover steps 1..i");
    PredictorActs a;
    forward(n, x_i, scale, i, a);
    const double d = static_cast<double>(n.shape.size());
    const double denom = d * static_cast<double>(i);
    std::vector<std::vector<double>> dout(a.out.size());
    double loss = 0.0;
    for (int j = 1; j <= i; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        require(targets[sj].shape == n.shape, "predictor_loss_and_grad: target shape mismatch");
        dout[sj].assign(a.out[sj].size(), 0.0);
        for (std::size_t q = 0; q < a.out[sj].size(); ++q) {
            const double diff = a.out[sj][q] - targets[sj][q];
            loss += diff * diff;
            dout[sj][q] = 2.0 * diff / denom;
        }
    }
    backward(n, a, dout);
    return loss / denom;
}

// Per-head mean-squared error of the predictions at step i (no gradients).
inline std::vector<double> head_errors(ReversePredictor& n, const Grid& x_i, const Grid& scale,
                                       int i, const std::vector<Grid>& targets) {
    PredictorActs a;
    forward(n, x_i, scale, i, a);
    std::vector<double> err(static_cast<std::size_t>(i) + 1, 0.0);
    const double d = static_cast<double>(n.shape.size());
    for (int j = 1; j <= i; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        double s = 0.0;
        for (std::size_t q = 0; q < a.out[sj].size(); ++q) {
            const double diff = a.out[sj][q] - targets[sj][q];
            s += diff * diff;
        }
        err[sj] = s / d;
    }
    return err;
}

inline NoiseBundleFn make_predictor_noise_fn(ReversePredictor& n) {
    return [&n](const Grid& x_i, const Grid& scale, int i) {
        return predict_noises(n, x_i, scale, i);
    };
}

}  // namespace pixdiff::learner
