#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pixdiff/grid.hpp"
#include "pixdiff/rng.hpp"

namespace pixdiff::learner {

// Fully connected layer with manually accumulated gradients. Weights are
// row-major (out x in).
struct Linear {
    int in = 0, out = 0;
    std::vector<double> W, b, gW, gb;

    Linear() = default;
    Linear(int in_dim, int out_dim, RngStream& rng) : in(in_dim), out(out_dim) {
        require(in_dim >= 1 && out_dim >= 1, "Linear: dimensions must be positive");
        W.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
        b.assign(static_cast<std::size_t>(out), 0.0);
        gW.assign(W.size(), 0.0);
        gb.assign(b.size(), 0.0);
        const double s = std::sqrt(1.0 / static_cast<double>(in));
        for (double& w : W) w = s * rng.normal();
    }

    // y = W x + b
    void forward(const double* x, double* y) const {
        for (int o = 0; o < out; ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            const double* row = W.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int k = 0; k < in; ++k) acc += row[k] * x[k];
            y[o] = acc;
        }
    }

    // y += W x + b (fusion by addition)
    void forward_add(const double* x, double* y) const {
        for (int o = 0; o < out; ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            const double* row = W.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int k = 0; k < in; ++k) acc += row[k] * x[k];
            y[o] += acc;
        }
    }

    // Accumulate parameter gradients for upstream dy at input x; optionally
    // add the input gradient into dx (pass nullptr to skip).
    void backward(const double* x, const double* dy, double* dx) {
        for (int o = 0; o < out; ++o) {
            const double g = dy[o];
            gb[static_cast<std::size_t>(o)] += g;
            double* grow = gW.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            const double* row = W.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int k = 0; k < in; ++k) {
                grow[k] += g * x[k];
                if (dx) dx[k] += g * row[k];
            }
        }
    }

    void zero_grad() {
        std::fill(gW.begin(), gW.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
    }
};

inline void tanh_forward(std::vector<double>& v) {
    for (double& x : v) x = std::tanh(x);
}

// Given y = tanh(u), multiply upstream grad by 1 - y^2.
inline void tanh_backward(const std::vector<double>& y, std::vector<double>& dy) {
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= 1.0 - y[i] * y[i];
}

inline void sigmoid_forward(std::vector<double>& v) {
    for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
}

inline void sigmoid_backward(const std::vector<double>& y, std::vector<double>& dy) {
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= y[i] * (1.0 - y[i]);
}

// Sinusoidal step embedding: e[2k] = sin(step * w_k), e[2k+1] = cos(step * w_k)
// with w_k = 10000^{-2k/dim}. Step 0 maps to [0,1,0,1,...].
inline std::vector<double> time_embedding(int step, int dim) {
    require(dim >= 2 && dim % 2 == 0, "time_embedding: dim must be even and >= 2");
    require(step >= 0, "time_embedding: step must be >= 0");
    std::vector<double> e(static_cast<std::size_t>(dim));
    for (int k = 0; 2 * k < dim; ++k) {
        const double w =
            std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
        e[static_cast<std::size_t>(2 * k)] = std::sin(static_cast<double>(step) * w);
        e[static_cast<std::size_t>(2 * k + 1)] = std::cos(static_cast<double>(step) * w);
    }
    return e;
}

// A view of one parameter vector and its gradient, used to drive the
// optimizer and the serializer over a whole network uniformly.
struct ParamRef {
    std::vector<double>* w = nullptr;
    std::vector<double>* g = nullptr;
};

inline void collect(Linear& layer, std::vector<ParamRef>& out) {
    out.push_back({&layer.W, &layer.gW});
    out.push_back({&layer.b, &layer.gb});
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with state held per parameter vector; the state is exposed so a
// checkpoint can resume training bit-for-bit.
struct Adam {
    AdamConfig cfg;
    long t = 0;
    std::vector<std::vector<double>> m, v;

    void init(const std::vector<ParamRef>& params) {
        m.clear();
        v.clear();
        for (const ParamRef& p : params) {
            m.emplace_back(p.w->size(), 0.0);
            v.emplace_back(p.w->size(), 0.0);
        }
        t = 0;
    }

    void step(const std::vector<ParamRef>& params) {
        require(params.size() == m.size(), "Adam: parameter layout changed since init");
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t p = 0; p < params.size(); ++p) {
            std::vector<double>& w = *params[p].w;
            const std::vector<double>& g = *params[p].g;
            require(w.size() == m[p].size(), "Adam: parameter size changed since init");
            for (std::size_t k = 0; k < w.size(); ++k) {
                m[p][k] = cfg.beta1 * m[p][k] + (1.0 - cfg.beta1) * g[k];
                v[p][k] = cfg.beta2 * v[p][k] + (1.0 - cfg.beta2) * g[k] * g[k];
                const double mhat = m[p][k] / bc1;
                const double vhat = v[p][k] / bc2;
                w[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

}  // namespace pixdiff::learner
