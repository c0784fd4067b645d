#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pixdiff/csv.hpp"
#include "pixdiff/forward.hpp"
#include "pixdiff/grid.hpp"
#include "pixdiff/learner/net.hpp"
#include "pixdiff/learner/reverse_predictor.hpp"
#include "pixdiff/learner/scale_estimator.hpp"
#include "pixdiff/metrics.hpp"
#include "pixdiff/posterior.hpp"
#include "pixdiff/rng.hpp"
#include "pixdiff/schedule.hpp"

namespace pixdiff::learner {

// Stream ids: 0 and 1 seed the two networks; iteration k draws everything
// (sample choice, step choice, noise) from stream kIterStreamBase + k, so a
// resumed run replays the exact same iterations as an uninterrupted one.
inline constexpr std::uint64_t kIterStreamBase = 0x100000;

struct TrainConfig {
    double gamma = 15.0;
    int total_steps = 20;
    int iterations = 800;
    int batch_size = 8;
    AdamConfig adam{};
    std::uint64_t seed = 123;
    double divergence_loss = 1e6;  // abort when a batch loss exceeds this
    // network widths (layer sizes are configurable; serialized models carry
    // their own dimensions, so these only affect freshly constructed nets)
    int estimator_enc = 32;
    int estimator_bottleneck = 16;
    int predictor_hidden = 64;
    int predictor_head_hidden = 32;
};

struct TrainLog {
    std::vector<int> iteration;
    std::vector<double> loss;
    bool diverged = false;
};

inline void export_train_log_csv(const TrainLog& log, const std::string& path) {
    csv::Writer w(path, {"iteration", "loss"});
    for (std::size_t k = 0; k < log.loss.size(); ++k)
        w.row({static_cast<double>(log.iteration[k]), log.loss[k]});
}

namespace detail {
inline void scale_gradients(const std::vector<ParamRef>& prm, double c) {
    for (const ParamRef& p : prm)
        for (double& g : *p.g) g *= c;
}

inline std::vector<PixelSchedule> build_schedules(const std::vector<Image>& images,
                                                  const TrainConfig& cfg) {
    std::vector<PixelSchedule> out;
    out.reserve(images.size());
    for (const Image& img : images)
        out.push_back(build_schedule(img, ScheduleConfig{cfg.gamma, cfg.total_steps}));
    return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Scale-estimator training: states drawn by closed-form jump at a uniform
// step, targets are the true per-image scale grids.

struct ScaleTrainer {
    TrainConfig cfg;
    ScaleEstimator net;
    Adam opt;
    int iteration = 0;
    TrainLog log;

    static ScaleTrainer fresh(Shape shape, const TrainConfig& cfg) {
        ScaleTrainer tr;
        tr.cfg = cfg;
        RngStream init_rng(cfg.seed, 0);
        tr.net = ScaleEstimator(shape, init_rng, 16, cfg.estimator_enc, cfg.estimator_bottleneck);
        tr.opt.cfg = cfg.adam;
        tr.opt.init(params(tr.net));
        return tr;
    }

    void run(const std::vector<Image>& data, int n_iters) {
        require(!data.empty(), "ScaleTrainer: empty training set");
        require(n_iters >= 0, "ScaleTrainer: negative iteration count");
        const std::vector<PixelSchedule> scheds = detail::build_schedules(data, cfg);
        const std::vector<ParamRef> prm = params(net);
        for (int done = 0; done < n_iters; ++done) {
            RngStream rit(cfg.seed, kIterStreamBase + static_cast<std::uint64_t>(iteration));
            zero_grad(net);
            double batch_loss = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const std::size_t k = rit.uniform_index(data.size());
                const int i = 1 + static_cast<int>(
                                      rit.uniform_index(static_cast<std::uint64_t>(cfg.total_steps)));
                const Grid x_i = forward_jump(data[k], alpha_bar(scheds[k], i), rit);
                batch_loss += scale_loss_and_grad(net, x_i, i, scheds[k].scale);
            }
            batch_loss /= static_cast<double>(cfg.batch_size);
            if (!std::isfinite(batch_loss) || batch_loss > cfg.divergence_loss) {
                log.diverged = true;
                break;
            }
            detail::scale_gradients(prm, 1.0 / static_cast<double>(cfg.batch_size));
            opt.step(prm);
            log.iteration.push_back(iteration);
            log.loss.push_back(batch_loss);
            ++iteration;
        }
    }
};

// ---------------------------------------------------------------------------
// Reverse-predictor training: simulate the actual forward chain to a uniform
// step i, compute the true composite noise of every intermediate state, and
// regress all heads j <= i at once. The scale input comes from a frozen
// estimator, matching what the predictor sees when sampling.

struct PredictorTrainer {
    TrainConfig cfg;
    ReversePredictor net;
    Adam opt;
    int iteration = 0;
    TrainLog log;

    static PredictorTrainer fresh(Shape shape, const TrainConfig& cfg) {
        PredictorTrainer tr;
        tr.cfg = cfg;
        RngStream init_rng(cfg.seed, 1);
        tr.net = ReversePredictor(shape, cfg.total_steps, init_rng, 16, cfg.predictor_hidden,
                                  cfg.predictor_head_hidden);
        tr.opt.cfg = cfg.adam;
        tr.opt.init(params(tr.net));
        return tr;
    }

    void run(const std::vector<Image>& data, const ScaleEstimator& frozen_estimator,
             int n_iters) {
        require(!data.empty(), "PredictorTrainer: empty training set");
        require(n_iters >= 0, "PredictorTrainer: negative iteration count");
        const std::vector<PixelSchedule> scheds = detail::build_schedules(data, cfg);
        std::vector<ScheduleTable> tabs;
        tabs.reserve(scheds.size());
        for (const PixelSchedule& s : scheds) tabs.push_back(materialize(s));
        const std::vector<ParamRef> prm = params(net);
        ForwardOptions fwd;
        fwd.record_stride = 1;
        fwd.record_states = true;
        for (int done = 0; done < n_iters; ++done) {
            RngStream rit(cfg.seed, kIterStreamBase + static_cast<std::uint64_t>(iteration));
            zero_grad(net);
            double batch_loss = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const std::size_t k = rit.uniform_index(data.size());
                const int i = 1 + static_cast<int>(
                                      rit.uniform_index(static_cast<std::uint64_t>(cfg.total_steps)));
                const ForwardTrajectory traj = simulate_chain(scheds[k], i, rit, fwd);
                std::vector<Grid> targets(static_cast<std::size_t>(i) + 1);
                for (int j = 1; j <= i; ++j)
                    targets[static_cast<std::size_t>(j)] =
                        composite_noise(traj.states[static_cast<std::size_t>(j)], data[k],
                                        tabs[k].alpha_bar[static_cast<std::size_t>(j)]);
                const Grid scale = estimate_scale(frozen_estimator, traj.final_state, i);
                batch_loss +=
                    predictor_loss_and_grad(net, traj.final_state, scale, i, targets);
            }
            batch_loss /= static_cast<double>(cfg.batch_size);
            if (!std::isfinite(batch_loss) || batch_loss > cfg.divergence_loss) {
                log.diverged = true;
                break;
            }
            detail::scale_gradients(prm, 1.0 / static_cast<double>(cfg.batch_size));
            opt.step(prm);
            log.iteration.push_back(iteration);
            log.loss.push_back(batch_loss);
            ++iteration;
        }
    }
};

// ---------------------------------------------------------------------------
// Central-difference gradient verification. The loss callable must be a
// deterministic function of the parameters (fixed data, no sampling) and is
// expected to accumulate gradients when invoked; only its return value is
// used for the finite-difference probes.

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
};

template <typename LossFn>
GradCheckReport gradient_check(const std::vector<ParamRef>& prm, LossFn&& loss, RngStream& rng,
                               int samples_per_vector = 3, double h = 1e-5) {
    for (const ParamRef& p : prm) std::fill(p.g->begin(), p.g->end(), 0.0);
    loss();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(prm.size());
    for (const ParamRef& p : prm) analytic.push_back(*p.g);
    GradCheckReport rep;
    for (std::size_t pi = 0; pi < prm.size(); ++pi) {
        std::vector<double>& w = *prm[pi].w;
        const std::size_t n_checks =
            std::min<std::size_t>(static_cast<std::size_t>(samples_per_vector), w.size());
        for (std::size_t c = 0; c < n_checks; ++c) {
            const std::size_t k = static_cast<std::size_t>(rng.uniform_index(w.size()));
            const double orig = w[k];
            w[k] = orig + h;
            const double lp = loss();
            w[k] = orig - h;
            const double lm = loss();
            w[k] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[pi][k];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
            rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(fd - an) / denom);
            ++rep.checked;
        }
    }
    return rep;
}

// Exhaustive variant: probes every coordinate and reports the fraction whose
// relative error stays below tol. Coordinates with a vanishing gradient are
// dominated by finite-difference cancellation noise, hence a fraction rather
// than a hard maximum.
struct FullGradCheckReport {
    long total = 0;
    long passed = 0;
    double worst_rel_err = 0.0;
    double pass_fraction() const {
        return total == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(total);
    }
};

template <typename LossFn>
FullGradCheckReport gradient_check_full(const std::vector<ParamRef>& prm, LossFn&& loss,
                                        double tol = 1e-4, double h = 1e-5) {
    for (const ParamRef& p : prm) std::fill(p.g->begin(), p.g->end(), 0.0);
    loss();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(prm.size());
    for (const ParamRef& p : prm) analytic.push_back(*p.g);
    FullGradCheckReport rep;
    for (std::size_t pi = 0; pi < prm.size(); ++pi) {
        std::vector<double>& w = *prm[pi].w;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double orig = w[k];
            w[k] = orig + h;
            const double lp = loss();
            w[k] = orig - h;
            const double lm = loss();
            w[k] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[pi][k];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
            const double rel = std::fabs(fd - an) / denom;
            ++rep.total;
            if (rel < tol) ++rep.passed;
            if (rel > rep.worst_rel_err) rep.worst_rel_err = rel;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Evaluation helpers over a held-out set. Image k draws from rng.substream(k)
// so results are independent of evaluation order.

inline double validation_scale_mse(const ScaleEstimator& est, const std::vector<Image>& val,
                                   const TrainConfig& cfg, int step, RngStream& rng) {
    require(!val.empty(), "validation_scale_mse: empty validation set");
    double total = 0.0;
    for (std::size_t k = 0; k < val.size(); ++k) {
        RngStream sub = rng.substream(k);
        const PixelSchedule s = build_schedule(val[k], ScheduleConfig{cfg.gamma, cfg.total_steps});
        const Grid x_i = forward_jump(val[k], alpha_bar(s, step), sub);
        total += mse(estimate_scale(est, x_i, step), s.scale);
    }
    return total / static_cast<double>(val.size());
}

// Mean per-head MSE at step i over a validation set (slot j for head j).
inline std::vector<double> validation_head_mse(ReversePredictor& net, const ScaleEstimator& est,
                                               const std::vector<Image>& val,
                                               const TrainConfig& cfg, int i, RngStream& rng) {
    require(!val.empty(), "validation_head_mse: empty validation set");
    std::vector<double> acc(static_cast<std::size_t>(i) + 1, 0.0);
    ForwardOptions fwd;
    fwd.record_stride = 1;
    fwd.record_states = true;
    for (std::size_t k = 0; k < val.size(); ++k) {
        RngStream sub = rng.substream(k);
        const PixelSchedule s = build_schedule(val[k], ScheduleConfig{cfg.gamma, cfg.total_steps});
        const ScheduleTable tab = materialize(s);
        const ForwardTrajectory traj = simulate_chain(s, i, sub, fwd);
        std::vector<Grid> targets(static_cast<std::size_t>(i) + 1);
        for (int j = 1; j <= i; ++j)
            targets[static_cast<std::size_t>(j)] =
                composite_noise(traj.states[static_cast<std::size_t>(j)], val[k],
                                tab.alpha_bar[static_cast<std::size_t>(j)]);
        const Grid scale = estimate_scale(est, traj.final_state, i);
        const std::vector<double> err = head_errors(net, traj.final_state, scale, i, targets);
        for (int j = 1; j <= i; ++j) acc[static_cast<std::size_t>(j)] += err[static_cast<std::size_t>(j)];
    }
    for (double& e : acc) e /= static_cast<double>(val.size());
    return acc;
}

// The information-theoretic floor for the same task, averaged over the set.
inline std::vector<double> validation_ideal_head_mse(const std::vector<Image>& val,
                                                     const TrainConfig& cfg, int i) {
    require(!val.empty(), "validation_ideal_head_mse: empty validation set");
    std::vector<double> acc(static_cast<std::size_t>(i) + 1, 0.0);
    for (const Image& img : val) {
        const ScheduleTable tab =
            materialize(build_schedule(img, ScheduleConfig{cfg.gamma, cfg.total_steps}));
        for (int j = 1; j <= i; ++j)
            acc[static_cast<std::size_t>(j)] += ideal_head_mse(tab, i, j).mean();
    }
    for (double& e : acc) e /= static_cast<double>(val.size());
    return acc;
}

// Reconstruction quality of the two learned routes from step i: the one-shot
// reverse loop driven by predicted noise bundles, and the direct inversion of
// the scale estimate.
struct RouteComparison {
    double mean_ssim_loop = 0.0;    // reverse loop with predicted noises
    double mean_ssim_direct = 0.0;  // invert_scale(estimated scale)
    int count = 0;
};

inline RouteComparison compare_routes(ReversePredictor& net, const ScaleEstimator& est,
                                      const std::vector<Image>& val, const TrainConfig& cfg,
                                      int i, RngStream& rng, double noise_scale = 0.0) {
    require(!val.empty(), "compare_routes: empty validation set");
    RouteComparison rc;
    const ScaleFn scale_fn = make_estimator_scale_fn(est, i);
    const NoiseBundleFn noise_fn = make_predictor_noise_fn(net);
    SamplingOptions opt;
    opt.noise_scale = noise_scale;
    for (std::size_t k = 0; k < val.size(); ++k) {
        RngStream sub = rng.substream(k);
        const PixelSchedule s = build_schedule(val[k], ScheduleConfig{cfg.gamma, cfg.total_steps});
        const Grid x_i = simulate_chain(s, i, sub, ForwardOptions{1, false}).final_state;
        const SamplingResult res =
            run_sampling_algorithm(x_i, i, cfg.total_steps, scale_fn, noise_fn, sub, opt);
        rc.mean_ssim_loop += ssim(res.final_state, val[k]);
        rc.mean_ssim_direct += ssim(invert_scale(res.scale_estimate, cfg.gamma), val[k]);
        ++rc.count;
    }
    rc.mean_ssim_loop /= static_cast<double>(rc.count);
    rc.mean_ssim_direct /= static_cast<double>(rc.count);
    return rc;
}

}  // namespace pixdiff::learner
