// pixdiff command-line tool: forward simulation, schedule analytics, toy
// training, and reverse-time sampling, all file-based and deterministic
// given (config, seed).
//
// Exit codes: 0 success, 1 runtime failure (including failed analyze
// verdicts), 2 config rejection.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pixdiff/analytics.hpp"
#include "pixdiff/csv.hpp"
#include "pixdiff/forward.hpp"
#include "pixdiff/grid.hpp"
#include "pixdiff/image_io.hpp"
#include "pixdiff/learner/serialize.hpp"
#include "pixdiff/learner/train.hpp"
#include "pixdiff/metrics.hpp"
#include "pixdiff/posterior.hpp"
#include "pixdiff/rng.hpp"
#include "pixdiff/schedule.hpp"
#include "pixdiff/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pixdiff;

namespace {

// Root for default output directories: $PIXDIFF_OUT if set, else ./out.
std::string default_out_root() {
    if (const char* env = std::getenv("PIXDIFF_OUT")) return env;
    return "out";
}

// Applies values from an optional JSON config file to every bound option the
// user did not pass explicitly (flags override file).
class ConfigMerge {
public:
    template <typename T>
    void bind(CLI::Option* opt, std::string key, T& var) {
        actions_.push_back([opt, key = std::move(key), &var](const json& j) {
            if (opt->count() == 0 && j.contains(key)) var = j.at(key).get<T>();
        });
    }

    void apply(const std::string& config_path) const {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        require(in.good(), "cannot open config file " + config_path);
        json j = json::parse(in);
        for (const auto& a : actions_) a(j);
    }

private:
    std::vector<std::function<void(const json&)>> actions_;
};

void write_manifest(const std::string& dir, const json& effective) {
    std::ofstream out(fs::path(dir) / "manifest.json");
    require(out.good(), "cannot write manifest in " + dir);
    out << effective.dump(2) << '\n';
}

std::string ensure_dir(std::string dir, const char* command) {
    if (dir.empty()) dir = default_out_root() + "/" + command;
    fs::create_directories(dir);
    return dir;
}

// Shared frame export: strided states as 8-bit PGM plus a manifest CSV with
// per-step mean/variance.
void write_frames(const std::string& dir, const std::string& prefix,
                  const std::vector<int>& steps, const std::vector<Grid>& states,
                  int frame_stride) {
    require(steps.size() == states.size(), "write_frames: steps/states mismatch");
    csv::Writer manifest(dir + "/" + prefix + "_frames.csv", {"step", "mean", "var", "file"});
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (frame_stride <= 0) break;
        const bool last = k + 1 == steps.size();
        if (steps[k] % frame_stride != 0 && !last) continue;
        char name[64];
        std::snprintf(name, sizeof name, "%s_%05d.pgm", prefix.c_str(), steps[k]);
        save_image(dir + "/" + name, states[k], 0.0);
        manifest.row(std::string(name),
                     {static_cast<double>(steps[k]), states[k].mean(), states[k].variance()});
    }
}

Image load_or_make_image(const std::string& image_path, double uniform_value, int width,
                         int height) {
    if (!image_path.empty()) return load_image(image_path).image;
    if (uniform_value > 0.0) {
        require(uniform_value <= 1.0, "uniform pixel value must lie in (0,1]");
        Image img(Shape{width, height, 1});
        img.fill(uniform_value);
        return img;
    }
    return make_synthetic_image(width, height);
}

// ---------------------------------------------------------------------------
// forward

struct ForwardArgs {
    std::string config, out, image;
    double gamma = 20.0;
    int steps = 200;
    std::uint64_t seed = 7;
    int width = 128, height = 128;
    double uniform = 0.0;  // > 0: constant image of this value
    double beta_min = 1e-4, beta_max = 0.02;
    double mean_tol = 0.05, var_tol = 0.05;
    int record_stride = 1;
    int frame_stride = 0;  // 0: auto (steps / 8)
    bool baseline_only = false;
    bool pixelwise_only = false;
};

int run_forward(const ForwardArgs& a) {
    const Image img = load_or_make_image(a.image, a.uniform, a.width, a.height);
    // Reject bad configs before touching the output directory.
    if (!a.baseline_only) validate_schedule_config(ScheduleConfig{a.gamma, a.steps}, img);
    if (!a.pixelwise_only) baseline_linear(BaselineConfig{a.beta_min, a.beta_max, a.steps});

    const std::string dir = ensure_dir(a.out, "forward");
    const int frame_stride = a.frame_stride > 0 ? a.frame_stride : std::max(1, a.steps / 8);
    ForwardOptions opt;
    opt.record_stride = a.record_stride;
    opt.record_states = true;

    save_image(dir + "/input.pgm", img, 0.0);
    csv::Writer summary(dir + "/convergence_summary.csv",
                        {"schedule", "total_steps", "convergence_steps", "mean_tol", "var_tol"});

    if (!a.baseline_only) {
        const PixelSchedule sched = build_schedule(img, ScheduleConfig{a.gamma, a.steps});
        RngStream rng(a.seed, 0);
        const ForwardTrajectory traj = simulate_chain(sched, a.steps, rng, opt);
        export_report_csv(traj.report, dir + "/forward_pixelwise.csv");
        write_frames(dir, "pixelwise", traj.steps, traj.states, frame_stride);
        summary.row(std::string("pixelwise"),
                    {static_cast<double>(a.steps),
                     static_cast<double>(
                         convergence_steps(traj.report, a.steps, a.mean_tol, a.var_tol)),
                     a.mean_tol, a.var_tol});
    }
    if (!a.pixelwise_only) {
        const BaselineSchedule base = baseline_linear(BaselineConfig{a.beta_min, a.beta_max, a.steps});
        RngStream rng(a.seed, 1);
        const ForwardTrajectory traj = simulate_chain(img, base, a.steps, rng, opt);
        export_report_csv(traj.report, dir + "/forward_baseline.csv");
        write_frames(dir, "baseline", traj.steps, traj.states, frame_stride);
        summary.row(std::string("baseline_linear"),
                    {static_cast<double>(a.steps),
                     static_cast<double>(
                         convergence_steps(traj.report, a.steps, a.mean_tol, a.var_tol)),
                     a.mean_tol, a.var_tol});
    }
    write_manifest(dir, json{{"command", "forward"},
                             {"gamma", a.gamma},
                             {"steps", a.steps},
                             {"seed", a.seed},
                             {"image", a.image},
                             {"uniform", a.uniform},
                             {"width", a.width},
                             {"height", a.height},
                             {"beta_min", a.beta_min},
                             {"beta_max", a.beta_max},
                             {"mean_tol", a.mean_tol},
                             {"var_tol", a.var_tol},
                             {"record_stride", a.record_stride},
                             {"frame_stride", frame_stride},
                             {"baseline_only", a.baseline_only},
                             {"pixelwise_only", a.pixelwise_only}});
    std::printf("forward: wrote %s\n", dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string config, out;
    double gamma = 20.0;
    double ramp = 1.0;  // coefficient of the time-ramped baseline rate
};

int run_analyze(const AnalyzeArgs& a) {
    const std::string dir = ensure_dir(a.out, "analyze");
    require(a.gamma > 0.0, "analyze: gamma must be positive");
    require(a.ramp > 0.0, "analyze: ramp coefficient must be positive");

    const std::vector<double> snr_pixels{0.1, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> rate_pixels = default_rate_pixel_grid();
    const std::vector<double> rate_times = default_rate_time_grid();
    export_snr_csv(a.gamma, snr_pixels, rate_times, dir + "/snr_curves.csv");

    const BoundsCheckReport bounds = snr_bounds_report(a.gamma, rate_pixels, rate_times);
    const RateOrderingReport rate = snr_rate_ordering_report(a.gamma, rate_pixels, rate_times);
    export_rate_ordering_csv(rate, dir + "/rate_ordering.csv");

    const DecayOrderingReport decay = decay_ordering_report(
        a.gamma, a.ramp, default_decay_pixel_grid(), default_decay_time_grid());
    export_decay_ordering_csv(decay, dir + "/decay_ordering.csv");

    // Expected trajectories and speeds for a few representative pixels.
    {
        csv::Writer w(dir + "/expected_paths.csv",
                      {"x0", "t", "path_ramp", "path_pixel", "path_pixel_ramp", "speed_ramp",
                       "speed_pixel"});
        for (double x0 : {0.1, 0.5, 1.0})
            for (double t : linspace(0.01, 1.0, 100))
                w.row({x0, t, expected_path_time_ramp(x0, a.ramp, t),
                       expected_path_pixel_rate(x0, a.gamma, t),
                       expected_path_pixel_time_ramp(x0, a.gamma, a.ramp, t),
                       expected_path_time_ramp_speed(x0, a.ramp, t),
                       expected_path_pixel_rate_speed(x0, a.gamma, t)});
    }

    csv::Writer verdicts(dir + "/verdicts.csv", {"check", "pass", "detail"});
    verdicts.row(std::string("snr_bounds_strict"),
                 {bounds.all_strict ? 1.0 : 0.0, static_cast<double>(bounds.violations)});
    verdicts.row(std::string("rate_ordering"),
                 {rate.all_ordered ? 1.0 : 0.0, rate.valid_prefix_t});
    verdicts.row(std::string("decay_ordering"),
                 {decay.all_ordered ? 1.0 : 0.0, decay.valid_prefix_t});

    write_manifest(dir, json{{"command", "analyze"}, {"gamma", a.gamma}, {"ramp", a.ramp}});

    std::printf("snr_bounds_strict: %s (%d/%d cells violate)\n",
                bounds.all_strict ? "pass" : "FAIL", bounds.violations, bounds.cells);
    std::printf("rate_ordering: %s (valid up to t=%.6g)\n", rate.all_ordered ? "pass" : "FAIL",
                rate.valid_prefix_t);
    std::printf("decay_ordering: %s (valid up to t=%.6g)\n", decay.all_ordered ? "pass" : "FAIL",
                decay.valid_prefix_t);
    if (decay.has_violation)
        std::printf("decay_ordering first violation: x0=%.6g t=%.6g\n", decay.violation_x0,
                    decay.violation_t);
    const bool all_pass = bounds.all_strict && rate.all_ordered && decay.all_ordered;
    std::printf("analyze: wrote %s; overall %s\n", dir.c_str(), all_pass ? "pass" : "FAIL");
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config, out;
    std::string what = "both";  // scale | predictor | both
    int iterations = 2000;
    int batch = 8;
    double gamma = 15.0;
    int steps = 20;
    double lr = 1e-3;
    std::uint64_t seed = 123;
    std::uint64_t corpus_seed = 77;
    int corpus_size = 512;
    int width = 8, height = 8;
    int est_enc = 32, est_bottleneck = 16;
    int hidden = 64, head_hidden = 32;
    std::string resume_scale, resume_predictor;
};

int run_train(const TrainArgs& a) {
    using namespace pixdiff::learner;
    const std::string dir = ensure_dir(a.out, "train");
    require(a.what == "scale" || a.what == "predictor" || a.what == "both",
            "train: --what must be scale, predictor, or both");
    require(a.what != "predictor" || !a.resume_scale.empty(),
            "train: --what predictor needs --resume-scale (a frozen estimator checkpoint)");

    TrainConfig cfg;
    cfg.gamma = a.gamma;
    cfg.total_steps = a.steps;
    cfg.iterations = a.iterations;
    cfg.batch_size = a.batch;
    cfg.adam.lr = a.lr;
    cfg.seed = a.seed;
    cfg.estimator_enc = a.est_enc;
    cfg.estimator_bottleneck = a.est_bottleneck;
    cfg.predictor_hidden = a.hidden;
    cfg.predictor_head_hidden = a.head_hidden;

    CorpusConfig cc;
    cc.count = a.corpus_size;
    cc.width = a.width;
    cc.height = a.height;
    cc.seed = a.corpus_seed;
    const SyntheticCorpus corpus = make_corpus(cc);
    const Shape shape{a.width, a.height, 1};

    write_manifest(dir, json{{"command", "train"},
                             {"what", a.what},
                             {"iterations", a.iterations},
                             {"batch", a.batch},
                             {"gamma", a.gamma},
                             {"steps", a.steps},
                             {"lr", a.lr},
                             {"seed", a.seed},
                             {"corpus_seed", a.corpus_seed},
                             {"corpus_size", a.corpus_size},
                             {"width", a.width},
                             {"height", a.height},
                             {"resume_scale", a.resume_scale},
                             {"resume_predictor", a.resume_predictor}});

    csv::Writer gradcheck(dir + "/gradcheck.csv", {"network", "max_rel_err", "checked", "pass"});
    csv::Writer eval(dir + "/eval.csv", {"metric", "value"});

    ScaleTrainer scale_tr = a.resume_scale.empty()
                                ? ScaleTrainer::fresh(shape, cfg)
                                : load_scale_trainer(a.resume_scale, cfg);
    if (a.what == "scale" || a.what == "both") {
        scale_tr.run(corpus.train, a.iterations);
        if (scale_tr.log.diverged) throw std::runtime_error("scale estimator diverged");
        export_train_log_csv(scale_tr.log, dir + "/scale_loss.csv");
        save_scale_trainer(dir + "/scale_model.bin", scale_tr);

        // Quick sampled gradient verification on a fixed batch element.
        RngStream gc_rng(cfg.seed, 2);
        const PixelSchedule s =
            build_schedule(corpus.train.front(), ScheduleConfig{cfg.gamma, cfg.total_steps});
        const Grid x_i = forward_jump(corpus.train.front(), alpha_bar(s, cfg.total_steps / 2), gc_rng);
        auto loss = [&] {
            zero_grad(scale_tr.net);
            return scale_loss_and_grad(scale_tr.net, x_i, cfg.total_steps / 2, s.scale);
        };
        const GradCheckReport rep = gradient_check(params(scale_tr.net), loss, gc_rng, 4);
        gradcheck.row(std::string("scale_estimator"),
                      {rep.max_rel_err, static_cast<double>(rep.checked),
                       rep.max_rel_err < 1e-4 ? 1.0 : 0.0});

        RngStream eval_rng(cfg.seed, 3);
        eval.row(std::string("scale_val_mse"),
                 {validation_scale_mse(scale_tr.net, corpus.val, cfg, cfg.total_steps / 2,
                                       eval_rng)});
    }

    if (a.what == "predictor" || a.what == "both") {
        PredictorTrainer pred_tr = a.resume_predictor.empty()
                                       ? PredictorTrainer::fresh(shape, cfg)
                                       : load_predictor_trainer(a.resume_predictor, cfg);
        pred_tr.run(corpus.train, scale_tr.net, a.iterations);
        if (pred_tr.log.diverged) throw std::runtime_error("reverse predictor diverged");
        export_train_log_csv(pred_tr.log, dir + "/predictor_loss.csv");
        save_predictor_trainer(dir + "/predictor_model.bin", pred_tr);

        RngStream gc_rng(cfg.seed, 4);
        const PixelSchedule s =
            build_schedule(corpus.train.front(), ScheduleConfig{cfg.gamma, cfg.total_steps});
        const ScheduleTable tab = materialize(s);
        const int i = cfg.total_steps / 2;
        ForwardOptions fo;
        fo.record_stride = 1;
        fo.record_states = true;
        const ForwardTrajectory traj = simulate_chain(s, i, gc_rng, fo);
        std::vector<Grid> targets(static_cast<std::size_t>(i) + 1);
        for (int j = 1; j <= i; ++j)
            targets[static_cast<std::size_t>(j)] =
                composite_noise(traj.states[static_cast<std::size_t>(j)], corpus.train.front(),
                                tab.alpha_bar[static_cast<std::size_t>(j)]);
        const Grid sc = estimate_scale(scale_tr.net, traj.final_state, i);
        auto loss = [&] {
            zero_grad(pred_tr.net);
            return predictor_loss_and_grad(pred_tr.net, traj.final_state, sc, i, targets);
        };
        const GradCheckReport rep = gradient_check(params(pred_tr.net), loss, gc_rng, 4);
        gradcheck.row(std::string("reverse_predictor"),
                      {rep.max_rel_err, static_cast<double>(rep.checked),
                       rep.max_rel_err < 1e-4 ? 1.0 : 0.0});

        RngStream eval_rng(cfg.seed, 5);
        const std::vector<double> head =
            validation_head_mse(pred_tr.net, scale_tr.net, corpus.val, cfg, i, eval_rng);
        const std::vector<double> ideal = validation_ideal_head_mse(corpus.val, cfg, i);
        for (int j = 1; j <= i; ++j) {
            char label[64];
            std::snprintf(label, sizeof label, "head_mse_j%d_at_i%d", j, i);
            eval.row(std::string(label), {head[static_cast<std::size_t>(j)]});
            std::snprintf(label, sizeof label, "ideal_mse_j%d_at_i%d", j, i);
            eval.row(std::string(label), {ideal[static_cast<std::size_t>(j)]});
        }
        RngStream route_rng(cfg.seed, 6);
        const RouteComparison rc = compare_routes(pred_tr.net, scale_tr.net, corpus.val, cfg,
                                                  std::max(1, cfg.total_steps / 4), route_rng);
        eval.row(std::string("route_ssim_loop"), {rc.mean_ssim_loop});
        eval.row(std::string("route_ssim_direct"), {rc.mean_ssim_direct});
    }
    std::printf("train: wrote %s\n", dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
    std::string config, out;
    std::string scale_model, predictor_model;
    bool oracle_scale = false, oracle_noise = false;
    int from_step = 0;  // 0: T/4
    double noise_scale = 1.0;
    double gamma = 15.0;
    int steps = 20;
    std::uint64_t seed = 9;
    std::uint64_t corpus_seed = 77;
    int corpus_index = 480;  // defaults to a held-out corpus image
    int width = 8, height = 8;
    std::string image;
    bool sweep = false;  // reconstruct from i in {T/4, T/2, T}
    int count = 8;       // images per sweep point
    int frame_stride = 1;
};

int run_sample(const SampleArgs& a) {
    using namespace pixdiff::learner;
    const std::string dir = ensure_dir(a.out, "sample");
    require(a.noise_scale >= 0.0, "sample: noise-scale must be >= 0");
    require(a.steps >= 1, "sample: steps must be >= 1");

    // Ground truth image(s): explicit file, or procedurally generated.
    require(a.count >= 1, "sample: count must be >= 1");
    std::vector<Image> images;
    if (!a.image.empty()) {
        images.push_back(load_image(a.image).image);
    } else {
        for (int k = 0; k < a.count; ++k)
            images.push_back(make_corpus_image(a.corpus_seed,
                                               static_cast<std::uint64_t>(a.corpus_index + k),
                                               a.width, a.height));
    }
    const Shape shape = images.front().shape;

    // Callables: learned models from disk unless oracle flags ask otherwise.
    ScaleTrainer scale_tr;
    PredictorTrainer pred_tr;
    long* backbone_evals = nullptr;
    if (!a.oracle_scale || !a.oracle_noise) {
        TrainConfig cfg;
        cfg.gamma = a.gamma;
        cfg.total_steps = a.steps;
        if (!a.oracle_scale) {
            require(!a.scale_model.empty(), "sample: --scale-model required (or --oracle-scale)");
            scale_tr = load_scale_trainer(a.scale_model, cfg);
            require(scale_tr.net.shape == shape, "sample: scale model shape mismatch");
            require(scale_tr.cfg.gamma == a.gamma && scale_tr.cfg.total_steps == a.steps,
                    "sample: scale model was trained with different gamma/steps");
        }
        if (!a.oracle_noise) {
            require(!a.predictor_model.empty(),
                    "sample: --predictor-model required (or --oracle-noise)");
            pred_tr = load_predictor_trainer(a.predictor_model, cfg);
            require(pred_tr.net.shape == shape, "sample: predictor model shape mismatch");
            require(pred_tr.cfg.gamma == a.gamma && pred_tr.cfg.total_steps == a.steps,
                    "sample: predictor model was trained with different gamma/steps");
            backbone_evals = &pred_tr.net.backbone_evals;
        }
    }

    std::vector<int> from_steps;
    if (a.sweep) {
        for (int i : {a.steps / 4, a.steps / 2, a.steps}) {
            const int clamped = std::max(1, i);
            bool dup = false;
            for (int existing : from_steps) dup = dup || existing == clamped;
            if (!dup) from_steps.push_back(clamped);
        }
    } else {
        from_steps.push_back(a.from_step > 0 ? a.from_step : std::max(1, a.steps / 4));
    }
    for (int i : from_steps)
        require(i >= 1 && i <= a.steps, "sample: from-step out of [1, steps]");

    csv::Writer ssim_csv(dir + "/ssim.csv",
                         {"from_step", "image", "ssim", "predictor_invocations"});
    csv::Writer sweep_csv(dir + "/reconstruction_sweep.csv",
                          {"from_step", "mean_ssim", "images"});

    for (const int i : from_steps) {
        double ssim_sum = 0.0;
        for (std::size_t k = 0; k < images.size(); ++k) {
            const Image& x0 = images[k];
            const ScaleFn scale_fn = a.oracle_scale ? make_oracle_scale_fn(x0, a.gamma)
                                                    : make_estimator_scale_fn(scale_tr.net, i);
            const NoiseBundleFn noise_fn = a.oracle_noise
                                               ? make_oracle_noise_fn(x0, a.steps)
                                               : make_predictor_noise_fn(pred_tr.net);
            const PixelSchedule sched = build_schedule(x0, ScheduleConfig{a.gamma, a.steps});
            RngStream rng(a.seed, static_cast<std::uint64_t>(i) * 1000 + k);
            const Grid x_i = simulate_chain(sched, i, rng, ForwardOptions{1, false}).final_state;

            const long evals_before = backbone_evals ? *backbone_evals : 0;
            SamplingOptions opt;
            opt.noise_scale = a.noise_scale;
            opt.record_states = true;
            const SamplingResult res =
                run_sampling_algorithm(x_i, i, a.steps, scale_fn, noise_fn, rng, opt);
            const long evals_used = backbone_evals ? *backbone_evals - evals_before
                                                   : res.predictor_invocations;

            char name[96];
            std::snprintf(name, sizeof name, "x0_hat_step%03d_img%03zu.pgm", i, k);
            save_image(dir + "/" + std::string(name), res.final_state, 0.0);
            if (k == 0) {
                char prefix[64];
                std::snprintf(prefix, sizeof prefix, "reverse_step%03d", i);
                write_frames(dir, prefix, res.steps, res.states, a.frame_stride);
            }
            const double s = ssim(res.final_state, x0);
            ssim_sum += s;
            ssim_csv.row({static_cast<double>(i), static_cast<double>(k), s,
                          static_cast<double>(evals_used)});
            std::printf("sample: from_step=%d image=%zu ssim=%.4f predictor_invocations=%ld\n", i,
                        k, s, evals_used);
        }
        sweep_csv.row({static_cast<double>(i), ssim_sum / static_cast<double>(images.size()),
                       static_cast<double>(images.size())});
    }

    write_manifest(dir, json{{"command", "sample"},
                             {"scale_model", a.scale_model},
                             {"predictor_model", a.predictor_model},
                             {"oracle_scale", a.oracle_scale},
                             {"oracle_noise", a.oracle_noise},
                             {"from_step", a.from_step},
                             {"noise_scale", a.noise_scale},
                             {"gamma", a.gamma},
                             {"steps", a.steps},
                             {"seed", a.seed},
                             {"corpus_seed", a.corpus_seed},
                             {"corpus_index", a.corpus_index},
                             {"width", a.width},
                             {"height", a.height},
                             {"image", a.image},
                             {"sweep", a.sweep},
                             {"count", a.count},
                             {"frame_stride", a.frame_stride}});
    std::printf("sample: wrote %s\n", dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pixel-value-dependent diffusion schedules: simulate, analyze, train, sample"};
    app.require_subcommand(1);

    ForwardArgs fa;
    AnalyzeArgs aa;
    TrainArgs ta;
    SampleArgs sa;
    ConfigMerge fm, am, tm, sm;

    CLI::App* fwd = app.add_subcommand("forward", "simulate forward chains and convergence");
    fwd->add_option("--config", fa.config, "JSON config file (flags override)");
    fm.bind(fwd->add_option("--out", fa.out, "output directory"), "out", fa.out);
    fm.bind(fwd->add_option("--gamma", fa.gamma, "schedule rate"), "gamma", fa.gamma);
    fm.bind(fwd->add_option("--steps", fa.steps, "total steps T"), "steps", fa.steps);
    fm.bind(fwd->add_option("--seed", fa.seed, "RNG seed"), "seed", fa.seed);
    fm.bind(fwd->add_option("--image", fa.image, "input PGM/PPM (default: synthetic)"), "image",
            fa.image);
    fm.bind(fwd->add_option("--uniform", fa.uniform, "use a constant image of this value"),
            "uniform", fa.uniform);
    fm.bind(fwd->add_option("--width", fa.width, "synthetic width"), "width", fa.width);
    fm.bind(fwd->add_option("--height", fa.height, "synthetic height"), "height", fa.height);
    fm.bind(fwd->add_option("--beta-min", fa.beta_min, "baseline beta_min"), "beta_min",
            fa.beta_min);
    fm.bind(fwd->add_option("--beta-max", fa.beta_max, "baseline beta_max"), "beta_max",
            fa.beta_max);
    fm.bind(fwd->add_option("--mean-tol", fa.mean_tol, "convergence mean tolerance"), "mean_tol",
            fa.mean_tol);
    fm.bind(fwd->add_option("--var-tol", fa.var_tol, "convergence variance tolerance"), "var_tol",
            fa.var_tol);
    fm.bind(fwd->add_option("--record-stride", fa.record_stride, "record stats every k steps"),
            "record_stride", fa.record_stride);
    fm.bind(fwd->add_option("--frame-stride", fa.frame_stride, "PGM frame stride (0: auto)"),
            "frame_stride", fa.frame_stride);
    fm.bind(fwd->add_flag("--baseline-only", fa.baseline_only, "skip the pixel-wise run"),
            "baseline_only", fa.baseline_only);
    fm.bind(fwd->add_flag("--pixelwise-only", fa.pixelwise_only, "skip the baseline run"),
            "pixelwise_only", fa.pixelwise_only);

    CLI::App* ana = app.add_subcommand("analyze", "SNR analytics and ordering verdicts");
    ana->add_option("--config", aa.config, "JSON config file (flags override)");
    am.bind(ana->add_option("--out", aa.out, "output directory"), "out", aa.out);
    am.bind(ana->add_option("--gamma", aa.gamma, "schedule rate"), "gamma", aa.gamma);
    am.bind(ana->add_option("--ramp", aa.ramp, "time-ramp coefficient of the reference schedule"),
            "ramp", aa.ramp);

    CLI::App* trn = app.add_subcommand("train", "train the toy networks on a synthetic corpus");
    trn->add_option("--config", ta.config, "JSON config file (flags override)");
    tm.bind(trn->add_option("--out", ta.out, "output directory"), "out", ta.out);
    tm.bind(trn->add_option("--what", ta.what, "scale | predictor | both"), "what", ta.what);
    tm.bind(trn->add_option("--iterations", ta.iterations, "training iterations"), "iterations",
            ta.iterations);
    tm.bind(trn->add_option("--batch", ta.batch, "batch size"), "batch", ta.batch);
    tm.bind(trn->add_option("--gamma", ta.gamma, "schedule rate"), "gamma", ta.gamma);
    tm.bind(trn->add_option("--steps", ta.steps, "total steps T"), "steps", ta.steps);
    tm.bind(trn->add_option("--lr", ta.lr, "Adam learning rate"), "lr", ta.lr);
    tm.bind(trn->add_option("--seed", ta.seed, "training seed"), "seed", ta.seed);
    tm.bind(trn->add_option("--corpus-seed", ta.corpus_seed, "corpus seed"), "corpus_seed",
            ta.corpus_seed);
    tm.bind(trn->add_option("--corpus-size", ta.corpus_size, "corpus image count"), "corpus_size",
            ta.corpus_size);
    tm.bind(trn->add_option("--width", ta.width, "corpus image width"), "width", ta.width);
    tm.bind(trn->add_option("--height", ta.height, "corpus image height"), "height", ta.height);
    tm.bind(trn->add_option("--est-enc", ta.est_enc, "estimator encoder width"), "est_enc",
            ta.est_enc);
    tm.bind(trn->add_option("--est-bottleneck", ta.est_bottleneck, "estimator bottleneck width"),
            "est_bottleneck", ta.est_bottleneck);
    tm.bind(trn->add_option("--hidden", ta.hidden, "predictor backbone width"), "hidden",
            ta.hidden);
    tm.bind(trn->add_option("--head-hidden", ta.head_hidden, "predictor per-head width"),
            "head_hidden", ta.head_hidden);
    tm.bind(trn->add_option("--resume-scale", ta.resume_scale, "scale checkpoint to resume"),
            "resume_scale", ta.resume_scale);
    tm.bind(trn->add_option("--resume-predictor", ta.resume_predictor,
                            "predictor checkpoint to resume"),
            "resume_predictor", ta.resume_predictor);

    CLI::App* smp = app.add_subcommand("sample", "reverse-time sampling / reconstruction");
    smp->add_option("--config", sa.config, "JSON config file (flags override)");
    sm.bind(smp->add_option("--out", sa.out, "output directory"), "out", sa.out);
    sm.bind(smp->add_option("--scale-model", sa.scale_model, "scale estimator checkpoint"),
            "scale_model", sa.scale_model);
    sm.bind(smp->add_option("--predictor-model", sa.predictor_model,
                            "reverse predictor checkpoint"),
            "predictor_model", sa.predictor_model);
    sm.bind(smp->add_flag("--oracle-scale", sa.oracle_scale, "use the true image scale"),
            "oracle_scale", sa.oracle_scale);
    sm.bind(smp->add_flag("--oracle-noise", sa.oracle_noise, "use conditional-mean noise bundles"),
            "oracle_noise", sa.oracle_noise);
    sm.bind(smp->add_option("--from-step", sa.from_step, "start step i (0: T/4)"), "from_step",
            sa.from_step);
    sm.bind(smp->add_option("--noise-scale", sa.noise_scale, "stochastic term multiplier"),
            "noise_scale", sa.noise_scale);
    sm.bind(smp->add_option("--gamma", sa.gamma, "schedule rate"), "gamma", sa.gamma);
    sm.bind(smp->add_option("--steps", sa.steps, "total steps T"), "steps", sa.steps);
    sm.bind(smp->add_option("--seed", sa.seed, "RNG seed"), "seed", sa.seed);
    sm.bind(smp->add_option("--corpus-seed", sa.corpus_seed, "corpus seed"), "corpus_seed",
            sa.corpus_seed);
    sm.bind(smp->add_option("--corpus-index", sa.corpus_index, "corpus image index"),
            "corpus_index", sa.corpus_index);
    sm.bind(smp->add_option("--width", sa.width, "corpus image width"), "width", sa.width);
    sm.bind(smp->add_option("--height", sa.height, "corpus image height"), "height", sa.height);
    sm.bind(smp->add_option("--image", sa.image, "ground-truth image file"), "image", sa.image);
    sm.bind(smp->add_flag("--sweep", sa.sweep, "reconstruct from i in {T/4, T/2, T}"), "sweep",
            sa.sweep);
    sm.bind(smp->add_option("--count", sa.count, "images per start step"), "count", sa.count);
    sm.bind(smp->add_option("--frame-stride", sa.frame_stride, "reverse frame stride"),
            "frame_stride", sa.frame_stride);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        if (fwd->parsed()) {
            fm.apply(fa.config);
            return run_forward(fa);
        }
        if (ana->parsed()) {
            am.apply(aa.config);
            return run_analyze(aa);
        }
        if (trn->parsed()) {
            tm.apply(ta.config);
            return run_train(ta);
        }
        if (smp->parsed()) {
            sm.apply(sa.config);
            return run_sample(sa);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
