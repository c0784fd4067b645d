#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pixdiff/forward.hpp"
#include "pixdiff/rng.hpp"
#include "pixdiff/schedule.hpp"
#include "pixdiff/synthetic.hpp"
#include "test_util.hpp"

using namespace pixdiff;

TEST(Forward, StepFormula) {
    const Grid x = testutil::image_from(2, 1, {0.6, 0.2});
    Grid alpha = testutil::image_from(2, 1, {0.9, 0.5});
    const Grid eps = testutil::image_from(2, 1, {-0.3, 1.7});
    const Grid out = forward_step(x, alpha, eps);
    EXPECT_DOUBLE_EQ(out[0], std::sqrt(0.9) * 0.6 + std::sqrt(1.0 - 0.9) * -0.3);
    EXPECT_DOUBLE_EQ(out[1], std::sqrt(0.5) * 0.2 + std::sqrt(1.0 - 0.5) * 1.7);

    // scalar-retention overload agrees with a constant grid
    const Grid out2 = forward_step(x, 0.9, eps);
    Grid alpha_const = testutil::constant_image(2, 1, 0.9);
    const Grid out3 = forward_step(x, alpha_const, eps);
    EXPECT_DOUBLE_EQ(out2[0], out3[0]);
    EXPECT_DOUBLE_EQ(out2[1], out3[1]);
}

TEST(Forward, StepValidation) {
    const Grid x = testutil::constant_image(2, 1, 0.5);
    const Grid eps = testutil::constant_image(2, 1, 0.0);
    Grid bad_alpha = testutil::image_from(2, 1, {0.9, 1.5});
    EXPECT_THROW(forward_step(x, bad_alpha, eps), std::invalid_argument);
    EXPECT_THROW(forward_step(x, 0.0, eps), std::invalid_argument);
    const Grid wrong = testutil::constant_image(3, 1, 0.5);
    Grid alpha = testutil::constant_image(2, 1, 0.9);
    EXPECT_THROW(forward_step(wrong, alpha, eps), std::invalid_argument);
}

TEST(Forward, JumpAtStepZeroIsIdentity) {
    const Image x0 = testutil::image_from(2, 1, {0.3, 0.8});
    const Grid abar = testutil::constant_image(2, 1, 1.0);
    const Grid eps = testutil::constant_image(2, 1, 5.0);
    const Grid out = forward_jump(x0, abar, eps);
    EXPECT_DOUBLE_EQ(out[0], 0.3);  // sqrt(1-1) = 0 kills the noise term exactly
    EXPECT_DOUBLE_EQ(out[1], 0.8);
}

TEST(Forward, CompositeNoiseInvertsJump) {
    const Image x0 = testutil::image_from(2, 2, {0.2, 0.5, 0.7, 1.0});
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{13.0, 40});
    RngStream rng(21, 0);
    for (int i : {1, 7, 40}) {
        const Grid abar = alpha_bar(s, i);
        const Grid eps = sample_standard_normal(x0.shape, rng);
        const Grid x_i = forward_jump(x0, abar, eps);
        const Grid back = composite_noise(x_i, x0, abar);
        for (std::size_t p = 0; p < x0.size(); ++p) EXPECT_NEAR(back[p], eps[p], 1e-11);
    }
}

TEST(Forward, ChainAndJumpShareTheMarginal) {
    // Both the step-by-step chain and the closed-form jump must land on
    // N(sqrt(abar) x0, 1 - abar); compare sample moments of each against the
    // shared theory values at ~5 standard errors.
    const Image x0 = testutil::constant_image(1, 1, 0.5);
    const ScheduleConfig cfg{15.0, 20};
    const PixelSchedule s = build_schedule(x0, cfg);
    const int i = 7, n = 20000;
    const double abar = alpha_bar(s, i)[0];
    const double tmean = std::sqrt(abar) * 0.5;
    const double tvar = 1.0 - abar;

    RngStream rng_chain(31, 0), rng_jump(31, 1);
    double cs = 0.0, css = 0.0, js = 0.0, jss = 0.0;
    for (int k = 0; k < n; ++k) {
        Grid x = x0;
        for (int step = 1; step <= i; ++step) x = forward_step(x, s.alpha, rng_chain);
        cs += x[0];
        css += x[0] * x[0];
        const Grid xj = forward_jump(x0, alpha_bar(s, i), rng_jump);
        js += xj[0];
        jss += xj[0] * xj[0];
    }
    const double se_mean = std::sqrt(tvar / n);
    const double se_var = tvar * std::sqrt(2.0 / (n - 1));
    const double cmean = cs / n, cvar = css / n - cmean * cmean;
    const double jmean = js / n, jvar = jss / n - jmean * jmean;
    EXPECT_NEAR(cmean, tmean, 5.0 * se_mean);
    EXPECT_NEAR(cvar, tvar, 5.0 * se_var);
    EXPECT_NEAR(jmean, tmean, 5.0 * se_mean);
    EXPECT_NEAR(jvar, tvar, 5.0 * se_var);
}

TEST(Forward, TrajectoryRecordingAndStepZeroStats) {
    const Image x0 = make_synthetic_image(16, 16);
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{12.0, 30});
    RngStream rng(41, 0);
    ForwardOptions opt;
    opt.record_stride = 10;
    const ForwardTrajectory traj = simulate_chain(s, 30, rng, opt);

    ASSERT_EQ(traj.report.rows.size(), 4u);  // steps 0, 10, 20, 30
    EXPECT_EQ(traj.report.rows[0].step, 0);
    EXPECT_EQ(traj.report.rows[3].step, 30);
    ASSERT_EQ(traj.states.size(), 4u);

    // At step 0 the state is the clean image and the theory columns collapse.
    const StepStats& st0 = traj.report.rows[0];
    EXPECT_DOUBLE_EQ(st0.mean_raw, x0.mean());
    EXPECT_DOUBLE_EQ(st0.var_raw, x0.variance());
    EXPECT_DOUBLE_EQ(st0.theory_mean, x0.mean());
    EXPECT_NEAR(st0.theory_var, x0.variance(), 1e-15);
    EXPECT_DOUBLE_EQ(st0.mean_resid, 0.0);
    EXPECT_DOUBLE_EQ(st0.var_resid, 0.0);
}

TEST(Forward, ResidualsAreStandardNormal) {
    // The implied composite noise of a state is exactly the injected noise
    // mixture, so across many pixels its moments must match N(0,1).
    const Image x0 = make_synthetic_image(128, 128);
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{50.0, 500});
    RngStream rng(42, 0);
    ForwardOptions opt;
    opt.record_stride = 100;
    opt.record_states = false;
    const ForwardTrajectory traj = simulate_chain(s, 500, rng, opt);
    for (const StepStats& st : traj.report.rows) {
        if (st.step == 0) continue;
        EXPECT_NEAR(st.mean_resid, 0.0, 0.04) << "step " << st.step;  // SE ~ 1/128
        EXPECT_NEAR(st.var_resid, 1.0, 0.06) << "step " << st.step;
    }
}

TEST(Forward, RawMomentsTrackTheory) {
    const Image x0 = make_synthetic_image(64, 64);
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{30.0, 100});
    RngStream rng(43, 0);
    ForwardOptions opt;
    opt.record_stride = 25;
    const ForwardTrajectory traj = simulate_chain(s, 100, rng, opt);
    for (const StepStats& st : traj.report.rows) {
        EXPECT_NEAR(st.mean_raw, st.theory_mean, 0.05) << "step " << st.step;
        EXPECT_NEAR(st.var_raw, st.theory_var, 0.08) << "step " << st.step;
    }
}

TEST(Forward, BaselineChainMatchesPixelChainOnUniformImage) {
    // On a constant image the pixel-wise process has a single retention; a
    // baseline whose betas bracket it tightly is statistically the same
    // process. Theory columns depend only on the schedules and must agree to
    // high precision; raw moments agree statistically.
    const double v = 0.5, gamma = 15.0;
    const int T = 30;
    const Image x0 = testutil::constant_image(64, 64, v);
    const PixelSchedule sp = build_schedule(x0, ScheduleConfig{gamma, T});
    const double beta = 1.0 - sp.alpha[0];
    const BaselineSchedule sb = baseline_linear(BaselineConfig{beta - 1e-12, beta + 1e-12, T});

    RngStream rng_p(44, 0), rng_b(44, 1);
    ForwardOptions opt;
    opt.record_stride = 5;
    opt.record_states = false;
    const ForwardTrajectory tp = simulate_chain(sp, T, rng_p, opt);
    const ForwardTrajectory tb = simulate_chain(x0, sb, T, rng_b, opt);

    ASSERT_EQ(tp.report.rows.size(), tb.report.rows.size());
    for (std::size_t k = 0; k < tp.report.rows.size(); ++k) {
        const StepStats& a = tp.report.rows[k];
        const StepStats& b = tb.report.rows[k];
        EXPECT_EQ(a.step, b.step);
        EXPECT_NEAR(a.theory_mean, b.theory_mean, 1e-9);
        EXPECT_NEAR(a.theory_var, b.theory_var, 1e-9);
        EXPECT_NEAR(a.mean_raw, b.mean_raw, 0.08);  // two independent draws
        EXPECT_NEAR(a.var_raw, b.var_raw, 0.10);
    }
}

TEST(Forward, EnsembleReportDeterministicAndAveraged) {
    const Image x0 = testutil::constant_image(4, 4, 0.4);
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{10.0, 12});
    ForwardOptions opt;
    opt.record_states = false;

    auto simulate = [&](RngStream& run_rng) {
        return simulate_chain(s, 12, run_rng, opt).report;
    };
    RngStream rng_a(45, 0), rng_b(45, 0);
    const TrajectoryReport ra = ensemble_report(5, rng_a, simulate);
    const TrajectoryReport rb = ensemble_report(5, rng_b, simulate);
    ASSERT_EQ(ra.rows.size(), rb.rows.size());
    for (std::size_t k = 0; k < ra.rows.size(); ++k) {
        EXPECT_DOUBLE_EQ(ra.rows[k].mean_raw, rb.rows[k].mean_raw);
        EXPECT_DOUBLE_EQ(ra.rows[k].var_raw, rb.rows[k].var_raw);
    }

    // Averaging five runs tightens the raw moments around theory.
    for (const StepStats& st : ra.rows) {
        EXPECT_NEAR(st.mean_raw, st.theory_mean, 0.35);
        EXPECT_NEAR(st.var_raw, st.theory_var, 0.6);
    }
}

TEST(Forward, ExportReportCsv) {
    const Image x0 = testutil::constant_image(4, 4, 0.6);
    const PixelSchedule s = build_schedule(x0, ScheduleConfig{10.0, 12});
    RngStream rng(46, 0);
    const ForwardTrajectory traj = simulate_chain(s, 12, rng, {});
    const std::string path = "forward_export.csv";
    export_report_csv(traj.report, path);
    const std::string text = testutil::slurp(path);
    EXPECT_NE(text.find("step,mean_raw,var_raw,mean_resid,var_resid,theory_mean,theory_var"),
              std::string::npos);
    std::remove(path.c_str());
}
