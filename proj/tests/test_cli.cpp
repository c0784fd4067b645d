#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() { return std::string(PIXDIFF_CLI_PATH); }

std::string scratch(const std::string& name) {
    const std::string dir = "cli_scratch/" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Parses an all-numeric CSV (header skipped) into rows of doubles.
std::vector<std::vector<double>> parse_csv(const std::string& path) {
    std::ifstream in(path);
    EXPECT_TRUE(bool(in)) << "missing " << path;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

TEST(Cli, ForwardWritesArtifactsDeterministically) {
    const std::string d1 = scratch("fwd1"), d2 = scratch("fwd2");
    const std::string args =
        " forward --gamma 12 --steps 40 --seed 5 --width 32 --height 32 --record-stride 4";
    std::string out;
    ASSERT_EQ(testutil::run_command(cli() + args + " --out " + d1, &out), 0) << out;
    ASSERT_EQ(testutil::run_command(cli() + args + " --out " + d2, &out), 0) << out;

    for (const char* f : {"input.pgm", "forward_pixelwise.csv", "forward_baseline.csv",
                          "convergence_summary.csv", "manifest.json", "pixelwise_frames.csv"})
        EXPECT_TRUE(testutil::file_exists(d1 + "/" + f)) << f;

    // same seed, same bytes
    EXPECT_EQ(testutil::slurp(d1 + "/forward_pixelwise.csv"),
              testutil::slurp(d2 + "/forward_pixelwise.csv"));
    EXPECT_EQ(testutil::slurp(d1 + "/forward_baseline.csv"),
              testutil::slurp(d2 + "/forward_baseline.csv"));
}

TEST(Cli, ForwardRejectsGammaAboveStepCount) {
    const std::string d = "cli_scratch/fwd_reject";
    fs::remove_all(d);
    std::string out;
    const int code = testutil::run_command(
        cli() + " forward --gamma 250 --steps 200 --uniform 0.5 --out " + d, &out);
    EXPECT_EQ(code, 2);  // configuration rejection
    EXPECT_NE(out.find("gamma"), std::string::npos) << out;
    EXPECT_NE(out.find("total_steps"), std::string::npos) << out;
    EXPECT_FALSE(fs::exists(d));  // rejected before any output was created
}

TEST(Cli, ForwardBaselineMatchesPixelwiseOnUniformImage) {
    // At a constant pixel value the image-aware schedule has one retention
    // alpha = e^{-gamma v / T}; a linear baseline pinched around the same
    // beta is the identical process. Deterministic theory columns must agree
    // to ~1e-9; sampled moments agree loosely (independent streams).
    const std::string d = scratch("fwd_uniform");
    // beta = 1 - e^{-15*0.5/30} = 0.22119921692859513
    const std::string args =
        " forward --uniform 0.5 --width 16 --height 16 --gamma 15 --steps 30"
        " --record-stride 5 --beta-min 0.221199216928594 --beta-max 0.221199216928596 --out " + d;
    std::string out;
    ASSERT_EQ(testutil::run_command(cli() + args, &out), 0) << out;

    const auto pix = parse_csv(d + "/forward_pixelwise.csv");
    const auto base = parse_csv(d + "/forward_baseline.csv");
    ASSERT_EQ(pix.size(), base.size());
    for (std::size_t r = 0; r < pix.size(); ++r) {
        EXPECT_DOUBLE_EQ(pix[r][0], base[r][0]);       // step
        EXPECT_NEAR(pix[r][5], base[r][5], 1e-9);      // theory_mean
        EXPECT_NEAR(pix[r][6], base[r][6], 1e-9);      // theory_var
        EXPECT_NEAR(pix[r][1], base[r][1], 0.15);      // mean_raw (stochastic)
        EXPECT_NEAR(pix[r][2], base[r][2], 0.25);      // var_raw
    }
}

TEST(Cli, ForwardHonorsOutputRootEnvVar) {
    const std::string root = scratch("envroot");
    std::string out;
    const std::string cmd = "PIXDIFF_OUT=" + root + " " + cli() +
                            " forward --uniform 0.4 --width 8 --height 8 --gamma 10 --steps 20";
    ASSERT_EQ(testutil::run_command(cmd, &out), 0) << out;
    EXPECT_TRUE(testutil::file_exists(root + "/forward/manifest.json"));
}

TEST(Cli, ConfigFileMergesWithFlagOverride) {
    const std::string d = scratch("cfgmerge");
    const std::string cfg_path = d + "/cfg.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << "{\"gamma\": 15.0, \"steps\": 30, \"uniform\": 0.5, \"width\": 8, \"height\": 8}\n";
    }
    std::string out;
    // --gamma overrides the config; steps/uniform/width/height come from it
    ASSERT_EQ(testutil::run_command(cli() + " forward --config " + cfg_path + " --gamma 12 --out " +
                                        d + "/run",
                                    &out),
              0)
        << out;
    const std::string manifest = testutil::slurp(d + "/run/manifest.json");
    EXPECT_NE(manifest.find("\"gamma\": 12.0"), std::string::npos) << manifest;
    EXPECT_NE(manifest.find("\"steps\": 30"), std::string::npos) << manifest;
    EXPECT_NE(manifest.find("\"uniform\": 0.5"), std::string::npos) << manifest;
}

TEST(Cli, UnknownFlagExitsTwo) {
    std::string out;
    EXPECT_EQ(testutil::run_command(cli() + " forward --no-such-flag", &out), 2);
    EXPECT_EQ(testutil::run_command(cli() + " bogus-subcommand", &out), 2);
}

TEST(Cli, AnalyzeReportsHonestVerdicts) {
    // Over the default full window the decay-ordering claim genuinely fails
    // (it only holds on a time prefix), so analyze must exit nonzero while
    // the bounds and rate-ordering verdicts pass.
    const std::string d = scratch("analyze");
    std::string out;
    const int code = testutil::run_command(cli() + " analyze --out " + d, &out);
    EXPECT_EQ(code, 1) << out;
    EXPECT_NE(out.find("snr_bounds_strict: pass"), std::string::npos) << out;
    EXPECT_NE(out.find("rate_ordering: pass"), std::string::npos) << out;
    EXPECT_NE(out.find("decay_ordering: FAIL"), std::string::npos) << out;
    EXPECT_NE(out.find("first violation"), std::string::npos) << out;

    for (const char* f : {"snr_curves.csv", "rate_ordering.csv", "decay_ordering.csv",
                          "expected_paths.csv", "verdicts.csv", "manifest.json"})
        EXPECT_TRUE(testutil::file_exists(d + "/" + f)) << f;

    const std::string verdicts = testutil::slurp(d + "/verdicts.csv");
    EXPECT_NE(verdicts.find("snr_bounds_strict,1"), std::string::npos);
    EXPECT_NE(verdicts.find("rate_ordering,1"), std::string::npos);
    EXPECT_NE(verdicts.find("decay_ordering,0"), std::string::npos);

    // reruns are byte-identical (pure function of the config)
    const std::string d2 = scratch("analyze2");
    testutil::run_command(cli() + " analyze --out " + d2, &out);
    EXPECT_EQ(testutil::slurp(d + "/snr_curves.csv"), testutil::slurp(d2 + "/snr_curves.csv"));
}

TEST(Cli, TrainThenSampleLearnedModels) {
    // End-to-end miniature: train both networks on a small corpus, then
    // reconstruct with the learned artifacts. Sizes are chosen so the whole
    // round trip stays in the couple-of-seconds range.
    const std::string dt = scratch("train_small");
    const std::string common = " --gamma 10 --steps 12 --width 6 --height 6 --corpus-seed 7";
    std::string out;
    const int code = testutil::run_command(cli() + " train --what both --iterations 120 --batch 4" +
                                               common + " --corpus-size 24 --out " + dt,
                                           &out);
    ASSERT_EQ(code, 0) << out;
    for (const char* f : {"scale_model.bin", "predictor_model.bin", "scale_loss.csv",
                          "predictor_loss.csv", "gradcheck.csv", "eval.csv", "manifest.json"})
        EXPECT_TRUE(testutil::file_exists(dt + "/" + f)) << f;

    // analytic gradients verified on both networks during the run
    const std::string gradcheck = testutil::slurp(dt + "/gradcheck.csv");
    EXPECT_NE(gradcheck.find("scale_estimator"), std::string::npos);
    EXPECT_NE(gradcheck.find("reverse_predictor"), std::string::npos);
    std::istringstream lines(gradcheck);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        EXPECT_EQ(line.substr(line.size() - 2), ",1") << line;  // pass column
    }

    const std::string ds = scratch("sample_small");
    const int scode = testutil::run_command(
        cli() + " sample --scale-model " + dt + "/scale_model.bin --predictor-model " + dt +
            "/predictor_model.bin --from-step 3 --count 2 --corpus-index 20" + common +
            " --out " + ds,
        &out);
    ASSERT_EQ(scode, 0) << out;
    EXPECT_TRUE(testutil::file_exists(ds + "/x0_hat_step003_img000.pgm"));

    const auto rows = parse_csv(ds + "/ssim.csv");
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_DOUBLE_EQ(r[0], 3.0);   // from_step
        EXPECT_GE(r[2], -1.0);         // a valid SSIM value
        EXPECT_LE(r[2], 1.0);
        EXPECT_DOUBLE_EQ(r[3], 1.0);   // exactly one predictor invocation
    }
}

TEST(Cli, TrainScaleResumeIsByteExact) {
    const std::string common =
        " train --what scale --batch 4 --gamma 10 --steps 12 --width 6 --height 6"
        " --corpus-size 16 --corpus-seed 9 --seed 11";
    const std::string da = scratch("resume_full"), db = scratch("resume_half"),
                      dc = scratch("resume_cont");
    std::string out;
    ASSERT_EQ(testutil::run_command(cli() + common + " --iterations 30 --out " + da, &out), 0)
        << out;
    ASSERT_EQ(testutil::run_command(cli() + common + " --iterations 15 --out " + db, &out), 0)
        << out;
    ASSERT_EQ(testutil::run_command(cli() + common + " --iterations 15 --resume-scale " + db +
                                        "/scale_model.bin --out " + dc,
                                    &out),
              0)
        << out;
    EXPECT_EQ(testutil::slurp(da + "/scale_model.bin"), testutil::slurp(dc + "/scale_model.bin"));
}

TEST(Cli, TrainPredictorRequiresFrozenEstimator) {
    std::string out;
    const int code = testutil::run_command(
        cli() + " train --what predictor --iterations 5 --out cli_scratch/pred_noest", &out);
    EXPECT_EQ(code, 2);
    EXPECT_NE(out.find("resume-scale"), std::string::npos) << out;
}

TEST(Cli, SampleOracleRoundTripAndInvocationCount) {
    // Oracle scale + conditional-mean bundle + no stochastic term telescopes
    // back to the clean image: SSIM 1 up to float dust, one invocation.
    const std::string d = scratch("sample_oracle");
    std::string out;
    const int code = testutil::run_command(
        cli() + " sample --oracle-scale --oracle-noise --noise-scale 0 --from-step 5"
                " --count 2 --corpus-index 40 --gamma 15 --steps 20 --width 8 --height 8 --out " +
            d,
        &out);
    ASSERT_EQ(code, 0) << out;
    const auto rows = parse_csv(d + "/ssim.csv");
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_GT(r[2], 0.99999);
        EXPECT_DOUBLE_EQ(r[3], 1.0);
    }
    const auto sweep = parse_csv(d + "/reconstruction_sweep.csv");
    ASSERT_EQ(sweep.size(), 1u);
    EXPECT_GT(sweep[0][1], 0.99999);
}

TEST(Cli, SampleSweepGetsHarderWithDepth) {
    // With the stochastic term active, reconstructions from later start
    // steps accumulate more reverse-time noise: mean SSIM non-increasing
    // across the sweep {T/4, T/2, T} (fixed seed, deterministic).
    const std::string d = scratch("sample_sweep");
    std::string out;
    const int code = testutil::run_command(
        cli() + " sample --oracle-scale --oracle-noise --sweep --count 6 --corpus-index 60"
                " --gamma 15 --steps 20 --width 8 --height 8 --seed 3 --out " + d,
        &out);
    ASSERT_EQ(code, 0) << out;
    const auto sweep = parse_csv(d + "/reconstruction_sweep.csv");
    ASSERT_EQ(sweep.size(), 3u);
    EXPECT_DOUBLE_EQ(sweep[0][0], 5.0);
    EXPECT_DOUBLE_EQ(sweep[1][0], 10.0);
    EXPECT_DOUBLE_EQ(sweep[2][0], 20.0);
    EXPECT_GE(sweep[0][1], sweep[1][1]);
    EXPECT_GE(sweep[1][1], sweep[2][1]);
}

TEST(Cli, SampleMissingModelIsRuntimeFailure) {
    std::string out;
    const int code = testutil::run_command(
        cli() + " sample --scale-model nope.bin --predictor-model nope2.bin --out cli_scratch/mm",
        &out);
    EXPECT_EQ(code, 1);  // missing artifact, not a config rejection
    EXPECT_NE(out.find("cannot open"), std::string::npos) << out;
}
