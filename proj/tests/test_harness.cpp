#include "hcl/config.hpp"
#include "hcl/errors.hpp"
#include "hcl/harness.hpp"
#include "hcl/metrics.hpp"
#include "hcl/seeds.hpp"
#include "hcl/table.hpp"
#include "hcl/tracking.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace hcl;
using hcl::test::v2;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("hcl_test_" + name);
    fs::remove_all(dir);
    return dir;
}

// Short lap run: few trials and a two-point grid.
ExperimentConfig small_lap(int trials)
{
    auto c = load_config(fs::path(HCL_SOURCE_DIR) / "configs" / "lap-outliers-edge.json");
    c.trials = trials;
    c.ekf.grid = {0.01, 0.02};
    c.ekf.tuning_trials = 2;
    return c;
}

} // namespace

TEST(Metrics, MneExamples)
{
    const std::vector<std::vector<Vec>> truth{{v2(0, 0), v2(1, 1)}};
    EXPECT_EQ(mne({{{v2(0, 0), v2(1, 1)}}}, truth)[0], 0.0);
    EXPECT_DOUBLE_EQ(mne({{{v2(3, 4), v2(4, 5)}}}, truth)[0], 5.0);
    const std::vector<std::vector<Vec>> one{{v2(0, 0)}};
    EXPECT_DOUBLE_EQ(mne({{{v2(1, 0)}}, {{v2(0, 3)}}}, one)[0], 2.0);
    EXPECT_THROW(mne({{{v2(0, 0)}}}, truth), ShapeMismatch);
    EXPECT_DOUBLE_EQ(mpe({{v2(3, 4)}, {v2(0, 1)}}, {v2(0, 0)}), 3.0);
}

TEST(Metrics, SpreadAndOutlierStats)
{
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(mean(v), 2.5);
    EXPECT_DOUBLE_EQ(stddev(v), std::sqrt(1.25));
    EXPECT_DOUBLE_EQ(coefficient_of_variation(v), std::sqrt(1.25) / 2.5);
    //                          0    1    2    3    4    5    6    7    8
    const std::vector<double> e{1.0, 1.0, 1.0, 5.0, 9.0, 4.0, 3.0, 1.5, 1.0};
    const auto s = outlier_stats(e, 0, 3, 4);
    EXPECT_DOUBLE_EQ(s.baseline, 1.0);
    EXPECT_DOUBLE_EQ(s.peak, 9.0);
    EXPECT_EQ(s.recovery, 3); // tick 7 is the first within twice the baseline
    const std::vector<double> never{1.0, 1.0, 5.0, 5.0, 5.0};
    EXPECT_EQ(outlier_stats(never, 0, 2, 2).recovery, 3); // ticks 2, 3 and 4
}

TEST(Table, RoundTrips)
{
    Table t{{"tick", "a", "b"}, {{0, 0.1, 1.0 / 3.0}, {1, -2.5e-300, 1e300}}};
    std::stringstream ss;
    write_table(ss, t);
    EXPECT_EQ(read_table(ss), t);
    std::vector<LongRow> rows{{"lap", "convex", 3, 0.125}, {"lap", "ekf", 4, 2.0 / 7.0}};
    std::stringstream ls;
    write_long(ls, rows);
    EXPECT_EQ(read_long(ls), rows);
    Summary sum{{"mpe_mean", 0.0912}, {"relative_spread", 1.0 / 27.0}};
    std::stringstream sss;
    write_summary(sss, sum);
    EXPECT_EQ(read_summary(sss), sum);
    EXPECT_EQ(parse_number(format_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
    EXPECT_NO_THROW(parse_config(R"({"kind": "dynamic", "trials": 3})"));
    EXPECT_THROW(parse_config(R"({"trails": 3})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"solver": {"windw": 3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"scenario": {"type": "lap", "legs": 3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"trials": 0})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"trials": "many"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"kind": "other"})"), ConfigError);
    EXPECT_THROW(parse_config("{"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, CheckedInConfigsParse)
{
    for (const auto& entry : fs::directory_iterator(fs::path(HCL_SOURCE_DIR) / "configs")) {
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    }
}

TEST(Seeds, StreamsAreDisjoint)
{
    const auto trials = trial_seeds(42, 1000);
    const auto tuning = tuning_seeds(42, 1000);
    std::set<std::uint64_t> all(trials.begin(), trials.end());
    all.insert(tuning.begin(), tuning.end());
    EXPECT_EQ(all.size(), 2000u);
    EXPECT_NE(trial_seeds(43, 1)[0], trials[0]);
    EXPECT_EQ(trial_seeds(42, 5)[4], trials[4]);
}

TEST(Workers, EnvironmentOverride)
{
    setenv("HCL_WORKERS", "3", 1);
    EXPECT_EQ(worker_count_from_env(), 3);
    setenv("HCL_WORKERS", "zero", 1);
    EXPECT_THROW(worker_count_from_env(), ConfigError);
    unsetenv("HCL_WORKERS");
    EXPECT_GE(worker_count_from_env(), 1);
}

TEST(Workers, ParallelForRunsAllAndRethrowsLowest)
{
    std::vector<int> hit(50, 0);
    EXPECT_THROW(parallel_for(50, 4,
                              [&](int i) {
                                  hit[i] = 1;
                                  if (i == 7 || i == 30) {
                                      throw ConfigError("index " + std::to_string(i));
                                  }
                              }),
                 ConfigError);
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
    try {
        parallel_for(50, 4, [](int i) {
            if (i == 7 || i == 30) {
                throw ConfigError("index " + std::to_string(i));
            }
        });
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "index 7");
    }
}

TEST(Tracking, NearNoiselessLawnmower)
{
    auto c = load_config(fs::path(HCL_SOURCE_DIR) / "configs" / "lawnmower.json");
    const auto sc = c.scenario.build();
    Rng rng(1);
    const auto stream = measurement_stream(sc, NoiseParams::uniform(1e-9, 1e15, 1e-9, 1e15), rng);
    const auto run = run_known_params(stream, c.noise.params(), c.tracker);
    const auto err = mne({run.estimates}, sc.nodes);
    EXPECT_LT(*std::max_element(err.begin(), err.end()), 1e-4);
}

TEST(Tracking, DistributedMatchesCentralized)
{
    LapParams p;
    const auto sc = lap(p);
    Rng rng(2);
    const auto stream = measurement_stream(sc, NoiseParams::uniform(0.5, 1000, 0.1, 1000), rng);
    const std::span<const StreamTick> head(stream.data(), 15);
    TrackerConfig cfg;
    cfg.window = 4;
    const auto central = run_known_params(head, NoiseParams::uniform(0.5, 1000, 0.1, 1000), cfg);
    cfg.distributed = true;
    const auto dist = run_known_params(head, NoiseParams::uniform(0.5, 1000, 0.1, 1000), cfg);
    EXPECT_EQ(central.iterations, dist.iterations);
    EXPECT_GT(dist.messages, 0u);
    for (std::size_t t = 0; t < head.size(); ++t) {
        for (int i = 0; i < 2; ++i) {
            EXPECT_EQ(central.estimates[t][i], dist.estimates[t][i]);
        }
    }
}

TEST(Harness, TrialsDoNotDependOnTheTrialCount)
{
    const auto three = run_dynamic(small_lap(3), 1);
    const auto five = run_dynamic(small_lap(5), 2);
    for (const char* m : {"convex", "ekf"}) {
        const auto* a = three.find(m);
        const auto* b = five.find(m);
        ASSERT_TRUE(a && b);
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(a->trials[k], b->trials[k]) << m << " trial " << k;
        }
    }
    EXPECT_EQ(three.ekf_process_noise, five.ekf_process_noise);
}

TEST(Harness, SameConfigGivesIdenticalFiles)
{
    const auto config = small_lap(2);
    const auto a = scratch("repeat_a");
    const auto b = scratch("repeat_b");
    write_dynamic(a, config, run_dynamic(config, 1));
    write_dynamic(b, config, run_dynamic(config, 2));
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path().filename();
    }
    EXPECT_EQ(files, 5); // mne, long, summary, outliers, manifest
    const auto manifest = slurp(a / "manifest.txt");
    EXPECT_NE(manifest.find("config_fnv1a"), std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Harness, OverridesApply)
{
    RunOptions opt;
    opt.trials = 7;
    opt.seed = 99;
    const auto c = with_overrides(small_lap(2), opt);
    EXPECT_EQ(c.trials, 7);
    EXPECT_EQ(c.seed, 99u);
    opt.trials = 0;
    EXPECT_THROW(with_overrides(c, opt), ConfigError);
}

TEST(Harness, Fnv1aKnownValues)
{
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}
