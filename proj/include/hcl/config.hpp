#pragma once

#include "hcl/measurement.hpp"
#include "hcl/params.hpp"
#include "hcl/scenarios.hpp"
#include "hcl/tracking.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hcl {

enum class ExperimentKind { Static, Dynamic, Params };
enum class Method { Convex, Ekf, Both };

/// True noise: one range STD and bearing concentration for every
/// node-node and node-anchor channel, one pair for velocities.
struct NoiseSpec {
    double range_sigma = 0.5;
    double bearing_kappa = 1000;
    double step_sigma = 0.1;
    double heading_kappa = 1000;

    NoiseParams params() const;
};

struct ScenarioSpec {
    std::string type = "lawnmower"; // lawnmower | lap | helix
    LawnmowerParams lawnmower;
    LapParams lap;
    HelixParams helix;

    Scenario build() const;
};

struct OutlierSpec {
    bool enabled = false;
    std::string target = "link"; // link: one node-anchor range; node: every range of `node`
    int node = 1;
    int anchor = 0;
    int start = 40; // first contaminated tick
    int end = 100;  // one past the last contaminated tick
    double factor = 5;
    double probability = 0.1;
};

struct EkfSpec {
    std::vector<double> grid{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1};
    int tuning_trials = 10;
    double init_std = 2;
};

struct StaticSpec {
    StaticNetworkParams network;
    int configurations = 10;
};

struct ParamsSpec {
    NoiseSpec defaults{1.0, 100, 0.5, 100};
    EstimatorLimits limits;
    bool compare_known = true;
};

struct ExperimentConfig {
    std::string name;
    ExperimentKind kind = ExperimentKind::Dynamic;
    ScenarioSpec scenario;
    NoiseSpec noise;
    TrackerConfig tracker;
    Method method = Method::Both;
    EkfSpec ekf;
    OutlierSpec outliers;
    int metric_start = 20; // ticks before this are excluded from summaries
    StaticSpec statics;
    ParamsSpec params;
    int trials = 100;
    std::uint64_t seed = 1;
    /// Canonical JSON text of the parsed file, hashed into the manifest.
    std::string canonical;
};

/// Parses a JSON experiment description. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

} // namespace hcl
