#pragma once

#include "hcl/measurement.hpp"
#include "hcl/params.hpp"
#include "hcl/problem.hpp"
#include "hcl/scenarios.hpp"
#include "hcl/solver.hpp"

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace hcl {

struct TrackerConfig {
    int window = 4; // T0, instants per horizon
    SolverConfig solver;
    bool distributed = false;
    AssemblyOptions assembly;
};

struct TickSolve {
    std::vector<Vec> positions; // estimate at the newest instant, per node
    int iterations = 0;
    bool converged = false;
    std::size_t messages = 0;
    double lipschitz = 0;
};

/// Sliding-horizon solver: each tick re-solves the last T0 ticks, warm
/// started from the previous window (the new instant is predicted with its
/// measured velocity). The window restarts when the edge set changes.
class HorizonTracker {
public:
    explicit HorizonTracker(TrackerConfig config);

    TickSolve step(const NetworkSnapshot& snapshot, const Dataset& data, const NoiseParams& params);

private:
    TrackerConfig config_;
    std::deque<NetworkSnapshot> snapshots_;
    std::deque<Dataset> data_;
    std::vector<int> previous_ticks_;
    std::vector<std::vector<Vec>> previous_; // [tau][node]
};

/// Initial z for a window: positions as given, y, w and s from the
/// differences they relax.
Eigen::VectorXd initial_point(const MeasurementWindow& window, const std::vector<std::vector<Vec>>& positions);

struct TrackRun {
    std::vector<std::vector<Vec>> estimates; // [tick][node]
    long long iterations = 0;
    std::size_t messages = 0;
};

/// Tracks a stream with fixed noise parameters.
TrackRun run_known_params(std::span<const StreamTick> stream, const NoiseParams& params, const TrackerConfig& config);

struct ParamFreeConfig {
    TrackerConfig tracker;
    NoiseParams defaults;
    EstimatorLimits limits;
};

struct ParamFreeRun {
    TrackRun track;
    std::vector<TraceRow> trace;
};

/// Each tick: solve with the current estimates (defaults while warming
/// up), then feed the residuals of the new estimate to the accumulators.
ParamFreeRun run_parameter_free(std::span<const StreamTick> stream, const ParamFreeConfig& config);

} // namespace hcl
