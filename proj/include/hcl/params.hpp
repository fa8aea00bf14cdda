#pragma once

#include "hcl/graph.hpp"
#include "hcl/measurement.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hcl {

/// Concentration from the mean resultant length of unit vectors in R^p:
/// g (p - g^2) / (1 - g^2). Throws DomainError outside [0, 1).
double kappa_estimate(double gamma_bar, int dim);

/// Last few per-tick estimates of one node, keyed by tick (1-based as in
/// the estimation loop).
class PositionHistory {
public:
    static constexpr int capacity = 8;

    void push(int tick, const Vec& position);
    std::optional<Vec> at(int tick) const;

private:
    std::array<std::optional<std::pair<int, Vec>>, capacity> slots_;
};

/// Lagged smoothed difference
///   [5(x(t-3)-x(t-5)) + 4(x(t-2)-x(t-6)) + (x(t-1)-x(t-7))] / 32,
/// which is beta * dt at tick t - 4. Returns nothing while t <= 7 or when
/// the history has a gap (warm-up).
std::optional<Vec> velocity_from_history(const PositionHistory& history, int t);

/// Running sums for one measurement channel.
struct ChannelAccumulator {
    double squared_sum = 0;  // sum of squared range (or travel) residuals
    Vec direction_sum;       // sum of direction residuals
    double aligned_sum = 0;  // sum of measured . estimated directions
    int range_samples = 0;
    int direction_samples = 0;
};

enum class DirectionEstimator {
    /// Mean resultant length of the normalised differences (u - u_hat),
    /// as in the estimation loop. These are not vMF samples and drive the
    /// concentration towards zero.
    NormalizedDifference,
    /// Mean of u . u_hat: each measurement expressed in the frame of its
    /// estimated mean direction.
    Aligned,
};

struct EstimatorLimits {
    double sigma_floor = 1e-3;
    double kappa_cap = 1e6;
    /// Keeps the concentration strictly positive when residual directions
    /// cancel out exactly.
    double kappa_floor = 1e-6;
    /// Estimates replace the defaults once the tick exceeds 7 and a channel
    /// holds this many samples.
    int min_samples = 10;
    DirectionEstimator direction = DirectionEstimator::NormalizedDifference;
};

struct ParamAccumulators {
    int dim = 2;
    int tick = 0; // last tick processed (1-based)
    std::map<std::pair<int, int>, ChannelAccumulator> edges; // (i, j), i < j
    std::map<std::pair<int, int>, ChannelAccumulator> links; // (node, anchor)
    std::map<int, ChannelAccumulator> velocity;
    std::vector<PositionHistory> history; // per node

    explicit ParamAccumulators(int dim = 2, int nodes = 0);
};

/// Accumulates the residuals of tick `t` (1-based, increasing by one per
/// call). `estimates` holds x_hat(t) per node; the velocity residual uses
/// the positions stored at earlier ticks, then x_hat(t) is appended to the
/// history. A zero direction residual (or undefined estimated direction)
/// skips that direction sample.
void residual_update(ParamAccumulators& acc, const NetworkSnapshot& snapshot, std::span<const Vec> estimates,
                     const Dataset& data, int t);

struct ChannelEstimate {
    ChannelNoise noise;
    bool warmup = true;
    bool sigma_clamped = false;
    bool kappa_clamped = false;
};

/// sigma = sqrt(squared_sum / n), kappa from the mean resultant length,
/// both clamped; defaults while the channel is warming up. A channel with
/// range samples but no direction samples keeps the default kappa.
ChannelEstimate estimate_channel(const ChannelAccumulator& acc, int tick, int dim, const ChannelNoise& fallback,
                                 const EstimatorLimits& limits);

struct TraceRow {
    int tick = 0;
    std::string kind; // edge | link | velocity
    int a = 0;
    int b = 0;        // -1 for velocity channels
    double sigma = 0;
    double kappa = 0;
    bool warmup = true;
    bool sigma_clamped = false;
    bool kappa_clamped = false;

    bool operator==(const TraceRow&) const = default;
};

struct CurrentParams {
    NoiseParams params;
    std::vector<TraceRow> rows;
};

/// Parameters to use at tick `acc.tick + 1`: every channel of `snapshot`
/// gets an override, from its estimate or from `defaults`.
CurrentParams current_params(const ParamAccumulators& acc, const NetworkSnapshot& snapshot,
                             const NoiseParams& defaults, const EstimatorLimits& limits);

/// "tick,kind,a,b,sigma,kappa,warmup,sigma_clamped,kappa_clamped"
void write_param_trace(std::ostream& os, std::span<const TraceRow> rows);
std::vector<TraceRow> read_param_trace(std::istream& is);

} // namespace hcl
