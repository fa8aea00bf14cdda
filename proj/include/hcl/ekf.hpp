#pragma once

#include "hcl/measurement.hpp"
#include "hcl/scenarios.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace hcl {

/// Joint position-only state of every node. Velocities enter as control
/// inputs of the motion model x(t+1) = x(t) + beta(t) dt.
struct EkfState {
    Eigen::VectorXd mean;       // node-major, dim reals per node
    Eigen::MatrixXd covariance;
};

struct EkfTuning {
    double process_noise = 0.05; // variance added per axis and tick (m^2)
    double init_std = 2.0;
};

/// Prediction with the velocity measured at the previous tick.
void ekf_predict(EkfState& state, std::span<const VelocityReading> velocities, double dt, double process_noise);

/// Batch update with every range and bearing of `data`. Ranges use the
/// noise STD, bearings a covariance sigma_eq(kappa)^2 I. Throws Divergence
/// naming the tick when the covariance stops being positive definite.
void ekf_update(EkfState& state, const NetworkSnapshot& snapshot, const Dataset& data, const NoiseParams& params);

/// Per-tick estimates [tick][node]. `initial` is the prior mean at tick 0
/// with covariance init_std^2 I.
std::vector<std::vector<Vec>> ekf_run(std::span<const StreamTick> stream, const std::vector<Vec>& initial,
                                      const NoiseParams& params, const EkfTuning& tuning);

/// Grid point with the smallest `mean_error`; the first one wins ties.
/// Throws ConfigError on an empty grid.
double grid_search_tune(std::span<const double> grid, const std::function<double(double)>& mean_error);

} // namespace hcl
