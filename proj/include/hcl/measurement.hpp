#pragma once

#include "hcl/graph.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace hcl {

using Rng = std::mt19937_64;

/// Gaussian STD (meters) and von Mises-Fisher concentration of one
/// measurement channel.
struct ChannelNoise {
    double sigma = 1.0;
    double kappa = 1.0;
};

/// Noise parameters per node-node edge, node-anchor link and node velocity.
/// Lookups fall back to the per-kind default; a lookup with neither an
/// override nor a default is a configuration error.
struct NoiseParams {
    std::optional<ChannelNoise> edge_default;
    std::optional<ChannelNoise> link_default;
    std::optional<ChannelNoise> velocity_default;
    std::map<std::pair<int, int>, ChannelNoise> edge_overrides;   // key (min id, max id)
    std::map<std::pair<int, int>, ChannelNoise> link_overrides;   // key (node, anchor)
    std::map<int, ChannelNoise> velocity_overrides;

    /// Same range STD and bearing concentration for node-node and
    /// node-anchor channels; velocity channel uses its own pair.
    static NoiseParams uniform(double range_sigma, double bearing_kappa, double step_sigma, double heading_kappa);

    ChannelNoise edge(int i, int j) const;
    ChannelNoise link(int node, int anchor) const;
    ChannelNoise velocity(int node) const;

    /// Throws ConfigError unless every channel used by `snapshot` resolves
    /// to strictly positive, finite values. Velocity channels are checked
    /// only when `with_velocity` is set.
    void validate_for(const NetworkSnapshot& snapshot, bool with_velocity) const;
};

struct RangeBearing {
    double range = 0.0;
    std::optional<Vec> bearing; // unit vector of (x_i - x_j) or (x_i - a_k)
};

/// Measured velocity beta = heading * speed.
struct VelocityReading {
    Vec heading;       // unit
    double speed = 0;  // m/s, >= 0

    Vec beta() const { return heading * speed; }
};

/// All measurements of one tick. `edges` and `links` are parallel to the
/// snapshot's edge and link lists. `velocities` is either empty (no
/// velocity data) or has one entry per node.
struct Dataset {
    int tick = 0;
    double dt = 1.0;
    std::vector<RangeBearing> edges;
    std::vector<RangeBearing> links;
    std::vector<VelocityReading> velocities;

    bool operator==(const Dataset& other) const;
};

/// Equivalent angular STD (radians) of a concentration, via the series
/// for the mean resultant length. Throws DomainError when the series
/// argument leaves (0, 1).
double kappa_to_sigma_eq(double kappa);

/// Expected projection E[u . mean] of a vMF(mean, kappa) draw in R^p.
double mean_resultant_length(double kappa, int dim);

/// One draw from vMF(mean, kappa). p = 2 uses the von Mises angle
/// (Best-Fisher rejection), p = 3 the closed-form inverse CDF of the polar
/// cosine.
Vec sample_vmf(const Vec& mean, double kappa, Rng& rng);

/// Noisy measurements for one tick. `true_velocities` may be empty, in
/// which case no velocity readings are produced; otherwise it holds one
/// true velocity per node.
Dataset synthesize_dataset(const NetworkSnapshot& snapshot, std::span<const Vec> true_velocities,
                           const NoiseParams& params, double dt, Rng& rng);

struct OutlierSelection {
    std::vector<std::pair<int, int>> edges; // node-node pairs
    std::vector<std::pair<int, int>> links; // (node, anchor)

    /// Every range measurement that involves `node`.
    static OutlierSelection all_of_node(const NetworkSnapshot& snapshot, int node);
};

struct OutlierInjection {
    Dataset data;
    int corrupted = 0;
};

/// Replaces each selected range, independently with `probability`, by
/// `factor` times the true distance. Bearings and velocities are untouched.
OutlierInjection inject_outliers(const Dataset& dataset, const NetworkSnapshot& snapshot,
                                 const OutlierSelection& selection, double factor, double probability, Rng& rng);

/// Delimited text, one measurement per line:
///   range <i> <j> <tick> <d>
///   bearing <i> <j> <tick> <u...>
///   anchor_range <i> <k> <tick> <r>
///   anchor_bearing <i> <k> <tick> <q...>
///   velocity <i> <tick> <speed> <heading...>
/// preceded by "dataset <tick> <dt> <dim>" and ended by "end".
void write_dataset(std::ostream& os, const NetworkSnapshot& snapshot, const Dataset& data);
Dataset read_dataset(std::istream& is, const NetworkSnapshot& snapshot);

} // namespace hcl
