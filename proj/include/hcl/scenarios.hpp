#pragma once

#include "hcl/graph.hpp"
#include "hcl/measurement.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace hcl {

/// True trajectories of every vehicle. Velocities satisfy
/// x(t) - x(t-1) = beta(t) dt exactly; beta(0) repeats beta(1).
struct Scenario {
    std::string name;
    int dim = 2;
    double dt = 1.0;
    std::vector<std::vector<Vec>> nodes;      // [tick][node]
    std::vector<std::vector<Vec>> anchors;    // [tick][anchor]
    std::vector<std::vector<Vec>> velocities; // [tick][node]
    std::vector<bool> curved;                 // tick lies on a turn

    int ticks() const { return static_cast<int>(nodes.size()); }
    int node_count() const { return nodes.empty() ? 0 : static_cast<int>(nodes.front().size()); }

    /// Disk graph at tick t; an infinite radius connects everything.
    NetworkSnapshot snapshot_at(int t, double radius = std::numeric_limits<double>::infinity(),
                                const BearingPolicy& policy = BearingPolicy::all()) const;
};

struct LawnmowerParams {
    double leg_length = 60;
    double spacing = 20;     // between parallel legs
    double turn_radius = 10; // <= spacing / 2; 0 gives square corners
    int legs = 4;
    double speed = 1;        // along the centre path, m/s
    double dt = 1;
    double lateral = 6;      // nodes sit at +-lateral across the legs
    double anchor_gap = 8;   // second anchor trails the first by this arc length
};

struct LapParams {
    double straight = 40;
    double radius = 15;
    double lane = 4;        // offset between nodes and the centre line
    double anchor_lane = 1; // offset between anchors and the centre line
    double anchor_lead = 3; // arc length between the two anchors
    int laps = 1;
    double speed = 1;
    double dt = 1;
};

struct HelixParams {
    double radius = 20;
    double lane = 4;
    double xy_speed = 1;
    double descent = 0.1;   // z drop per second
    double anchor_lead = 4; // arc length between consecutive anchors
    double anchor_rise = 2; // z spread of the anchors
    int ticks = 300;
    double dt = 1;
};

/// Two nodes either side of two anchors that follow the same boustrophedon
/// path, one behind the other.
Scenario lawnmower(const LawnmowerParams& params);

/// Stadium loop: nodes on the inner and outer lane, anchors near the
/// centre line. Node 1 is the outer node.
Scenario lap(const LapParams& params);

/// Circular motion in xy at constant speed with z decreasing linearly;
/// two nodes on either side of three anchors.
Scenario helix(const HelixParams& params);

struct StaticNetworkParams {
    int vehicles = 10;           // nodes plus anchors
    int anchors = 4;
    double area = 50;            // m^2, square region
    double min_separation = 2;   // between any two vehicles
    double connectivity = 0.8;   // fraction of all vehicle pairs within range
};

struct StaticNetwork {
    std::vector<Vec> nodes;
    std::vector<Vec> anchors;
    double radius = 0;

    NetworkSnapshot snapshot() const;
};

/// Places the vehicles uniformly with the minimum separation, picks the
/// anchors among them at random and sets the disk radius so that the
/// requested fraction of pairs is in range. Redraws until connected.
StaticNetwork random_static_network(const StaticNetworkParams& params, Rng& rng);

/// "tick,kind,id,x,y[,z],curved" rows.
void write_trajectory(std::ostream& os, const Scenario& scenario);

/// Per-tick measurement stream for a scenario. When `outliers` is set it is
/// applied to each tick's data; ticks for which the callback returns no
/// selection stay clean.
struct StreamTick {
    NetworkSnapshot snapshot;
    Dataset data;
    int corrupted = 0;
};

struct OutlierPolicy {
    std::function<bool(int)> active; // tick -> contamination on
    OutlierSelection selection;
    double factor = 5;
    double probability = 0.1;
};

std::vector<StreamTick> measurement_stream(const Scenario& scenario, const NoiseParams& params, Rng& rng,
                                           const OutlierPolicy* outliers = nullptr);

} // namespace hcl
