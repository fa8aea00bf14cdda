#include "hcl/scenarios.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace hcl {

namespace {

/// Planar path built from straight pieces and circular turns, sampled by
/// arc length. A zero-radius turn is an instant change of heading.
class TurtlePath {
public:
    void straight(double length) { pieces_.push_back({length, 0.0, 0.0}); }
    void turn(double radius, double angle) { pieces_.push_back({radius * std::abs(angle), radius, angle}); }

    double length() const
    {
        double total = 0;
        for (const auto& p : pieces_) {
            total += p.length;
        }
        return total;
    }

    struct Pose {
        Eigen::Vector2d position;
        double heading;
        bool turning;
    };

    Pose at(double s) const
    {
        Eigen::Vector2d pos(0.0, 0.0);
        double heading = 0.0;
        s = std::clamp(s, 0.0, length());
        for (const auto& p : pieces_) {
            const bool turn = p.angle != 0.0;
            if (p.length == 0.0) {
                heading += p.angle;
                continue;
            }
            const double run = std::min(s, p.length);
            if (!turn) {
                pos += run * Eigen::Vector2d(std::cos(heading), std::sin(heading));
            } else {
                const double side = p.angle > 0 ? 1.0 : -1.0;
                const Eigen::Vector2d centre =
                    pos + side * p.radius * Eigen::Vector2d(-std::sin(heading), std::cos(heading));
                const double swept = side * run / p.radius;
                const double start = std::atan2(pos.y() - centre.y(), pos.x() - centre.x());
                pos = centre + p.radius * Eigen::Vector2d(std::cos(start + swept), std::sin(start + swept));
                heading += swept;
            }
            if (s <= p.length) {
                return {pos, heading, turn};
            }
            s -= p.length;
        }
        return {pos, heading, false};
    }

private:
    struct Piece {
        double length;
        double radius;
        double angle;
    };
    std::vector<Piece> pieces_;
};

Vec to_vec(const Eigen::Vector2d& v)
{
    Vec out(2);
    out << v.x(), v.y();
    return out;
}

void fill_velocities(Scenario& sc)
{
    sc.velocities.assign(sc.nodes.size(), {});
    for (int t = 1; t < sc.ticks(); ++t) {
        for (int i = 0; i < sc.node_count(); ++i) {
            sc.velocities[t].push_back((sc.nodes[t][i] - sc.nodes[t - 1][i]) / sc.dt);
        }
    }
    if (sc.ticks() > 1) {
        sc.velocities[0] = sc.velocities[1];
    } else if (sc.ticks() == 1) {
        sc.velocities[0].assign(sc.node_count(), Vec::Zero(sc.dim));
    }
}

void require_positive(double v, const char* what)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(what) + " must be positive");
    }
}

} // namespace

NetworkSnapshot Scenario::snapshot_at(int t, double radius, const BearingPolicy& policy) const
{
    if (t < 0 || t >= ticks()) {
        throw ConfigError("tick outside the scenario");
    }
    return build_snapshot(nodes[t], anchors[t], radius, policy, t);
}

Scenario lawnmower(const LawnmowerParams& p)
{
    require_positive(p.leg_length, "leg length");
    require_positive(p.spacing, "leg spacing");
    require_positive(p.speed, "speed");
    require_positive(p.dt, "tick duration");
    require_positive(p.lateral, "lateral offset");
    require_positive(p.anchor_gap, "anchor gap");
    if (p.legs < 1 || p.turn_radius < 0.0 || p.turn_radius > p.spacing / 2) {
        throw ConfigError("lawnmower needs at least one leg and 0 <= turn radius <= spacing / 2");
    }
    TurtlePath path;
    const double quarter = std::numbers::pi / 2;
    for (int leg = 0; leg < p.legs; ++leg) {
        path.straight(p.leg_length);
        if (leg + 1 < p.legs) {
            const double side = leg % 2 == 0 ? 1.0 : -1.0;
            path.turn(p.turn_radius, side * quarter);
            path.straight(p.spacing - 2 * p.turn_radius);
            path.turn(p.turn_radius, side * quarter);
        }
    }
    Scenario sc;
    sc.name = "lawnmower";
    sc.dim = 2;
    sc.dt = p.dt;
    const double step = p.speed * p.dt;
    const int ticks = static_cast<int>(std::floor((path.length() - p.anchor_gap) / step)) + 1;
    if (ticks < 2) {
        throw ConfigError("lawnmower path is shorter than the anchor gap");
    }
    const Eigen::Vector2d shift(0.0, p.lateral);
    for (int t = 0; t < ticks; ++t) {
        const double lead = p.anchor_gap + t * step;
        const auto mid = path.at(lead - p.anchor_gap / 2);
        // The U-turn connector counts as turning even with square corners.
        const double u_turn = (std::numbers::pi - 2) * p.turn_radius + p.spacing;
        const bool on_leg = std::fmod(lead - p.anchor_gap / 2, p.leg_length + u_turn) <= p.leg_length;
        sc.nodes.push_back({to_vec(mid.position - shift), to_vec(mid.position + shift)});
        sc.anchors.push_back({to_vec(path.at(lead).position), to_vec(path.at(lead - p.anchor_gap).position)});
        sc.curved.push_back(!on_leg);
    }
    fill_velocities(sc);
    return sc;
}

Scenario lap(const LapParams& p)
{
    require_positive(p.straight, "straight length");
    require_positive(p.radius, "turn radius");
    require_positive(p.lane, "lane offset");
    require_positive(p.speed, "speed");
    require_positive(p.dt, "tick duration");
    if (p.laps < 1 || p.lane >= p.radius || p.anchor_lane < 0.0 || p.anchor_lane >= p.radius ||
        p.anchor_lead < 0.0) {
        throw ConfigError("lap lanes must fit inside the turn radius");
    }
    TurtlePath path;
    for (int k = 0; k < p.laps; ++k) {
        path.straight(p.straight);
        path.turn(p.radius, std::numbers::pi);
        path.straight(p.straight);
        path.turn(p.radius, std::numbers::pi);
    }
    auto lane_point = [&](double s, double offset) {
        const auto pose = path.at(s);
        const Eigen::Vector2d left(-std::sin(pose.heading), std::cos(pose.heading));
        return to_vec(pose.position + offset * left);
    };
    Scenario sc;
    sc.name = "lap";
    sc.dim = 2;
    sc.dt = p.dt;
    const double step = p.speed * p.dt;
    const int ticks = static_cast<int>(std::floor((path.length() - p.anchor_lead) / step)) + 1;
    for (int t = 0; t < ticks; ++t) {
        const double s = t * step;
        const double mid = s + p.anchor_lead / 2;
        // Node 0 on the inner lane, node 1 on the outer lane.
        sc.nodes.push_back({lane_point(mid, p.lane), lane_point(mid, -p.lane)});
        sc.anchors.push_back({lane_point(s + p.anchor_lead, p.anchor_lane), lane_point(s, -p.anchor_lane)});
        sc.curved.push_back(path.at(mid).turning);
    }
    fill_velocities(sc);
    return sc;
}

Scenario helix(const HelixParams& p)
{
    require_positive(p.radius, "helix radius");
    require_positive(p.lane, "lane offset");
    require_positive(p.xy_speed, "speed");
    require_positive(p.descent, "descent rate");
    require_positive(p.dt, "tick duration");
    if (p.ticks < 2 || p.lane >= p.radius || p.anchor_lead < 0.0) {
        throw ConfigError("helix needs at least two ticks and a lane inside the radius");
    }
    Scenario sc;
    sc.name = "helix";
    sc.dim = 3;
    sc.dt = p.dt;
    auto point = [](double radius, double angle, double z) {
        Vec v(3);
        v << radius * std::cos(angle), radius * std::sin(angle), z;
        return v;
    };
    const double lead = p.anchor_lead / p.radius;
    for (int t = 0; t < p.ticks; ++t) {
        const double angle = p.xy_speed * t * p.dt / p.radius;
        const double z = -p.descent * t * p.dt;
        sc.nodes.push_back({point(p.radius - p.lane, angle + lead, z), point(p.radius + p.lane, angle + lead, z)});
        sc.anchors.push_back({point(p.radius, angle, z - p.anchor_rise), point(p.radius, angle + lead, z + p.anchor_rise),
                              point(p.radius, angle + 2 * lead, z)});
        sc.curved.push_back(true);
    }
    fill_velocities(sc);
    return sc;
}

NetworkSnapshot StaticNetwork::snapshot() const
{
    return build_snapshot(nodes, anchors, radius);
}

namespace {

bool far_enough(const Vec& c, const std::vector<Vec>& others, double min_sep)
{
    return std::all_of(others.begin(), others.end(), [&](const Vec& o) { return (c - o).norm() >= min_sep; });
}

} // namespace

StaticNetwork random_static_network(const StaticNetworkParams& params, Rng& rng)
{
    require_positive(params.area, "area");
    if (params.anchors < 0 || params.vehicles - params.anchors < 1 || !(params.connectivity > 0.0) ||
        params.connectivity > 1.0) {
        throw ConfigError("static network needs at least one node and a connectivity in (0, 1]");
    }
    const double side = std::sqrt(params.area);
    std::uniform_real_distribution<double> coord(0.0, side);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<Vec> vehicles;
        int tries = 0;
        while (static_cast<int>(vehicles.size()) < params.vehicles && tries++ < 100000) {
            Vec c(2);
            c << coord(rng), coord(rng);
            if (far_enough(c, vehicles, params.min_separation)) {
                vehicles.push_back(std::move(c));
            }
        }
        if (static_cast<int>(vehicles.size()) < params.vehicles) {
            throw ConfigError("cannot place vehicles with the requested separation");
        }
        std::vector<double> distances;
        for (std::size_t a = 0; a < vehicles.size(); ++a) {
            for (std::size_t b = a + 1; b < vehicles.size(); ++b) {
                distances.push_back((vehicles[a] - vehicles[b]).norm());
            }
        }
        std::sort(distances.begin(), distances.end());
        const auto rank = static_cast<std::size_t>(std::max(1.0, std::round(params.connectivity * distances.size())));
        std::shuffle(vehicles.begin(), vehicles.end(), rng);
        StaticNetwork net;
        net.radius = distances[std::min(rank, distances.size()) - 1];
        net.anchors.assign(vehicles.begin(), vehicles.begin() + params.anchors);
        net.nodes.assign(vehicles.begin() + params.anchors, vehicles.end());
        try {
            net.snapshot();
            return net;
        } catch (const DisconnectedNetwork&) {
        }
    }
    throw ConfigError("no connected static network found");
}

void write_trajectory(std::ostream& os, const Scenario& sc)
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "tick,kind,id,x,y" << (sc.dim == 3 ? ",z" : "") << ",curved\n";
    for (int t = 0; t < sc.ticks(); ++t) {
        auto row = [&](const char* kind, int id, const Vec& v) {
            os << t << ',' << kind << ',' << id;
            for (Eigen::Index d = 0; d < v.size(); ++d) {
                os << ',' << v[d];
            }
            os << ',' << (sc.curved[t] ? 1 : 0) << '\n';
        };
        for (int i = 0; i < sc.node_count(); ++i) {
            row("node", i, sc.nodes[t][i]);
        }
        for (std::size_t k = 0; k < sc.anchors[t].size(); ++k) {
            row("anchor", static_cast<int>(k), sc.anchors[t][k]);
        }
    }
    os.precision(old_precision);
}

std::vector<StreamTick> measurement_stream(const Scenario& scenario, const NoiseParams& params, Rng& rng,
                                           const OutlierPolicy* outliers)
{
    std::vector<StreamTick> out;
    out.reserve(static_cast<std::size_t>(scenario.ticks()));
    for (int t = 0; t < scenario.ticks(); ++t) {
        StreamTick tick;
        tick.snapshot = scenario.snapshot_at(t);
        tick.data = synthesize_dataset(tick.snapshot, scenario.velocities[t], params, scenario.dt, rng);
        if (outliers != nullptr && outliers->active && outliers->active(t)) {
            auto injected = inject_outliers(tick.data, tick.snapshot, outliers->selection, outliers->factor,
                                            outliers->probability, rng);
            tick.data = std::move(injected.data);
            tick.corrupted = injected.corrupted;
        }
        out.push_back(std::move(tick));
    }
    return out;
}

} // namespace hcl
