#include "hcl/config.hpp"

#include "hcl/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace hcl {

using nlohmann::json;

NoiseParams NoiseSpec::params() const
{
    return NoiseParams::uniform(range_sigma, bearing_kappa, step_sigma, heading_kappa);
}

Scenario ScenarioSpec::build() const
{
    if (type == "lawnmower") {
        return hcl::lawnmower(lawnmower);
    }
    if (type == "lap") {
        return hcl::lap(lap);
    }
    if (type == "helix") {
        return hcl::helix(helix);
    }
    throw ConfigError("unknown scenario type '" + type + "'");
}

namespace {

void allow_only(const json& j, const std::string& where, std::initializer_list<const char*> keys)
{
    if (!j.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) {
            known = known || item.key() == k;
        }
        if (!known) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

NoiseSpec read_noise(const json& j, const std::string& where, NoiseSpec n)
{
    allow_only(j, where, {"range_sigma", "bearing_kappa", "step_sigma", "heading_kappa"});
    read(j, "range_sigma", n.range_sigma);
    read(j, "bearing_kappa", n.bearing_kappa);
    read(j, "step_sigma", n.step_sigma);
    read(j, "heading_kappa", n.heading_kappa);
    return n;
}

ScenarioSpec read_scenario(const json& j)
{
    ScenarioSpec s;
    read(j, "type", s.type);
    if (s.type == "lawnmower") {
        allow_only(j, "scenario", {"type", "leg_length", "spacing", "turn_radius", "legs", "speed", "dt", "lateral",
                                   "anchor_gap"});
        auto& p = s.lawnmower;
        read(j, "leg_length", p.leg_length);
        read(j, "spacing", p.spacing);
        read(j, "turn_radius", p.turn_radius);
        read(j, "legs", p.legs);
        read(j, "speed", p.speed);
        read(j, "dt", p.dt);
        read(j, "lateral", p.lateral);
        read(j, "anchor_gap", p.anchor_gap);
    } else if (s.type == "lap") {
        allow_only(j, "scenario",
                   {"type", "straight", "radius", "lane", "anchor_lane", "anchor_lead", "laps", "speed", "dt"});
        auto& p = s.lap;
        read(j, "straight", p.straight);
        read(j, "radius", p.radius);
        read(j, "lane", p.lane);
        read(j, "anchor_lane", p.anchor_lane);
        read(j, "anchor_lead", p.anchor_lead);
        read(j, "laps", p.laps);
        read(j, "speed", p.speed);
        read(j, "dt", p.dt);
    } else if (s.type == "helix") {
        allow_only(j, "scenario",
                   {"type", "radius", "lane", "xy_speed", "descent", "anchor_lead", "anchor_rise", "ticks", "dt"});
        auto& p = s.helix;
        read(j, "radius", p.radius);
        read(j, "lane", p.lane);
        read(j, "xy_speed", p.xy_speed);
        read(j, "descent", p.descent);
        read(j, "anchor_lead", p.anchor_lead);
        read(j, "anchor_rise", p.anchor_rise);
        read(j, "ticks", p.ticks);
        read(j, "dt", p.dt);
    } else {
        throw ConfigError("unknown scenario type '" + s.type + "'");
    }
    return s;
}

void read_solver(const json& j, TrackerConfig& t)
{
    allow_only(j, "solver", {"window", "max_iterations", "tolerance", "momentum", "distributed", "strict_degenerate"});
    read(j, "window", t.window);
    read(j, "max_iterations", t.solver.max_iterations);
    read(j, "tolerance", t.solver.tolerance);
    read(j, "distributed", t.distributed);
    read(j, "strict_degenerate", t.assembly.strict_degenerate);
    std::string momentum = "classic";
    read(j, "momentum", momentum);
    if (momentum == "classic") {
        t.solver.momentum = MomentumRule::Classic;
    } else if (momentum == "listing") {
        t.solver.momentum = MomentumRule::Listing;
    } else {
        throw ConfigError("momentum must be 'classic' or 'listing'");
    }
    if (t.window < 1 || t.solver.max_iterations < 1 || !(t.solver.tolerance > 0.0)) {
        throw ConfigError("solver needs window >= 1, max_iterations >= 1 and a positive tolerance");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    allow_only(j, "config", {"name", "kind", "scenario", "noise", "solver", "method", "ekf", "outliers",
                             "metric_start", "static", "params", "trials", "seed"});
    ExperimentConfig c;
    read(j, "name", c.name);
    std::string kind = "dynamic";
    read(j, "kind", kind);
    if (kind == "static") {
        c.kind = ExperimentKind::Static;
    } else if (kind == "dynamic") {
        c.kind = ExperimentKind::Dynamic;
    } else if (kind == "params") {
        c.kind = ExperimentKind::Params;
    } else {
        throw ConfigError("kind must be static, dynamic or params");
    }
    if (j.contains("scenario")) {
        c.scenario = read_scenario(j.at("scenario"));
    }
    if (j.contains("noise")) {
        c.noise = read_noise(j.at("noise"), "noise", c.noise);
    }
    if (j.contains("solver")) {
        read_solver(j.at("solver"), c.tracker);
    }
    std::string method = "both";
    read(j, "method", method);
    if (method == "convex") {
        c.method = Method::Convex;
    } else if (method == "ekf") {
        c.method = Method::Ekf;
    } else if (method == "both") {
        c.method = Method::Both;
    } else {
        throw ConfigError("method must be convex, ekf or both");
    }
    if (j.contains("ekf")) {
        const auto& e = j.at("ekf");
        allow_only(e, "ekf", {"grid", "tuning_trials", "init_std"});
        read(e, "grid", c.ekf.grid);
        read(e, "tuning_trials", c.ekf.tuning_trials);
        read(e, "init_std", c.ekf.init_std);
        if (c.ekf.grid.empty() || c.ekf.tuning_trials < 1) {
            throw ConfigError("ekf needs a non-empty grid and at least one tuning trial");
        }
    }
    if (j.contains("outliers")) {
        const auto& o = j.at("outliers");
        allow_only(o, "outliers", {"target", "node", "anchor", "start", "end", "factor", "probability"});
        c.outliers.enabled = true;
        read(o, "target", c.outliers.target);
        read(o, "node", c.outliers.node);
        read(o, "anchor", c.outliers.anchor);
        read(o, "start", c.outliers.start);
        read(o, "end", c.outliers.end);
        read(o, "factor", c.outliers.factor);
        read(o, "probability", c.outliers.probability);
        if (c.outliers.target != "link" && c.outliers.target != "node") {
            throw ConfigError("outlier target must be 'link' or 'node'");
        }
    }
    read(j, "metric_start", c.metric_start);
    if (j.contains("static")) {
        const auto& s = j.at("static");
        allow_only(s, "static",
                   {"configurations", "vehicles", "anchors", "area", "min_separation", "connectivity"});
        read(s, "configurations", c.statics.configurations);
        read(s, "vehicles", c.statics.network.vehicles);
        read(s, "anchors", c.statics.network.anchors);
        read(s, "area", c.statics.network.area);
        read(s, "min_separation", c.statics.network.min_separation);
        read(s, "connectivity", c.statics.network.connectivity);
    }
    if (j.contains("params")) {
        const auto& p = j.at("params");
        allow_only(p, "params",
                   {"defaults", "sigma_floor", "kappa_cap", "kappa_floor", "min_samples", "direction", "compare_known"});
        if (p.contains("defaults")) {
            c.params.defaults = read_noise(p.at("defaults"), "params.defaults", c.params.defaults);
        }
        read(p, "sigma_floor", c.params.limits.sigma_floor);
        read(p, "kappa_cap", c.params.limits.kappa_cap);
        read(p, "kappa_floor", c.params.limits.kappa_floor);
        read(p, "min_samples", c.params.limits.min_samples);
        read(p, "compare_known", c.params.compare_known);
        std::string direction = "normalized-difference";
        read(p, "direction", direction);
        if (direction == "normalized-difference") {
            c.params.limits.direction = DirectionEstimator::NormalizedDifference;
        } else if (direction == "aligned") {
            c.params.limits.direction = DirectionEstimator::Aligned;
        } else {
            throw ConfigError("params.direction must be 'normalized-difference' or 'aligned'");
        }
    }
    read(j, "trials", c.trials);
    read(j, "seed", c.seed);
    if (c.trials < 1) {
        throw ConfigError("trials must be at least 1");
    }
    c.canonical = j.dump();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace hcl
