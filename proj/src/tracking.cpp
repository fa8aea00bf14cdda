#include "hcl/tracking.hpp"

#include "hcl/distributed.hpp"
#include "hcl/errors.hpp"

#include <algorithm>

namespace hcl {

namespace {

bool same_edges(const NetworkSnapshot& a, const NetworkSnapshot& b)
{
    if (a.edges.size() != b.edges.size() || a.links.size() != b.links.size() || a.node_count() != b.node_count()) {
        return false;
    }
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
        const auto& x = a.edges[e];
        const auto& y = b.edges[e];
        if (x.i != y.i || x.j != y.j || x.bearing != y.bearing) {
            return false;
        }
    }
    for (std::size_t l = 0; l < a.links.size(); ++l) {
        const auto& x = a.links[l];
        const auto& y = b.links[l];
        if (x.node != y.node || x.anchor != y.anchor || x.bearing != y.bearing) {
            return false;
        }
    }
    return true;
}

} // namespace

HorizonTracker::HorizonTracker(TrackerConfig config) : config_(std::move(config))
{
    if (config_.window < 1) {
        throw ConfigError("window must hold at least one tick");
    }
}

Eigen::VectorXd initial_point(const MeasurementWindow& window, const std::vector<std::vector<Vec>>& positions)
{
    const auto layout = layout_for(window);
    const int p = layout.dim;
    const auto& topo = window.topology;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(layout.size());
    for (int tau = 0; tau < layout.window; ++tau) {
        const auto& x = positions[tau];
        for (int i = 0; i < layout.nodes; ++i) {
            z.segment(layout.x(tau, i), p) = x[i];
        }
        for (int e = 0; e < layout.edges; ++e) {
            z.segment(layout.y(tau, e), p) = x[topo.edges[e].i] - x[topo.edges[e].j];
        }
        for (int l = 0; l < layout.links; ++l) {
            const auto& link = topo.links[l];
            z.segment(layout.w(tau, l), p) = x[link.node] - window.anchor_positions[tau][link.anchor];
        }
        if (tau >= 1) {
            for (int i = 0; i < layout.nodes; ++i) {
                z.segment(layout.s(tau, i), p) = x[i] - positions[tau - 1][i];
            }
        }
    }
    return z;
}

TickSolve HorizonTracker::step(const NetworkSnapshot& snapshot, const Dataset& data, const NoiseParams& params)
{
    if (!snapshots_.empty() && !same_edges(snapshots_.back(), snapshot)) {
        snapshots_.clear();
        data_.clear();
    }
    snapshots_.push_back(snapshot);
    data_.push_back(data);
    while (static_cast<int>(snapshots_.size()) > config_.window) {
        snapshots_.pop_front();
        data_.pop_front();
    }
    const std::vector<NetworkSnapshot> snaps(snapshots_.begin(), snapshots_.end());
    const std::vector<Dataset> datas(data_.begin(), data_.end());
    const auto window = make_window(snaps, datas);
    const int T = window.length();
    const int n = snapshot.node_count();
    const int p = snapshot.dim;

    // Warm start: reuse instants solved before, predict the rest forward.
    std::vector<std::vector<Vec>> start(T);
    for (int tau = 0; tau < T; ++tau) {
        const int tick = snaps[tau].tick;
        const auto it = std::find(previous_ticks_.begin(), previous_ticks_.end(), tick);
        if (it != previous_ticks_.end()) {
            start[tau] = previous_[it - previous_ticks_.begin()];
        } else if (tau > 0) {
            start[tau] = start[tau - 1];
            if (!datas[tau].velocities.empty()) {
                for (int i = 0; i < n; ++i) {
                    start[tau][i] += datas[tau].velocities[i].beta() * datas[tau].dt;
                }
            }
        } else if (!previous_.empty() && static_cast<int>(previous_.back().size()) == n) {
            start[tau] = previous_.back();
        } else {
            Vec centre = Vec::Zero(p);
            for (const auto& a : snapshot.anchors) {
                centre += a;
            }
            if (snapshot.anchor_count() > 0) {
                centre /= snapshot.anchor_count();
            }
            start[tau].assign(n, centre);
        }
    }

    const auto assembly = assemble(window, params, config_.assembly);
    const double L = lipschitz_bound(assembly.form);
    const Eigen::VectorXd z0 = initial_point(window, start);

    TickSolve out;
    out.lipschitz = L;
    Eigen::VectorXd z;
    if (config_.distributed) {
        auto r = run_window(assembly.form, assembly.constraints, L, z0, config_.solver);
        z = std::move(r.z);
        out.iterations = r.iterations;
        out.converged = r.converged;
        out.messages = r.messages;
    } else {
        auto r = fista_solve(assembly.form, assembly.constraints, L, z0, config_.solver);
        z = std::move(r.z);
        out.iterations = r.iterations;
        out.converged = r.converged;
    }

    const auto layout = assembly.form.layout;
    previous_.assign(T, std::vector<Vec>(n));
    previous_ticks_.clear();
    for (int tau = 0; tau < T; ++tau) {
        previous_ticks_.push_back(snaps[tau].tick);
        for (int i = 0; i < n; ++i) {
            previous_[tau][i] = z.segment(layout.x(tau, i), p);
        }
    }
    out.positions = previous_.back();
    return out;
}

TrackRun run_known_params(std::span<const StreamTick> stream, const NoiseParams& params, const TrackerConfig& config)
{
    HorizonTracker tracker(config);
    TrackRun run;
    for (const auto& tick : stream) {
        auto r = tracker.step(tick.snapshot, tick.data, params);
        run.iterations += r.iterations;
        run.messages += r.messages;
        run.estimates.push_back(std::move(r.positions));
    }
    return run;
}

ParamFreeRun run_parameter_free(std::span<const StreamTick> stream, const ParamFreeConfig& config)
{
    ParamFreeRun out;
    if (stream.empty()) {
        return out;
    }
    HorizonTracker tracker(config.tracker);
    const auto& first = stream.front().snapshot;
    ParamAccumulators acc(first.dim, first.node_count());
    int t = 0;
    for (const auto& tick : stream) {
        auto current = current_params(acc, tick.snapshot, config.defaults, config.limits);
        out.trace.insert(out.trace.end(), current.rows.begin(), current.rows.end());
        auto r = tracker.step(tick.snapshot, tick.data, current.params);
        out.track.iterations += r.iterations;
        out.track.messages += r.messages;
        residual_update(acc, tick.snapshot, r.positions, tick.data, ++t);
        out.track.estimates.push_back(std::move(r.positions));
    }
    return out;
}

} // namespace hcl
