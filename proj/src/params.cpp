#include "hcl/params.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hcl {

double kappa_estimate(double gamma_bar, int dim)
{
    if (!(gamma_bar >= 0.0 && gamma_bar < 1.0)) {
        throw DomainError("mean resultant length must lie in [0, 1)");
    }
    const double g2 = gamma_bar * gamma_bar;
    return gamma_bar * (dim - g2) / (1.0 - g2);
}

void PositionHistory::push(int tick, const Vec& position)
{
    slots_[static_cast<std::size_t>(tick) % capacity] = std::make_pair(tick, position);
}

std::optional<Vec> PositionHistory::at(int tick) const
{
    if (tick < 0) {
        return std::nullopt;
    }
    const auto& slot = slots_[static_cast<std::size_t>(tick) % capacity];
    if (slot && slot->first == tick) {
        return slot->second;
    }
    return std::nullopt;
}

std::optional<Vec> velocity_from_history(const PositionHistory& history, int t)
{
    if (t <= 7) {
        return std::nullopt;
    }
    std::array<Vec, 8> x;
    for (int lag = 1; lag <= 7; ++lag) {
        auto v = history.at(t - lag);
        if (!v) {
            return std::nullopt;
        }
        x[lag] = std::move(*v);
    }
    return (5.0 * (x[3] - x[5]) + 4.0 * (x[2] - x[6]) + (x[1] - x[7])) / 32.0;
}

ParamAccumulators::ParamAccumulators(int dim_, int nodes) : dim(dim_), history(static_cast<std::size_t>(nodes)) {}

namespace {

ChannelAccumulator& slot(std::map<std::pair<int, int>, ChannelAccumulator>& m, std::pair<int, int> key, int dim)
{
    auto [it, inserted] = m.try_emplace(key);
    if (inserted) {
        it->second.direction_sum = Vec::Zero(dim);
    }
    return it->second;
}

void add_direction(ChannelAccumulator& acc, const Vec& measured, const Vec& estimated)
{
    const Vec diff = measured - estimated;
    const double n = diff.norm();
    if (n > 0.0 && std::isfinite(n)) {
        acc.direction_sum += diff / n;
        acc.aligned_sum += measured.dot(estimated);
        ++acc.direction_samples;
    }
}

} // namespace

void residual_update(ParamAccumulators& acc, const NetworkSnapshot& snapshot, std::span<const Vec> estimates,
                     const Dataset& data, int t)
{
    if (static_cast<int>(estimates.size()) != snapshot.node_count()) {
        throw ShapeMismatch("one estimate per node is required");
    }
    if (t != acc.tick + 1) {
        throw ConfigError("residual updates must arrive one tick at a time");
    }
    if (acc.history.size() != estimates.size()) {
        acc.history.resize(estimates.size());
    }
    const int p = acc.dim;
    for (std::size_t e = 0; e < snapshot.edges.size(); ++e) {
        const auto& edge = snapshot.edges[e];
        const auto& m = data.edges[e];
        auto& a = slot(acc.edges, {edge.i, edge.j}, p);
        const Vec diff = estimates[edge.i] - estimates[edge.j];
        const double d_hat = diff.norm();
        a.squared_sum += (m.range - d_hat) * (m.range - d_hat);
        ++a.range_samples;
        if (m.bearing && d_hat > 0.0) {
            add_direction(a, *m.bearing, diff / d_hat);
        }
    }
    for (std::size_t l = 0; l < snapshot.links.size(); ++l) {
        const auto& link = snapshot.links[l];
        const auto& m = data.links[l];
        auto& a = slot(acc.links, {link.node, link.anchor}, p);
        const Vec diff = estimates[link.node] - snapshot.anchors[link.anchor];
        const double r_hat = diff.norm();
        a.squared_sum += (m.range - r_hat) * (m.range - r_hat);
        ++a.range_samples;
        if (m.bearing && r_hat > 0.0) {
            add_direction(a, *m.bearing, diff / r_hat);
        }
    }
    if (!data.velocities.empty()) {
        for (int i = 0; i < snapshot.node_count(); ++i) {
            const auto beta_dt = velocity_from_history(acc.history[i], t);
            if (!beta_dt) {
                continue;
            }
            auto [it, inserted] = acc.velocity.try_emplace(i);
            auto& a = it->second;
            if (inserted) {
                a.direction_sum = Vec::Zero(p);
            }
            const auto& m = data.velocities[i];
            const double travel_hat = beta_dt->norm();
            const double travel = m.speed * data.dt;
            a.squared_sum += (travel - travel_hat) * (travel - travel_hat);
            ++a.range_samples;
            if (travel_hat > 0.0) {
                // Not normalised, as in the estimation loop.
                a.direction_sum += m.heading - *beta_dt / travel_hat;
                a.aligned_sum += m.heading.dot(*beta_dt / travel_hat);
                ++a.direction_samples;
            }
        }
    }
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        acc.history[i].push(t, estimates[i]);
    }
    acc.tick = t;
}

ChannelEstimate estimate_channel(const ChannelAccumulator& acc, int tick, int dim, const ChannelNoise& fallback,
                                 const EstimatorLimits& limits)
{
    ChannelEstimate out;
    out.noise = fallback;
    if (tick <= 7 || acc.range_samples < limits.min_samples) {
        return out;
    }
    out.warmup = false;
    double sigma = std::sqrt(acc.squared_sum / acc.range_samples);
    if (!(sigma >= limits.sigma_floor)) {
        sigma = limits.sigma_floor;
        out.sigma_clamped = true;
    }
    out.noise.sigma = sigma;
    if (acc.direction_samples > 0) {
        const double g = limits.direction == DirectionEstimator::Aligned
                             ? std::max(0.0, acc.aligned_sum / acc.direction_samples)
                             : acc.direction_sum.norm() / acc.direction_samples;
        double kappa = g < 1.0 ? kappa_estimate(g, dim) : std::numeric_limits<double>::infinity();
        if (!(kappa <= limits.kappa_cap)) {
            kappa = limits.kappa_cap;
            out.kappa_clamped = true;
        } else if (kappa < limits.kappa_floor) {
            kappa = limits.kappa_floor;
            out.kappa_clamped = true;
        }
        out.noise.kappa = kappa;
    }
    return out;
}

CurrentParams current_params(const ParamAccumulators& acc, const NetworkSnapshot& snapshot,
                             const NoiseParams& defaults, const EstimatorLimits& limits)
{
    CurrentParams out;
    out.params = defaults;
    const int next = acc.tick + 1;
    auto record = [&](const char* kind, int a, int b, const ChannelEstimate& est) {
        out.rows.push_back({next, kind, a, b, est.noise.sigma, est.noise.kappa, est.warmup, est.sigma_clamped,
                            est.kappa_clamped});
    };
    const ChannelAccumulator empty{0.0, Vec::Zero(acc.dim), 0.0, 0, 0};
    for (const auto& edge : snapshot.edges) {
        const auto it = acc.edges.find({edge.i, edge.j});
        const auto est = estimate_channel(it == acc.edges.end() ? empty : it->second, acc.tick, acc.dim,
                                          defaults.edge(edge.i, edge.j), limits);
        out.params.edge_overrides[{edge.i, edge.j}] = est.noise;
        record("edge", edge.i, edge.j, est);
    }
    for (const auto& link : snapshot.links) {
        const auto it = acc.links.find({link.node, link.anchor});
        const auto est = estimate_channel(it == acc.links.end() ? empty : it->second, acc.tick, acc.dim,
                                          defaults.link(link.node, link.anchor), limits);
        out.params.link_overrides[{link.node, link.anchor}] = est.noise;
        record("link", link.node, link.anchor, est);
    }
    if (defaults.velocity_default || !defaults.velocity_overrides.empty()) {
        for (int i = 0; i < snapshot.node_count(); ++i) {
            const auto it = acc.velocity.find(i);
            const auto est = estimate_channel(it == acc.velocity.end() ? empty : it->second, acc.tick, acc.dim,
                                              defaults.velocity(i), limits);
            out.params.velocity_overrides[i] = est.noise;
            record("velocity", i, -1, est);
        }
    }
    return out;
}

namespace {

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << v;
    return os.str();
}

} // namespace

void write_param_trace(std::ostream& os, std::span<const TraceRow> rows)
{
    os << "tick,kind,a,b,sigma,kappa,warmup,sigma_clamped,kappa_clamped\n";
    for (const auto& r : rows) {
        os << r.tick << ',' << r.kind << ',' << r.a << ',' << r.b << ',' << format_double(r.sigma) << ','
           << format_double(r.kappa) << ',' << r.warmup << ',' << r.sigma_clamped << ',' << r.kappa_clamped << '\n';
    }
}

std::vector<TraceRow> read_param_trace(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("empty parameter trace");
    }
    std::vector<TraceRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 9) {
            throw ConfigError("malformed parameter trace row: " + line);
        }
        TraceRow r;
        r.tick = std::stoi(f[0]);
        r.kind = f[1];
        r.a = std::stoi(f[2]);
        r.b = std::stoi(f[3]);
        r.sigma = std::strtod(f[4].c_str(), nullptr);
        r.kappa = std::strtod(f[5].c_str(), nullptr);
        r.warmup = f[6] == "1";
        r.sigma_clamped = f[7] == "1";
        r.kappa_clamped = f[8] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace hcl
