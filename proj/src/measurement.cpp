#include "hcl/measurement.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace hcl {

NoiseParams NoiseParams::uniform(double range_sigma, double bearing_kappa, double step_sigma, double heading_kappa)
{
    NoiseParams params;
    params.edge_default = ChannelNoise{range_sigma, bearing_kappa};
    params.link_default = ChannelNoise{range_sigma, bearing_kappa};
    params.velocity_default = ChannelNoise{step_sigma, heading_kappa};
    return params;
}

namespace {

ChannelNoise lookup(const std::map<std::pair<int, int>, ChannelNoise>& overrides,
                    const std::optional<ChannelNoise>& fallback, std::pair<int, int> key, const char* what)
{
    if (auto it = overrides.find(key); it != overrides.end()) {
        return it->second;
    }
    if (fallback) {
        return *fallback;
    }
    throw ConfigError(std::string("missing noise parameter for ") + what + " " + std::to_string(key.first) + "-" +
                      std::to_string(key.second));
}

void check_channel(const ChannelNoise& c, const char* what)
{
    if (!(c.sigma > 0.0) || !(c.kappa > 0.0) || !std::isfinite(c.sigma) || !std::isfinite(c.kappa)) {
        throw ConfigError(std::string("noise parameters must be positive and finite (") + what + ")");
    }
}

} // namespace

ChannelNoise NoiseParams::edge(int i, int j) const
{
    return lookup(edge_overrides, edge_default, {std::min(i, j), std::max(i, j)}, "edge");
}

ChannelNoise NoiseParams::link(int node, int anchor) const
{
    return lookup(link_overrides, link_default, {node, anchor}, "anchor link");
}

ChannelNoise NoiseParams::velocity(int node) const
{
    if (auto it = velocity_overrides.find(node); it != velocity_overrides.end()) {
        return it->second;
    }
    if (velocity_default) {
        return *velocity_default;
    }
    throw ConfigError("missing velocity noise parameter for node " + std::to_string(node));
}

void NoiseParams::validate_for(const NetworkSnapshot& snapshot, bool with_velocity) const
{
    for (const auto& e : snapshot.edges) {
        check_channel(edge(e.i, e.j), "edge");
    }
    for (const auto& l : snapshot.links) {
        check_channel(link(l.node, l.anchor), "anchor link");
    }
    if (with_velocity) {
        for (int i = 0; i < snapshot.node_count(); ++i) {
            check_channel(velocity(i), "velocity");
        }
    }
}

namespace {

bool same_vec(const Vec& a, const Vec& b)
{
    return a.size() == b.size() && (a.array() == b.array()).all();
}

bool same_reading(const RangeBearing& a, const RangeBearing& b)
{
    if (a.range != b.range || a.bearing.has_value() != b.bearing.has_value()) {
        return false;
    }
    return !a.bearing || same_vec(*a.bearing, *b.bearing);
}

} // namespace

bool Dataset::operator==(const Dataset& other) const
{
    if (tick != other.tick || dt != other.dt || edges.size() != other.edges.size() ||
        links.size() != other.links.size() || velocities.size() != other.velocities.size()) {
        return false;
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!same_reading(edges[e], other.edges[e])) {
            return false;
        }
    }
    for (std::size_t l = 0; l < links.size(); ++l) {
        if (!same_reading(links[l], other.links[l])) {
            return false;
        }
    }
    for (std::size_t i = 0; i < velocities.size(); ++i) {
        if (velocities[i].speed != other.velocities[i].speed ||
            !same_vec(velocities[i].heading, other.velocities[i].heading)) {
            return false;
        }
    }
    return true;
}

double kappa_to_sigma_eq(double kappa)
{
    const double tail = 1.0 / (2.0 * kappa) + 1.0 / (8.0 * kappa * kappa) + 1.0 / (8.0 * kappa * kappa * kappa);
    if (!(kappa > 0.0) || !(tail < 1.0) || !(tail > 0.0)) {
        throw DomainError("concentration too small for the equivalent-sigma series: " + std::to_string(kappa));
    }
    // log1p keeps full precision when the argument is close to 1
    return std::sqrt(-2.0 * std::log1p(-tail));
}

double mean_resultant_length(double kappa, int dim)
{
    if (kappa < 0.0) {
        throw DomainError("negative concentration");
    }
    if (dim == 3) {
        if (kappa < 1e-6) {
            return kappa / 3.0;
        }
        return 1.0 / std::tanh(kappa) - 1.0 / kappa;
    }
    if (dim == 2) {
        if (kappa > 500.0) {
            // I1/I0 asymptotic series; cyl_bessel_i overflows near exp(709).
            return 1.0 - 1.0 / (2.0 * kappa) - 1.0 / (8.0 * kappa * kappa) - 1.0 / (8.0 * kappa * kappa * kappa);
        }
        return std::cyl_bessel_i(1.0, kappa) / std::cyl_bessel_i(0.0, kappa);
    }
    throw DomainError("dimension must be 2 or 3");
}

namespace {

double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Angle offset of a von Mises(0, kappa) draw.
double sample_von_mises_angle(double kappa, Rng& rng)
{
    constexpr double pi = std::numbers::pi;
    if (kappa < 1e-8) {
        return pi * (2.0 * uniform01(rng) - 1.0);
    }
    if (kappa > 1e6) {
        return std::normal_distribution<double>(0.0, 1.0 / std::sqrt(kappa))(rng);
    }
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double u1 = uniform01(rng);
        const double u2 = uniform01(rng);
        const double u3 = uniform01(rng);
        const double z = std::cos(pi * u1);
        const double f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
            const double theta = std::acos(std::clamp(f, -1.0, 1.0));
            return u3 > 0.5 ? theta : -theta;
        }
    }
}

/// Two unit vectors completing `mean` to an orthonormal basis of R^3.
std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(const Eigen::Vector3d& mean)
{
    const Eigen::Vector3d helper = std::abs(mean.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = mean.cross(helper).normalized();
    const Eigen::Vector3d e2 = mean.cross(e1);
    return {e1, e2};
}

} // namespace

Vec sample_vmf(const Vec& mean, double kappa, Rng& rng)
{
    if (mean.size() == 2) {
        const double theta = sample_von_mises_angle(kappa, rng);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        Vec out(2);
        out << c * mean(0) - s * mean(1), s * mean(0) + c * mean(1);
        return out / out.norm();
    }
    if (mean.size() == 3) {
        const Eigen::Vector3d mu = mean;
        double w = 0.0;
        const double xi = 1.0 - uniform01(rng); // (0, 1]
        if (kappa < 1e-8) {
            w = 2.0 * xi - 1.0;
        } else {
            w = 1.0 + std::log(xi + (1.0 - xi) * std::exp(-2.0 * kappa)) / kappa;
            w = std::clamp(w, -1.0, 1.0);
        }
        const double phi = 2.0 * std::numbers::pi * uniform01(rng);
        const auto [e1, e2] = tangent_basis(mu);
        const double radial = std::sqrt(std::max(0.0, 1.0 - w * w));
        Eigen::Vector3d out = w * mu + radial * (std::cos(phi) * e1 + std::sin(phi) * e2);
        return Vec(out.normalized());
    }
    throw DomainError("vMF sampling supports dimensions 2 and 3");
}

namespace {

Vec direction(const Vec& from_to, const char* what)
{
    const double n = from_to.norm();
    if (n == 0.0) {
        throw DegenerateGeometry(std::string("coincident points on ") + what + " with a bearing");
    }
    return from_to / n;
}

} // namespace

Dataset synthesize_dataset(const NetworkSnapshot& snapshot, std::span<const Vec> true_velocities,
                           const NoiseParams& params, double dt, Rng& rng)
{
    if (!(dt > 0.0)) {
        throw ConfigError("tick duration must be positive");
    }
    const bool with_velocity = !true_velocities.empty();
    if (with_velocity && static_cast<int>(true_velocities.size()) != snapshot.node_count()) {
        throw ConfigError("one true velocity per node is required");
    }
    params.validate_for(snapshot, with_velocity);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset data;
    data.tick = snapshot.tick;
    data.dt = dt;
    data.edges.reserve(snapshot.edges.size());
    for (const auto& e : snapshot.edges) {
        const ChannelNoise noise = params.edge(e.i, e.j);
        const Vec diff = snapshot.nodes[e.i] - snapshot.nodes[e.j];
        RangeBearing m;
        m.range = std::max(0.0, diff.norm() + noise.sigma * gauss(rng));
        if (e.bearing) {
            m.bearing = sample_vmf(direction(diff, "node edge"), noise.kappa, rng);
        }
        data.edges.push_back(std::move(m));
    }
    data.links.reserve(snapshot.links.size());
    for (const auto& l : snapshot.links) {
        const ChannelNoise noise = params.link(l.node, l.anchor);
        const Vec diff = snapshot.nodes[l.node] - snapshot.anchors[l.anchor];
        RangeBearing m;
        m.range = std::max(0.0, diff.norm() + noise.sigma * gauss(rng));
        if (l.bearing) {
            m.bearing = sample_vmf(direction(diff, "anchor link"), noise.kappa, rng);
        }
        data.links.push_back(std::move(m));
    }
    if (with_velocity) {
        data.velocities.reserve(true_velocities.size());
        for (int i = 0; i < snapshot.node_count(); ++i) {
            const ChannelNoise noise = params.velocity(i);
            const Vec step = true_velocities[i] * dt;
            const double length = step.norm();
            const double noisy = std::max(0.0, length + noise.sigma * gauss(rng));
            VelocityReading v;
            v.speed = noisy / dt;
            if (length > 0.0) {
                v.heading = sample_vmf(step / length, noise.kappa, rng);
            } else {
                v.heading = sample_vmf(Vec::Unit(snapshot.dim, 0), 0.0, rng);
            }
            data.velocities.push_back(std::move(v));
        }
    }
    return data;
}

OutlierSelection OutlierSelection::all_of_node(const NetworkSnapshot& snapshot, int node)
{
    OutlierSelection sel;
    for (const auto& e : snapshot.edges) {
        if (e.i == node || e.j == node) {
            sel.edges.emplace_back(e.i, e.j);
        }
    }
    for (const auto& l : snapshot.links) {
        if (l.node == node) {
            sel.links.emplace_back(l.node, l.anchor);
        }
    }
    return sel;
}

OutlierInjection inject_outliers(const Dataset& dataset, const NetworkSnapshot& snapshot,
                                 const OutlierSelection& selection, double factor, double probability, Rng& rng)
{
    if (!(probability >= 0.0 && probability <= 1.0)) {
        throw ConfigError("outlier probability must lie in [0, 1]");
    }
    if (!(factor > 0.0)) {
        throw ConfigError("outlier factor must be positive");
    }
    OutlierInjection out{dataset, 0};
    std::bernoulli_distribution hit(probability);
    for (const auto& [a, b] : selection.edges) {
        const auto e = snapshot.find_edge(a, b);
        if (!e) {
            continue;
        }
        if (hit(rng)) {
            const auto& edge = snapshot.edges[*e];
            out.data.edges[*e].range = factor * (snapshot.nodes[edge.i] - snapshot.nodes[edge.j]).norm();
            ++out.corrupted;
        }
    }
    for (const auto& [node, anchor] : selection.links) {
        const auto l = snapshot.find_link(node, anchor);
        if (!l) {
            continue;
        }
        if (hit(rng)) {
            out.data.links[*l].range = factor * (snapshot.nodes[node] - snapshot.anchors[anchor]).norm();
            ++out.corrupted;
        }
    }
    return out;
}

namespace {

void write_vec(std::ostream& os, const Vec& v)
{
    for (Eigen::Index d = 0; d < v.size(); ++d) {
        os << ' ' << v(d);
    }
}

Vec read_vec(std::istringstream& line, int dim)
{
    Vec v(dim);
    for (int d = 0; d < dim; ++d) {
        line >> v(d);
    }
    return v;
}

} // namespace

void write_dataset(std::ostream& os, const NetworkSnapshot& snapshot, const Dataset& data)
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "dataset " << data.tick << ' ' << data.dt << ' ' << snapshot.dim << '\n';
    for (std::size_t e = 0; e < data.edges.size(); ++e) {
        const auto& edge = snapshot.edges[e];
        os << "range " << edge.i << ' ' << edge.j << ' ' << data.tick << ' ' << data.edges[e].range << '\n';
        if (data.edges[e].bearing) {
            os << "bearing " << edge.i << ' ' << edge.j << ' ' << data.tick;
            write_vec(os, *data.edges[e].bearing);
            os << '\n';
        }
    }
    for (std::size_t l = 0; l < data.links.size(); ++l) {
        const auto& link = snapshot.links[l];
        os << "anchor_range " << link.node << ' ' << link.anchor << ' ' << data.tick << ' ' << data.links[l].range
           << '\n';
        if (data.links[l].bearing) {
            os << "anchor_bearing " << link.node << ' ' << link.anchor << ' ' << data.tick;
            write_vec(os, *data.links[l].bearing);
            os << '\n';
        }
    }
    for (std::size_t i = 0; i < data.velocities.size(); ++i) {
        os << "velocity " << i << ' ' << data.tick << ' ' << data.velocities[i].speed;
        write_vec(os, data.velocities[i].heading);
        os << '\n';
    }
    os << "end\n";
    os.precision(old_precision);
}

Dataset read_dataset(std::istream& is, const NetworkSnapshot& snapshot)
{
    Dataset data;
    int dim = snapshot.dim;
    std::vector<bool> seen_edge(snapshot.edges.size(), false);
    std::vector<bool> seen_link(snapshot.links.size(), false);
    data.edges.resize(snapshot.edges.size());
    data.links.resize(snapshot.links.size());
    std::vector<std::optional<VelocityReading>> velocities(snapshot.nodes.size());
    bool header = false;
    std::string text;
    while (std::getline(is, text)) {
        if (text.empty() || text[0] == '#') {
            continue;
        }
        std::istringstream line(text);
        std::string kind;
        line >> kind;
        int a = 0;
        int b = 0;
        int tick = 0;
        if (kind == "dataset") {
            line >> data.tick >> data.dt >> dim;
            header = true;
            continue;
        }
        if (kind == "end") {
            break;
        }
        if (!header) {
            throw ConfigError("dataset stream must start with a 'dataset' record");
        }
        if (kind == "velocity") {
            VelocityReading v;
            line >> a >> tick >> v.speed;
            v.heading = read_vec(line, dim);
            if (line.fail() || a < 0 || a >= snapshot.node_count()) {
                throw ConfigError("malformed velocity record: " + text);
            }
            velocities[a] = std::move(v);
            continue;
        }
        line >> a >> b >> tick;
        if (kind == "range" || kind == "bearing") {
            const auto e = snapshot.find_edge(a, b);
            if (!e) {
                throw ConfigError("measurement on unknown edge: " + text);
            }
            if (kind == "range") {
                line >> data.edges[*e].range;
                seen_edge[*e] = true;
            } else {
                if (!snapshot.edges[*e].bearing) {
                    throw ConfigError("bearing on a range-only edge: " + text);
                }
                data.edges[*e].bearing = read_vec(line, dim);
            }
        } else if (kind == "anchor_range" || kind == "anchor_bearing") {
            const auto l = snapshot.find_link(a, b);
            if (!l) {
                throw ConfigError("measurement on unknown anchor link: " + text);
            }
            if (kind == "anchor_range") {
                line >> data.links[*l].range;
                seen_link[*l] = true;
            } else {
                if (!snapshot.links[*l].bearing) {
                    throw ConfigError("bearing on a range-only anchor link: " + text);
                }
                data.links[*l].bearing = read_vec(line, dim);
            }
        } else {
            throw ConfigError("unknown dataset record '" + kind + "'");
        }
        if (line.fail()) {
            throw ConfigError("malformed dataset record: " + text);
        }
    }
    if (std::find(seen_edge.begin(), seen_edge.end(), false) != seen_edge.end() ||
        std::find(seen_link.begin(), seen_link.end(), false) != seen_link.end()) {
        throw ConfigError("dataset is missing a range measurement for a snapshot edge");
    }
    for (std::size_t e = 0; e < snapshot.edges.size(); ++e) {
        if (snapshot.edges[e].bearing && !data.edges[e].bearing) {
            throw ConfigError("dataset is missing a bearing for a bearing edge");
        }
    }
    for (std::size_t l = 0; l < snapshot.links.size(); ++l) {
        if (snapshot.links[l].bearing && !data.links[l].bearing) {
            throw ConfigError("dataset is missing a bearing for a bearing anchor link");
        }
    }
    const bool any_velocity =
        std::any_of(velocities.begin(), velocities.end(), [](const auto& v) { return v.has_value(); });
    if (any_velocity) {
        for (auto& v : velocities) {
            if (!v) {
                throw ConfigError("velocity readings must cover every node");
            }
            data.velocities.push_back(std::move(*v));
        }
    }
    return data;
}

} // namespace hcl
