#include "hcl/problem.hpp"

#include "hcl/errors.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace hcl {

namespace {

bool same_topology(const NetworkSnapshot& a, const NetworkSnapshot& b)
{
    if (a.node_count() != b.node_count() || a.anchor_count() != b.anchor_count() || a.edges.size() != b.edges.size() ||
        a.links.size() != b.links.size()) {
        return false;
    }
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
        if (a.edges[e].i != b.edges[e].i || a.edges[e].j != b.edges[e].j || a.edges[e].bearing != b.edges[e].bearing) {
            return false;
        }
    }
    for (std::size_t l = 0; l < a.links.size(); ++l) {
        if (a.links[l].node != b.links[l].node || a.links[l].anchor != b.links[l].anchor ||
            a.links[l].bearing != b.links[l].bearing) {
            return false;
        }
    }
    return true;
}

} // namespace

MeasurementWindow make_window(std::span<const NetworkSnapshot> snapshots, std::span<const Dataset> data)
{
    if (snapshots.empty() || snapshots.size() != data.size()) {
        throw ConfigError("a window needs one snapshot per dataset and at least one tick");
    }
    MeasurementWindow window;
    window.topology = snapshots.back();
    for (std::size_t tau = 0; tau < snapshots.size(); ++tau) {
        if (!same_topology(snapshots[tau], window.topology)) {
            throw ConfigError("edge set changed within the window at tick " + std::to_string(snapshots[tau].tick));
        }
        const auto& d = data[tau];
        if (d.edges.size() != window.topology.edges.size() || d.links.size() != window.topology.links.size()) {
            throw ConfigError("dataset does not mirror the snapshot edge sets");
        }
        if (snapshots.size() > 1 && tau > 0 && static_cast<int>(d.velocities.size()) != window.topology.node_count()) {
            throw ConfigError("velocity readings are required inside a multi-tick window");
        }
        window.anchor_positions.push_back(snapshots[tau].anchors);
        window.data.push_back(d);
    }
    return window;
}

VariableLayout layout_for(const MeasurementWindow& window)
{
    VariableLayout layout;
    layout.dim = window.dim();
    layout.window = window.length();
    layout.nodes = window.topology.node_count();
    layout.edges = static_cast<int>(window.topology.edges.size());
    layout.links = static_cast<int>(window.topology.links.size());
    return layout;
}

namespace {

/// Scaled bearing kappa * dir / length, or zero when the term is dropped.
Vec pull_vector(const std::optional<Vec>& bearing, double kappa, double length, int dim, bool strict, const char* what)
{
    if (!bearing) {
        return Vec::Zero(dim);
    }
    if (!(length > 0.0)) {
        if (strict) {
            throw DegenerateMeasurement(std::string("zero ") + what + " with a bearing present");
        }
        return Vec::Zero(dim);
    }
    return (kappa / length) * *bearing;
}

} // namespace

Assembly assemble(const MeasurementWindow& window, const NoiseParams& params, const AssemblyOptions& options)
{
    const auto& topo = window.topology;
    const VariableLayout layout = layout_for(window);
    const int p = layout.dim;
    const int T = layout.window;
    params.validate_for(topo, T > 1);

    Assembly out;
    QuadraticForm& form = out.form;
    ConstraintSet& cons = out.constraints;
    form.layout = layout;
    cons.layout = layout;
    form.max_degree = max_degree(topo);
    form.max_anchor_count = max_anchor_count(topo);
    form.linear = Eigen::VectorXd::Zero(layout.size());

    for (const auto& e : topo.edges) {
        form.edge_terms.push_back({e.i, e.j, 1.0 / std::pow(params.edge(e.i, e.j).sigma, 2)});
    }
    for (const auto& l : topo.links) {
        form.link_terms.push_back({l.node, l.anchor, 1.0 / std::pow(params.link(l.node, l.anchor).sigma, 2)});
    }
    if (T > 1) {
        for (int i = 0; i < layout.nodes; ++i) {
            form.velocity_weights.push_back(1.0 / std::pow(params.velocity(i).sigma, 2));
        }
    } else {
        form.velocity_weights.assign(layout.nodes, 0.0);
    }

    for (int tau = 0; tau < T; ++tau) {
        const Dataset& d = window.data[tau];
        for (int e = 0; e < layout.edges; ++e) {
            const auto& edge = topo.edges[e];
            const double range = d.edges[e].range;
            cons.y_radius.push_back(range);
            Vec pull = pull_vector(d.edges[e].bearing, params.edge(edge.i, edge.j).kappa, range, p,
                                   options.strict_degenerate, "range");
            form.linear.segment(layout.y(tau, e), p) = pull;
            form.edge_pull.push_back(std::move(pull));
        }
        for (int l = 0; l < layout.links; ++l) {
            const auto& link = topo.links[l];
            const double range = d.links[l].range;
            const double weight = form.link_terms[l].weight;
            const Vec& anchor = window.anchor_positions[tau][link.anchor];
            cons.w_radius.push_back(range);
            Vec pull = pull_vector(d.links[l].bearing, params.link(link.node, link.anchor).kappa, range, p,
                                   options.strict_degenerate, "anchor range");
            form.linear.segment(layout.x(tau, link.node), p) += weight * anchor;
            form.linear.segment(layout.w(tau, l), p) = pull - weight * anchor;
            form.constant += 0.5 * weight * anchor.squaredNorm();
            form.link_pull.push_back(std::move(pull));
            form.anchor_offset.push_back(anchor);
        }
    }
    for (int k = 1; k < T; ++k) {
        const Dataset& d = window.data[k];
        for (int i = 0; i < layout.nodes; ++i) {
            const auto& reading = d.velocities[i];
            const double travel = reading.speed * d.dt;
            cons.s_radius.push_back(travel);
            Vec pull = pull_vector(std::optional<Vec>(reading.heading), params.velocity(i).kappa, travel, p,
                                   options.strict_degenerate, "travelled distance");
            form.linear.segment(layout.s(k, i), p) = pull;
            form.velocity_pull.push_back(std::move(pull));
        }
    }
    return out;
}

Eigen::VectorXd QuadraticForm::apply(const Eigen::VectorXd& z) const
{
    // p <= 3: keep residuals on the stack
    using Residual = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
    const auto& L = layout;
    const int p = L.dim;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(L.size());
    for (int tau = 0; tau < L.window; ++tau) {
        for (int e = 0; e < L.edges; ++e) {
            const auto& term = edge_terms[e];
            const Residual r = term.weight * (z.segment(L.x(tau, term.i), p) - z.segment(L.x(tau, term.j), p) -
                                                     z.segment(L.y(tau, e), p));
            out.segment(L.x(tau, term.i), p) += r;
            out.segment(L.x(tau, term.j), p) -= r;
            out.segment(L.y(tau, e), p) = -r;
        }
        for (int l = 0; l < L.links; ++l) {
            const auto& term = link_terms[l];
            const Residual r =
                term.weight * (z.segment(L.x(tau, term.node), p) - z.segment(L.w(tau, l), p));
            out.segment(L.x(tau, term.node), p) += r;
            out.segment(L.w(tau, l), p) = -r;
        }
    }
    for (int k = 1; k < L.window; ++k) {
        for (int i = 0; i < L.nodes; ++i) {
            const Residual r = velocity_weights[i] * (z.segment(L.x(k, i), p) - z.segment(L.x(k - 1, i), p) -
                                                             z.segment(L.s(k, i), p));
            out.segment(L.x(k, i), p) += r;
            out.segment(L.x(k - 1, i), p) -= r;
            out.segment(L.s(k, i), p) = -r;
        }
    }
    return out;
}

double QuadraticForm::value(const Eigen::VectorXd& z) const
{
    return 0.5 * z.dot(apply(z)) - linear.dot(z);
}

Eigen::VectorXd gradient(const QuadraticForm& form, const Eigen::VectorXd& z)
{
    if (z.size() != form.layout.size()) {
        throw ShapeMismatch("variable has the wrong dimension for this quadratic form");
    }
    return form.apply(z) - form.linear;
}

DenseQuadratic dense_quadratic(const IncidenceStructure& inc, const QuadraticForm& form)
{
    const auto& L = form.layout;
    const int p = L.dim;
    const Eigen::Index nx = L.x_size();
    const Eigen::Index ny = L.y_size();
    const Eigen::Index nw = L.w_size();
    const Eigen::Index ns = L.s_size();
    const Eigen::Index n = L.size();

    // Diagonal Sigma blocks (1/sigma), expanded over time and space.
    Eigen::VectorXd sig_n(ny);
    Eigen::VectorXd sig_a(nw);
    Eigen::VectorXd sig_v(ns);
    for (int tau = 0; tau < L.window; ++tau) {
        for (int e = 0; e < L.edges; ++e) {
            sig_n.segment((Eigen::Index{tau} * L.edges + e) * p, p).setConstant(std::sqrt(form.edge_terms[e].weight));
        }
        for (int l = 0; l < L.links; ++l) {
            sig_a.segment((Eigen::Index{tau} * L.links + l) * p, p).setConstant(std::sqrt(form.link_terms[l].weight));
        }
    }
    for (int k = 1; k < L.window; ++k) {
        for (int i = 0; i < L.nodes; ++i) {
            sig_v.segment((Eigen::Index{k - 1} * L.nodes + i) * p, p).setConstant(std::sqrt(form.velocity_weights[i]));
        }
    }

    const Eigen::MatrixXd A = inc.edge_operator();
    const Eigen::MatrixXd E = inc.anchor_operator();
    const Eigen::MatrixXd N = inc.velocity_operator();

    Eigen::MatrixXd B1 = Eigen::MatrixXd::Zero(ny, n);
    B1.block(0, 0, ny, nx) = sig_n.asDiagonal() * A;
    B1.block(0, nx, ny, ny) = -Eigen::MatrixXd(sig_n.asDiagonal());
    Eigen::MatrixXd B2 = Eigen::MatrixXd::Zero(nw, n);
    B2.block(0, 0, nw, nx) = sig_a.asDiagonal() * E;
    B2.block(0, nx + ny, nw, nw) = -Eigen::MatrixXd(sig_a.asDiagonal());
    Eigen::MatrixXd B3 = Eigen::MatrixXd::Zero(ns, n);
    if (ns > 0) {
        B3.block(0, 0, ns, nx) = sig_v.asDiagonal() * N;
        B3.block(0, nx + ny + nw, ns, ns) = -Eigen::MatrixXd(sig_v.asDiagonal());
    }

    DenseQuadratic dense;
    dense.matrix = B1.transpose() * B1 + B2.transpose() * B2 + B3.transpose() * B3;

    Eigen::VectorXd alpha(nw);
    Eigen::VectorXd u(ny);
    Eigen::VectorXd q(nw);
    Eigen::VectorXd v(ns);
    for (Eigen::Index idx = 0; idx < Eigen::Index(form.anchor_offset.size()); ++idx) {
        alpha.segment(idx * p, p) = form.anchor_offset[idx];
        q.segment(idx * p, p) = form.link_pull[idx];
    }
    for (Eigen::Index idx = 0; idx < Eigen::Index(form.edge_pull.size()); ++idx) {
        u.segment(idx * p, p) = form.edge_pull[idx];
    }
    for (Eigen::Index idx = 0; idx < Eigen::Index(form.velocity_pull.size()); ++idx) {
        v.segment(idx * p, p) = form.velocity_pull[idx];
    }
    const Eigen::VectorXd scaled_alpha = sig_a.asDiagonal() * alpha;
    dense.linear = Eigen::VectorXd::Zero(n);
    dense.linear.segment(0, nx) = E.transpose() * (sig_a.asDiagonal() * scaled_alpha);
    dense.linear.segment(nx, ny) = u;
    dense.linear.segment(nx + ny, nw) = -(sig_a.asDiagonal() * scaled_alpha) + q;
    dense.linear.segment(nx + ny + nw, ns) = v;
    return dense;
}

void write_dense(std::ostream& os, const DenseQuadratic& dense)
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < dense.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < dense.matrix.cols(); ++c) {
            if (dense.matrix(r, c) != 0.0) {
                os << "M " << r << ' ' << c << ' ' << dense.matrix(r, c) << '\n';
            }
        }
    }
    for (Eigen::Index r = 0; r < dense.linear.size(); ++r) {
        os << "b " << r << ' ' << dense.linear(r) << '\n';
    }
    os.precision(old_precision);
}

namespace {

double unit_dot(const Vec& bearing, const Vec& diff, const char* what)
{
    const double n = diff.norm();
    if (n == 0.0) {
        throw DegenerateGeometry(std::string("degenerate geometry: coincident points on ") + what);
    }
    return bearing.dot(diff) / n;
}

} // namespace

double mle_cost(const Eigen::VectorXd& x, const MeasurementWindow& window, const NoiseParams& params)
{
    const VariableLayout L = layout_for(window);
    if (x.size() != L.x_size()) {
        throw ShapeMismatch("position vector has the wrong dimension for this window");
    }
    const int p = L.dim;
    const auto& topo = window.topology;
    double dist = 0.0;
    double ang = 0.0;
    double vel = 0.0;
    for (int tau = 0; tau < L.window; ++tau) {
        const Dataset& d = window.data[tau];
        for (int e = 0; e < L.edges; ++e) {
            const auto& edge = topo.edges[e];
            const ChannelNoise noise = params.edge(edge.i, edge.j);
            const Vec diff = x.segment(L.x(tau, edge.i), p) - x.segment(L.x(tau, edge.j), p);
            dist += std::pow(diff.norm() - d.edges[e].range, 2) / (2.0 * noise.sigma * noise.sigma);
            if (d.edges[e].bearing) {
                ang -= noise.kappa * unit_dot(*d.edges[e].bearing, diff, "node edge");
            }
        }
        for (int l = 0; l < L.links; ++l) {
            const auto& link = topo.links[l];
            const ChannelNoise noise = params.link(link.node, link.anchor);
            const Vec diff = x.segment(L.x(tau, link.node), p) - window.anchor_positions[tau][link.anchor];
            dist += std::pow(diff.norm() - d.links[l].range, 2) / (2.0 * noise.sigma * noise.sigma);
            if (d.links[l].bearing) {
                ang -= noise.kappa * unit_dot(*d.links[l].bearing, diff, "anchor link");
            }
        }
    }
    for (int k = 1; k < L.window; ++k) {
        const Dataset& d = window.data[k];
        for (int i = 0; i < L.nodes; ++i) {
            const ChannelNoise noise = params.velocity(i);
            const auto& reading = d.velocities[i];
            const Vec diff = x.segment(L.x(k, i), p) - x.segment(L.x(k - 1, i), p);
            vel += std::pow(diff.norm() - reading.speed * d.dt, 2) / (2.0 * noise.sigma * noise.sigma);
            vel -= noise.kappa * unit_dot(reading.heading, diff, "velocity step");
        }
    }
    return dist + ang + vel;
}

double relaxed_cost(const Eigen::VectorXd& z, const MeasurementWindow& window, const NoiseParams& params)
{
    const VariableLayout L = layout_for(window);
    if (z.size() != L.size()) {
        throw ShapeMismatch("variable has the wrong dimension for this window");
    }
    const int p = L.dim;
    const auto& topo = window.topology;
    double cost = 0.0;
    for (int tau = 0; tau < L.window; ++tau) {
        const Dataset& d = window.data[tau];
        for (int e = 0; e < L.edges; ++e) {
            const auto& edge = topo.edges[e];
            const ChannelNoise noise = params.edge(edge.i, edge.j);
            const Vec y = z.segment(L.y(tau, e), p);
            const Vec r = z.segment(L.x(tau, edge.i), p) - z.segment(L.x(tau, edge.j), p) - y;
            cost += r.squaredNorm() / (2.0 * noise.sigma * noise.sigma);
            if (d.edges[e].bearing && d.edges[e].range > 0.0) {
                cost -= noise.kappa * d.edges[e].bearing->dot(y) / d.edges[e].range;
            }
        }
        for (int l = 0; l < L.links; ++l) {
            const auto& link = topo.links[l];
            const ChannelNoise noise = params.link(link.node, link.anchor);
            const Vec w = z.segment(L.w(tau, l), p);
            const Vec r = z.segment(L.x(tau, link.node), p) - window.anchor_positions[tau][link.anchor] - w;
            cost += r.squaredNorm() / (2.0 * noise.sigma * noise.sigma);
            if (d.links[l].bearing && d.links[l].range > 0.0) {
                cost -= noise.kappa * d.links[l].bearing->dot(w) / d.links[l].range;
            }
        }
    }
    for (int k = 1; k < L.window; ++k) {
        const Dataset& d = window.data[k];
        for (int i = 0; i < L.nodes; ++i) {
            const ChannelNoise noise = params.velocity(i);
            const auto& reading = d.velocities[i];
            const Vec s = z.segment(L.s(k, i), p);
            const Vec r = z.segment(L.x(k, i), p) - z.segment(L.x(k - 1, i), p) - s;
            cost += r.squaredNorm() / (2.0 * noise.sigma * noise.sigma);
            const double travel = reading.speed * d.dt;
            if (travel > 0.0) {
                cost -= noise.kappa * reading.heading.dot(s) / travel;
            }
        }
    }
    return cost;
}

} // namespace hcl
