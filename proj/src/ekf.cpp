#include "hcl/ekf.hpp"

#include "hcl/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hcl {

void ekf_predict(EkfState& state, std::span<const VelocityReading> velocities, double dt, double process_noise)
{
    const Eigen::Index n = static_cast<Eigen::Index>(velocities.size());
    if (n == 0 || state.mean.size() % n != 0) {
        throw ShapeMismatch("one velocity reading per node is required");
    }
    const Eigen::Index p = state.mean.size() / n;
    for (Eigen::Index i = 0; i < n; ++i) {
        state.mean.segment(i * p, p) += velocities[i].beta() * dt;
    }
    state.covariance.diagonal().array() += process_noise;
}

void ekf_update(EkfState& state, const NetworkSnapshot& snapshot, const Dataset& data, const NoiseParams& params)
{
    const int p = snapshot.dim;
    const Eigen::Index n = state.mean.size();
    if (n != Eigen::Index{snapshot.node_count()} * p) {
        throw ShapeMismatch("state size does not match the snapshot");
    }
    Eigen::Index rows = 0;
    for (const auto& m : data.edges) {
        rows += 1 + (m.bearing ? p : 0);
    }
    for (const auto& m : data.links) {
        rows += 1 + (m.bearing ? p : 0);
    }
    if (rows == 0) {
        return;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, n);
    Eigen::VectorXd innovation(rows);
    Eigen::VectorXd r_diag(rows);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);

    Eigen::Index row = 0;
    // Range and optional bearing between x_i and `other`; `j` < 0 for anchors.
    auto add = [&](int i, int j, const Vec& other, const RangeBearing& m, const ChannelNoise& noise) {
        const Vec xi = state.mean.segment(Eigen::Index{i} * p, p);
        const Vec diff = xi - other;
        const double d = diff.norm();
        if (!(d > 0.0)) {
            throw DegenerateGeometry("coincident estimates at tick " + std::to_string(data.tick));
        }
        const Vec u = diff / d;
        H.block(row, Eigen::Index{i} * p, 1, p) = u.transpose();
        if (j >= 0) {
            H.block(row, Eigen::Index{j} * p, 1, p) = -u.transpose();
        }
        innovation[row] = m.range - d;
        r_diag[row] = noise.sigma * noise.sigma;
        ++row;
        if (m.bearing) {
            const Eigen::MatrixXd J = (I - u * u.transpose()) / d;
            H.block(row, Eigen::Index{i} * p, p, p) = J;
            if (j >= 0) {
                H.block(row, Eigen::Index{j} * p, p, p) = -J;
            }
            innovation.segment(row, p) = *m.bearing - u;
            const double s = kappa_to_sigma_eq(noise.kappa);
            r_diag.segment(row, p).setConstant(s * s);
            row += p;
        }
    };
    for (std::size_t e = 0; e < snapshot.edges.size(); ++e) {
        const auto& edge = snapshot.edges[e];
        add(edge.i, edge.j, state.mean.segment(Eigen::Index{edge.j} * p, p), data.edges[e], params.edge(edge.i, edge.j));
    }
    for (std::size_t l = 0; l < snapshot.links.size(); ++l) {
        const auto& link = snapshot.links[l];
        add(link.node, -1, snapshot.anchors[link.anchor], data.links[l], params.link(link.node, link.anchor));
    }

    const Eigen::MatrixXd& P = state.covariance;
    const Eigen::MatrixXd PHt = P * H.transpose();
    Eigen::MatrixXd S = H * PHt;
    S.diagonal() += r_diag;
    const Eigen::LDLT<Eigen::MatrixXd> solver(S);
    const Eigen::MatrixXd K = solver.solve(PHt.transpose()).transpose();
    state.mean += K * innovation;

    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - K * H;
    Eigen::MatrixXd next = A * P * A.transpose() + K * r_diag.asDiagonal() * K.transpose();
    next = 0.5 * (next + next.transpose());
    const Eigen::LLT<Eigen::MatrixXd> check(next);
    if (check.info() != Eigen::Success || !state.mean.allFinite()) {
        throw Divergence("EKF covariance lost positive definiteness at tick " + std::to_string(data.tick));
    }
    state.covariance = std::move(next);
}

std::vector<std::vector<Vec>> ekf_run(std::span<const StreamTick> stream, const std::vector<Vec>& initial,
                                      const NoiseParams& params, const EkfTuning& tuning)
{
    if (stream.empty()) {
        return {};
    }
    const int p = stream.front().snapshot.dim;
    const Eigen::Index n = static_cast<Eigen::Index>(initial.size());
    if (n != stream.front().snapshot.node_count()) {
        throw ShapeMismatch("one initial position per node is required");
    }
    EkfState state;
    state.mean.resize(n * p);
    for (Eigen::Index i = 0; i < n; ++i) {
        state.mean.segment(i * p, p) = initial[i];
    }
    state.covariance = Eigen::MatrixXd::Identity(n * p, n * p) * (tuning.init_std * tuning.init_std);

    std::vector<std::vector<Vec>> out;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto& tick = stream[t];
        if (t > 0) {
            ekf_predict(state, stream[t - 1].data.velocities, stream[t - 1].data.dt, tuning.process_noise);
        }
        ekf_update(state, tick.snapshot, tick.data, params);
        std::vector<Vec> row;
        for (Eigen::Index i = 0; i < n; ++i) {
            row.push_back(state.mean.segment(i * p, p));
        }
        out.push_back(std::move(row));
    }
    return out;
}

double grid_search_tune(std::span<const double> grid, const std::function<double(double)>& mean_error)
{
    if (grid.empty()) {
        throw ConfigError("empty tuning grid");
    }
    double best = grid.front();
    double best_error = std::numeric_limits<double>::infinity();
    for (double q : grid) {
        const double e = mean_error(q);
        if (e < best_error) {
            best_error = e;
            best = q;
        }
    }
    return best;
}

} // namespace hcl
