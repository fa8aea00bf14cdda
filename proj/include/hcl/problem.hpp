#pragma once

#include "hcl/graph.hpp"
#include "hcl/measurement.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace hcl {

/// Measurements over a horizon of `length()` consecutive ticks. The edge
/// and link sets are those of the last tick and are held fixed for every
/// instant; anchors keep their per-tick positions.
struct MeasurementWindow {
    NetworkSnapshot topology;
    std::vector<std::vector<Vec>> anchor_positions; // [tau][anchor]
    std::vector<Dataset> data;                      // [tau], parallel to topology

    int length() const { return static_cast<int>(data.size()); }
    int dim() const { return topology.dim; }
    double dt() const { return data.empty() ? 1.0 : data.back().dt; }
};

/// Builds a window from per-tick snapshots and datasets (oldest first).
/// Throws ConfigError if the edge set changes inside the window or, for
/// windows longer than one tick, velocity readings are missing.
MeasurementWindow make_window(std::span<const NetworkSnapshot> snapshots, std::span<const Dataset> data);

/// Offsets of the stacked variable z = (x, y, w, s). Every block is
/// time-major, then id-major, with `dim` reals per entry. Velocity steps
/// k = 1 .. window-1 link instants k-1 and k.
struct VariableLayout {
    int dim = 2;
    int window = 1;
    int nodes = 0;
    int edges = 0;
    int links = 0;

    Eigen::Index x_size() const { return Eigen::Index{window} * nodes * dim; }
    Eigen::Index y_size() const { return Eigen::Index{window} * edges * dim; }
    Eigen::Index w_size() const { return Eigen::Index{window} * links * dim; }
    Eigen::Index s_size() const { return Eigen::Index{window - 1} * nodes * dim; }
    Eigen::Index size() const { return x_size() + y_size() + w_size() + s_size(); }

    Eigen::Index x(int tau, int node) const { return (Eigen::Index{tau} * nodes + node) * dim; }
    Eigen::Index y(int tau, int edge) const { return x_size() + (Eigen::Index{tau} * edges + edge) * dim; }
    Eigen::Index w(int tau, int link) const { return x_size() + y_size() + (Eigen::Index{tau} * links + link) * dim; }
    Eigen::Index s(int step, int node) const
    {
        return x_size() + y_size() + w_size() + (Eigen::Index{step - 1} * nodes + node) * dim;
    }

    bool operator==(const VariableLayout&) const = default;
};

VariableLayout layout_for(const MeasurementWindow& window);

/// Ball radii of the feasible set: d_ij(tau) for y, r_ik(tau) for w,
/// V_i(tau) dt for s. x is unconstrained.
struct ConstraintSet {
    VariableLayout layout;
    std::vector<double> y_radius; // [tau * edges + e]
    std::vector<double> w_radius; // [tau * links + l]
    std::vector<double> s_radius; // [(step - 1) * nodes + i]
};

struct EdgeTerm {
    int i = 0;
    int j = 0;
    double weight = 0; // 1 / sigma_ij^2
};

struct LinkTerm {
    int node = 0;
    int anchor = 0;
    double weight = 0; // 1 / varsigma_ik^2
};

/// 1/2 z'Mz - b'z with M applied edge by edge. The per-instant
/// measurement vectors are kept alongside b so per-node solvers can read
/// their slice without touching b.
struct QuadraticForm {
    VariableLayout layout;
    int max_degree = 0;
    int max_anchor_count = 0;
    std::vector<EdgeTerm> edge_terms;
    std::vector<LinkTerm> link_terms;
    std::vector<double> velocity_weights; // 1 / sigma_i^2, per node
    std::vector<Vec> edge_pull;     // kappa_ij u_ij / d_ij, [tau * edges + e]; zero without bearing
    std::vector<Vec> link_pull;     // lambda_ik q_ik / r_ik, [tau * links + l]
    std::vector<Vec> velocity_pull; // kappa_i v_i / (V_i dt), [(step - 1) * nodes + i]
    std::vector<Vec> anchor_offset; // a_k(tau) for link l, [tau * links + l]
    Eigen::VectorXd linear;         // b = b1 + b2
    double constant = 0;            // 1/2 ||Sigma_A alpha||^2, not part of M or b

    /// M z
    Eigen::VectorXd apply(const Eigen::VectorXd& z) const;
    /// 1/2 z'Mz - b'z
    double value(const Eigen::VectorXd& z) const;
};

struct AssemblyOptions {
    /// When false, a zero range (or zero travelled distance) drops the
    /// matching bearing term and pins the ball radius at 0. When true it
    /// raises DegenerateMeasurement instead.
    bool strict_degenerate = false;
};

struct Assembly {
    QuadraticForm form;
    ConstraintSet constraints;
};

Assembly assemble(const MeasurementWindow& window, const NoiseParams& params, const AssemblyOptions& options = {});

/// grad g(z) = M z - b
Eigen::VectorXd gradient(const QuadraticForm& form, const Eigen::VectorXd& z);

/// Dense M and b built from the Kronecker-expanded incidence matrices and
/// the diagonal weight matrices. Only meant for small instances.
struct DenseQuadratic {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd linear;
};

DenseQuadratic dense_quadratic(const IncidenceStructure& inc, const QuadraticForm& form);

/// Writes "M <row> <col> <value>" and "b <row> <value>" lines.
void write_dense(std::ostream& os, const DenseQuadratic& dense);

/// Nonconvex maximum-likelihood cost of positions `x` (layout x-block) over
/// the window, including the velocity terms when the window is longer than
/// one tick.
double mle_cost(const Eigen::VectorXd& x, const MeasurementWindow& window, const NoiseParams& params);

/// Relaxed convex cost evaluated term by term, including the anchor
/// constant. Angle terms on degenerate (zero) ranges are omitted.
double relaxed_cost(const Eigen::VectorXd& z, const MeasurementWindow& window, const NoiseParams& params);

} // namespace hcl
