#pragma once

#include "hcl/problem.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hcl {

enum class MomentumRule {
    /// (k-2)/(k+1): the rule with the O(1/k^2) objective-gap guarantee.
    Classic,
    /// (k-1)/k as written in the per-node algorithm listing.
    Listing,
};

/// Extrapolation coefficient used when computing iterate k (k >= 1).
/// Both rules give 0 for the first iterate.
double momentum_coefficient(MomentumRule rule, int k);

struct SolverConfig {
    int max_iterations = 2000;
    /// Stop when ||z^k - z^{k-1}|| / max(1, ||z^k||) falls below this.
    double tolerance = 1e-8;
    MomentumRule momentum = MomentumRule::Classic;
    /// Record the per-iteration cost and step norm.
    bool trace = false;
};

/// Closed-form upper bound on the largest eigenvalue of M:
///   2 dmax / sN^2 + amax / sA^2 + 2 d1(T) / sV^2 + (1/sN^2 + 1/sA^2 + 1/sV^2)
/// with d1(T) = 0, 1, 2 for T = 1, 2, > 2. A missing sigma drops every term
/// that carries it (the matching block of M is empty).
double lipschitz_bound(int max_degree, int max_anchor_count, int window, std::optional<double> sigma_nodes,
                       std::optional<double> sigma_anchors, std::optional<double> sigma_velocity);

/// Bound for an assembled form, using the smallest STD of each kind.
/// Velocity terms are included only for windows longer than one tick.
double lipschitz_bound(const QuadraticForm& form);

/// Euclidean projection onto the constraint balls; x is left unchanged.
void project(Eigen::VectorXd& z, const ConstraintSet& constraints);

/// Projection of one vector onto the ball of `radius` around the origin.
void project_ball(Eigen::Ref<Eigen::VectorXd> v, double radius);

struct TraceEntry {
    int iteration = 0;
    double cost = 0;      // 1/2 z'Mz - b'z
    double step_norm = 0; // ||z^k - z^{k-1}||
};

struct SolveResult {
    Eigen::VectorXd z;
    int iterations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
};

/// Called after iterate k has been computed.
using IterateObserver = std::function<void(int k, const Eigen::VectorXd& z)>;

/// Projected FISTA with fixed step 1/L starting from `z0` (projected first).
/// Throws Divergence on a non-finite cost.
SolveResult fista_solve(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                        const Eigen::VectorXd& z0, const SolverConfig& config, const IterateObserver& observer = {});

/// "iteration,cost,step_norm" header plus one row per entry.
void write_trace(std::ostream& os, const std::vector<TraceEntry>& trace);

} // namespace hcl
