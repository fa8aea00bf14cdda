#include "hcl/solver.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace hcl {

double momentum_coefficient(MomentumRule rule, int k)
{
    if (k <= 1) {
        return 0.0;
    }
    switch (rule) {
    case MomentumRule::Classic:
        return static_cast<double>(k - 2) / static_cast<double>(k + 1);
    case MomentumRule::Listing:
        return static_cast<double>(k - 1) / static_cast<double>(k);
    }
    return 0.0;
}

namespace {

double inverse_square(std::optional<double> sigma, const char* what)
{
    if (!sigma) {
        return 0.0;
    }
    if (!(*sigma > 0.0)) {
        throw DomainError(std::string("non-positive ") + what + " standard deviation in Lipschitz bound");
    }
    return 1.0 / (*sigma * *sigma);
}

} // namespace

double lipschitz_bound(int max_degree, int max_anchor_count, int window, std::optional<double> sigma_nodes,
                       std::optional<double> sigma_anchors, std::optional<double> sigma_velocity)
{
    const double wn = inverse_square(sigma_nodes, "node-node");
    const double wa = inverse_square(sigma_anchors, "node-anchor");
    const double wv = inverse_square(sigma_velocity, "velocity");
    const int chain_degree = window <= 1 ? 0 : (window == 2 ? 1 : 2);
    return wn * 2.0 * max_degree + wa * max_anchor_count + wv * 2.0 * chain_degree + (wn + wa + wv);
}

double lipschitz_bound(const QuadraticForm& form)
{
    // Largest weight = smallest sigma.
    auto sigma_of = [](double max_weight) -> std::optional<double> {
        if (max_weight <= 0.0) {
            return std::nullopt;
        }
        return 1.0 / std::sqrt(max_weight);
    };
    double wn = 0.0;
    double wa = 0.0;
    double wv = 0.0;
    for (const auto& t : form.edge_terms) {
        wn = std::max(wn, t.weight);
    }
    for (const auto& t : form.link_terms) {
        wa = std::max(wa, t.weight);
    }
    if (form.layout.window > 1) {
        for (double w : form.velocity_weights) {
            wv = std::max(wv, w);
        }
    }
    return lipschitz_bound(form.max_degree, form.max_anchor_count, form.layout.window, sigma_of(wn), sigma_of(wa),
                           sigma_of(wv));
}

void project_ball(Eigen::Ref<Eigen::VectorXd> v, double radius)
{
    // Plain loop: the sum order must not depend on the alignment of v.
    double sq = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        sq += v[k] * v[k];
    }
    const double n = std::sqrt(sq);
    if (n > radius) {
        if (radius <= 0.0) {
            v.setZero();
        } else {
            v *= radius / n;
        }
    }
}

void project(Eigen::VectorXd& z, const ConstraintSet& c)
{
    const auto& L = c.layout;
    const int p = L.dim;
    for (int tau = 0; tau < L.window; ++tau) {
        for (int e = 0; e < L.edges; ++e) {
            project_ball(z.segment(L.y(tau, e), p), c.y_radius[static_cast<std::size_t>(tau) * L.edges + e]);
        }
        for (int l = 0; l < L.links; ++l) {
            project_ball(z.segment(L.w(tau, l), p), c.w_radius[static_cast<std::size_t>(tau) * L.links + l]);
        }
    }
    for (int k = 1; k < L.window; ++k) {
        for (int i = 0; i < L.nodes; ++i) {
            project_ball(z.segment(L.s(k, i), p), c.s_radius[static_cast<std::size_t>(k - 1) * L.nodes + i]);
        }
    }
}

SolveResult fista_solve(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                        const Eigen::VectorXd& z0, const SolverConfig& config, const IterateObserver& observer)
{
    if (z0.size() != form.layout.size()) {
        throw ShapeMismatch("initial point has the wrong dimension");
    }
    if (!(lipschitz > 0.0)) {
        throw DomainError("Lipschitz constant must be positive");
    }
    if (config.max_iterations < 1 || !(config.tolerance > 0.0)) {
        throw ConfigError("solver needs max_iterations >= 1 and a positive tolerance");
    }
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd current = z0;
    project(current, constraints);
    Eigen::VectorXd previous = current;
    Eigen::VectorXd extrapolated(current.size());

    SolveResult result;
    for (int k = 1; k <= config.max_iterations; ++k) {
        const double beta = momentum_coefficient(config.momentum, k);
        extrapolated = current + beta * (current - previous);
        Eigen::VectorXd next = extrapolated - step * (form.apply(extrapolated) - form.linear);
        project(next, constraints);

        const double step_norm = (next - current).norm();
        previous.swap(current);
        current.swap(next);
        result.iterations = k;

        if (config.trace || !std::isfinite(step_norm)) {
            const double cost = form.value(current);
            if (!std::isfinite(cost)) {
                throw Divergence("divergence: non-finite cost at iteration " + std::to_string(k));
            }
            if (config.trace) {
                result.trace.push_back({k, cost, step_norm});
            }
        }
        if (observer) {
            observer(k, current);
        }
        if (step_norm / std::max(1.0, current.norm()) < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.z = std::move(current);
    return result;
}

void write_trace(std::ostream& os, const std::vector<TraceEntry>& trace)
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "iteration,cost,step_norm\n";
    for (const auto& t : trace) {
        os << t.iteration << ',' << t.cost << ',' << t.step_norm << '\n';
    }
    os.precision(old_precision);
}

} // namespace hcl
