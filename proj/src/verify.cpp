#include "hcl/verify.hpp"

#include "hcl/distributed.hpp"
#include "hcl/errors.hpp"
#include "hcl/seeds.hpp"
#include "hcl/table.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace hcl {

namespace {

Vec random_point(Rng& rng, int dim, double scale)
{
    std::uniform_real_distribution<double> u(0.0, scale);
    Vec v(dim);
    for (int d = 0; d < dim; ++d) {
        v[d] = u(rng);
    }
    return v;
}

double relative_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(1.0, b.lpNorm<Eigen::Infinity>());
}

} // namespace

Instance random_instance(Rng& rng, const RandomInstanceSpec& spec)
{
    if (spec.min_nodes < 1 || spec.max_nodes < spec.min_nodes || spec.window < 1) {
        throw ConfigError("bad random instance spec");
    }
    std::uniform_int_distribution<int> node_count(spec.min_nodes, spec.max_nodes);
    std::uniform_int_distribution<int> anchor_count(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sigma(0.2, 1.0);
    std::uniform_real_distribution<double> kappa(50.0, 1000.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (;;) {
        const int n = node_count(rng);
        const int m = anchor_count(rng);
        std::vector<Vec> nodes;
        std::vector<Vec> anchors;
        for (int i = 0; i < n; ++i) {
            nodes.push_back(random_point(rng, spec.dim, 10.0));
        }
        for (int k = 0; k < m; ++k) {
            anchors.push_back(random_point(rng, spec.dim, 10.0));
        }
        std::vector<NodeEdge> edges;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (unit(rng) < 0.8) {
                    edges.push_back({i, j, unit(rng) < 0.7});
                }
            }
        }
        std::vector<AnchorLink> links;
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < m; ++k) {
                if (unit(rng) < 0.5) {
                    links.push_back({i, k, unit(rng) < 0.7});
                }
            }
        }
        if (links.empty()) {
            links.push_back({0, 0, true});
        }
        NetworkSnapshot first;
        try {
            first = make_snapshot(nodes, anchors, edges, links, 0);
        } catch (const DisconnectedNetwork&) {
            continue;
        }

        NoiseParams params;
        params.edge_default = ChannelNoise{sigma(rng), kappa(rng)};
        params.link_default = ChannelNoise{sigma(rng), kappa(rng)};
        params.velocity_default = ChannelNoise{0.1 + 0.2 * unit(rng), kappa(rng)};
        for (const auto& e : first.edges) {
            if (unit(rng) < 0.5) {
                params.edge_overrides[{e.i, e.j}] = ChannelNoise{sigma(rng), kappa(rng)};
            }
        }
        for (const auto& l : first.links) {
            if (unit(rng) < 0.5) {
                params.link_overrides[{l.node, l.anchor}] = ChannelNoise{sigma(rng), kappa(rng)};
            }
        }
        for (int i = 0; i < n; ++i) {
            if (unit(rng) < 0.5) {
                params.velocity_overrides[i] = ChannelNoise{0.1 + 0.2 * unit(rng), kappa(rng)};
            }
        }

        std::vector<NetworkSnapshot> snaps;
        std::vector<Dataset> data;
        std::vector<Vec> x = nodes;
        std::vector<Vec> a = anchors;
        try {
            for (int tau = 0; tau < spec.window; ++tau) {
                std::vector<Vec> beta(n);
                for (int i = 0; i < n; ++i) {
                    beta[i] = Vec(spec.dim);
                    for (int d = 0; d < spec.dim; ++d) {
                        beta[i][d] = gauss(rng);
                    }
                    if (tau > 0) {
                        x[i] += beta[i];
                    }
                }
                if (tau > 0) {
                    for (auto& ak : a) {
                        for (int d = 0; d < spec.dim; ++d) {
                            ak[d] += 0.5 * gauss(rng);
                        }
                    }
                }
                snaps.push_back(make_snapshot(x, a, first.edges, first.links, tau));
                data.push_back(synthesize_dataset(snaps.back(), beta, params, 1.0, rng));
            }
        } catch (const Error&) {
            continue;
        }
        return Instance{make_window(snaps, data), params};
    }
}

DistributedCheck check_distributed(const Instance& instance, const SolverConfig& config)
{
    const auto assembly = assemble(instance.window, instance.params);
    const auto& form = assembly.form;
    const double L = lipschitz_bound(form);
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(form.layout.size());

    std::vector<Eigen::VectorXd> central;
    const auto c = fista_solve(form, assembly.constraints, L, z0, config,
                               [&](int, const Eigen::VectorXd& z) { central.push_back(z); });

    DistributedCheck out;
    out.centralized_iterations = c.iterations;
    DistributedOptions options;
    options.observer = [&](int k, const Eigen::VectorXd& z) {
        if (k - 1 < static_cast<int>(central.size())) {
            out.max_iterate_deviation = std::max(out.max_iterate_deviation, relative_gap(z, central[k - 1]));
        } else {
            out.max_iterate_deviation = std::numeric_limits<double>::infinity();
        }
    };
    const auto d = run_window(form, assembly.constraints, L, z0, config, options);
    out.iterations = d.iterations;
    out.final_deviation = relative_gap(d.z, c.z);
    out.messages = d.messages;
    std::size_t degree_sum = 0;
    for (int i = 0; i < instance.window.topology.node_count(); ++i) {
        degree_sum += static_cast<std::size_t>(instance.window.topology.degree(i));
    }
    out.expected_messages = static_cast<std::size_t>(d.iterations) * degree_sum;
    if (d.iterations != c.iterations) {
        out.max_iterate_deviation = std::max(out.max_iterate_deviation, std::numeric_limits<double>::infinity());
    }

    DistributedOptions reversed;
    for (int i = form.layout.nodes - 1; i >= 0; --i) {
        reversed.update_order.push_back(i);
    }
    const auto r = run_window(form, assembly.constraints, L, z0, config, reversed);
    out.order_independent = r.iterations == d.iterations && (r.z.array() == d.z.array()).all();
    return out;
}

double check_gradient(const Instance& instance, Rng& rng)
{
    const auto assembly = assemble(instance.window, instance.params);
    const auto& layout = assembly.form.layout;
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(layout.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        z[k] = 3.0 * gauss(rng);
    }
    const Eigen::VectorXd g = gradient(assembly.form, z);
    Eigen::VectorXd fd(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        const double h = 1e-5 * std::max(1.0, std::abs(z[k]));
        Eigen::VectorXd zp = z;
        Eigen::VectorXd zm = z;
        zp[k] += h;
        zm[k] -= h;
        fd[k] = (relaxed_cost(zp, instance.window, instance.params) - relaxed_cost(zm, instance.window, instance.params)) /
                (zp[k] - zm[k]);
    }
    return (fd - g).norm() / std::max(1e-12, g.norm());
}

LipschitzCheck check_lipschitz(const Instance& instance, Rng& rng)
{
    const auto assembly = assemble(instance.window, instance.params);
    const auto dense = dense_quadratic(incidence(instance.window.topology, instance.window.length()), assembly.form);
    LipschitzCheck out;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense.matrix, Eigen::EigenvaluesOnly);
    out.largest_eigenvalue = eig.eigenvalues().maxCoeff();
    out.bound = lipschitz_bound(assembly.form);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(dense.matrix.rows());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        z[k] = gauss(rng);
    }
    out.operator_mismatch = (dense.matrix * z - assembly.form.apply(z)).lpNorm<Eigen::Infinity>();
    out.operator_mismatch = std::max(out.operator_mismatch, (dense.linear - assembly.form.linear).lpNorm<Eigen::Infinity>());
    return out;
}

EnvelopeCheck check_envelope(const Instance& instance, const SolverConfig& config, int reference_iterations)
{
    const auto assembly = assemble(instance.window, instance.params);
    const auto& form = assembly.form;
    const double L = lipschitz_bound(form);
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(form.layout.size());
    project(z0, assembly.constraints);

    SolverConfig ref = config;
    ref.max_iterations = reference_iterations;
    ref.tolerance = std::numeric_limits<double>::min();
    ref.trace = false;
    const auto reference = fista_solve(form, assembly.constraints, L, z0, ref);
    const double f_ref = form.value(reference.z);
    const double radius = (z0 - reference.z).squaredNorm();

    SolverConfig logged = config;
    logged.trace = true;
    const auto run = fista_solve(form, assembly.constraints, L, z0, logged);
    EnvelopeCheck out;
    out.iterations = run.iterations;
    out.reference_iterations = reference.iterations;
    out.worst_ratio = -std::numeric_limits<double>::infinity();
    for (const auto& entry : run.trace) {
        const double k1 = entry.iteration + 1.0;
        const double bound = 2.0 * L * radius / (k1 * k1);
        out.worst_ratio = std::max(out.worst_ratio, (entry.cost - f_ref) / bound);
    }
    return out;
}

std::vector<VerifyRow> run_verify(std::uint64_t seed, const VerifyOptions& options)
{
    std::vector<VerifyRow> rows;
    const int windows[] = {1, 2, 4};
    for (int k = 0; k < options.distributed_instances; ++k) {
        Rng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(k)));
        const auto inst = random_instance(rng, {2, 8, windows[k % 3], 2 + (k % 2)});
        const auto c = check_distributed(inst, SolverConfig{});
        rows.push_back({"distributed-iterates", k, c.max_iterate_deviation, 1e-12, c.max_iterate_deviation <= 1e-12});
        rows.push_back({"distributed-final", k, c.final_deviation, 1e-9, c.final_deviation <= 1e-9});
        rows.push_back({"distributed-messages", k, static_cast<double>(c.messages),
                        static_cast<double>(c.expected_messages), c.messages == c.expected_messages});
        rows.push_back({"distributed-order", k, c.order_independent ? 1.0 : 0.0, 1.0, c.order_independent});
    }
    for (int k = 0; k < options.gradient_instances; ++k) {
        Rng rng(derive_seed(seed, 2, static_cast<std::uint64_t>(k)));
        const auto inst = random_instance(rng, {2, 8, 1 + k % 4, 2 + (k % 2)});
        const double err = check_gradient(inst, rng);
        rows.push_back({"gradient", k, err, 1e-6, err <= 1e-6});
    }
    const int lip_windows[] = {1, 2, 3, 5};
    for (int k = 0; k < options.lipschitz_instances; ++k) {
        Rng rng(derive_seed(seed, 3, static_cast<std::uint64_t>(k)));
        const auto inst = random_instance(rng, {2, 8, lip_windows[k % 4], 2 + (k % 2)});
        const auto c = check_lipschitz(inst, rng);
        rows.push_back({"lipschitz", k, c.largest_eigenvalue, c.bound, c.largest_eigenvalue <= c.bound});
        rows.push_back({"dense-operator", k, c.operator_mismatch, 1e-9, c.operator_mismatch <= 1e-9});
    }
    const double toy = lipschitz_bound(2, 1, 1, 1.0, 1.0, 1.0);
    rows.push_back({"lipschitz-toy", 0, toy, 8.0, toy == 8.0});
    for (int k = 0; k < options.envelope_instances; ++k) {
        Rng rng(derive_seed(seed, 4, static_cast<std::uint64_t>(k)));
        const auto inst = random_instance(rng, {2, 3, 1 + k % 3, 2});
        const auto c = check_envelope(inst, SolverConfig{}, options.reference_iterations);
        rows.push_back({"fista-envelope", k, c.worst_ratio, 1.0, c.worst_ratio <= 1.0});
    }
    return rows;
}

void write_verify(std::ostream& os, const std::vector<VerifyRow>& rows)
{
    os << "suite,instance,value,threshold,pass\n";
    for (const auto& r : rows) {
        os << r.suite << ',' << r.instance << ',' << format_number(r.value) << ',' << format_number(r.threshold) << ','
           << (r.pass ? 1 : 0) << '\n';
    }
}

} // namespace hcl
