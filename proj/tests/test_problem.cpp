#include "hcl/errors.hpp"
#include "hcl/problem.hpp"
#include "hcl/verify.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

using namespace hcl;
using hcl::test::noiseless;
using hcl::test::single_window;
using hcl::test::v2;

namespace {

// Independent transcription of the maximum-likelihood cost.
double mle_oracle(const Eigen::VectorXd& x, const MeasurementWindow& w, const NoiseParams& prm)
{
    const int p = w.dim();
    const int n = w.topology.node_count();
    auto pos = [&](int tau, int i) -> Vec { return x.segment((tau * n + i) * p, p); };
    double f = 0;
    for (int tau = 0; tau < w.length(); ++tau) {
        const auto& d = w.data[tau];
        for (std::size_t e = 0; e < w.topology.edges.size(); ++e) {
            const auto& ed = w.topology.edges[e];
            const double s = prm.edge(ed.i, ed.j).sigma;
            const Vec diff = pos(tau, ed.i) - pos(tau, ed.j);
            const double dist = std::sqrt(diff.dot(diff));
            f += (d.edges[e].range - dist) * (d.edges[e].range - dist) / (2 * s * s);
            if (d.edges[e].bearing) {
                f -= prm.edge(ed.i, ed.j).kappa * d.edges[e].bearing->dot(diff) / dist;
            }
        }
        for (std::size_t l = 0; l < w.topology.links.size(); ++l) {
            const auto& lk = w.topology.links[l];
            const double s = prm.link(lk.node, lk.anchor).sigma;
            const Vec diff = pos(tau, lk.node) - w.anchor_positions[tau][lk.anchor];
            const double dist = std::sqrt(diff.dot(diff));
            f += (d.links[l].range - dist) * (d.links[l].range - dist) / (2 * s * s);
            if (d.links[l].bearing) {
                f -= prm.link(lk.node, lk.anchor).kappa * d.links[l].bearing->dot(diff) / dist;
            }
        }
        if (tau == 0) {
            continue;
        }
        for (int i = 0; i < n; ++i) {
            const auto& v = d.velocities[i];
            const Vec step = pos(tau, i) - pos(tau - 1, i);
            const double len = std::sqrt(step.dot(step));
            const double s = prm.velocity(i).sigma;
            f += (v.speed * d.dt - len) * (v.speed * d.dt - len) / (2 * s * s);
            f -= prm.velocity(i).kappa * v.heading.dot(step) / len;
        }
    }
    return f;
}

Eigen::VectorXd true_x(const MeasurementWindow& w, const std::vector<std::vector<Vec>>& pos)
{
    const auto L = layout_for(w);
    Eigen::VectorXd x(L.x_size());
    for (int tau = 0; tau < L.window; ++tau) {
        for (int i = 0; i < L.nodes; ++i) {
            x.segment(L.x(tau, i), L.dim) = pos[tau][i];
        }
    }
    return x;
}

// y, w, s on the sphere of their radius along the x differences.
Eigen::VectorXd lift(const Eigen::VectorXd& x, const MeasurementWindow& w)
{
    const auto L = layout_for(w);
    const int p = L.dim;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(L.size());
    z.head(L.x_size()) = x;
    for (int tau = 0; tau < L.window; ++tau) {
        for (int e = 0; e < L.edges; ++e) {
            const auto& ed = w.topology.edges[e];
            const Vec diff = x.segment(L.x(tau, ed.i), p) - x.segment(L.x(tau, ed.j), p);
            z.segment(L.y(tau, e), p) = diff.normalized() * w.data[tau].edges[e].range;
        }
        for (int l = 0; l < L.links; ++l) {
            const auto& lk = w.topology.links[l];
            const Vec diff = x.segment(L.x(tau, lk.node), p) - w.anchor_positions[tau][lk.anchor];
            z.segment(L.w(tau, l), p) = diff.normalized() * w.data[tau].links[l].range;
        }
    }
    for (int k = 1; k < L.window; ++k) {
        for (int i = 0; i < L.nodes; ++i) {
            const Vec diff = x.segment(L.x(k, i), p) - x.segment(L.x(k - 1, i), p);
            z.segment(L.s(k, i), p) = diff.normalized() * (w.data[k].velocities[i].speed * w.data[k].dt);
        }
    }
    return z;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng, double scale = 1.0)
{
    std::normal_distribution<double> g(0.0, scale);
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        z[k] = g(rng);
    }
    return z;
}

} // namespace

TEST(MleCost, TruthWithNoiselessDataHitsAngleMaximum)
{
    const auto s = make_snapshot({v2(0, 0), v2(3, 0), v2(0, 4)}, {v2(5, 5)}, {{0, 1, true}, {0, 2, true}, {1, 2, false}},
                                 {{0, 0, true}});
    Rng rng(1);
    auto prm = NoiseParams::uniform(1e-12, 1e12, 1, 1);
    const auto d = synthesize_dataset(s, {}, prm, 1.0, rng);
    prm = NoiseParams::uniform(1.0, 7.0, 1, 1);
    const auto w = single_window(s, d);
    const double f = mle_cost(true_x(w, {s.nodes}), w, prm);
    EXPECT_NEAR(f, -3 * 7.0, 1e-6);
}

TEST(MleCost, SingleEdgeDistanceTerm)
{
    const auto s = make_snapshot({v2(0, 0), v2(2, 0)}, {}, {{0, 1, false}}, {});
    Dataset d;
    d.edges.push_back({1.0, std::nullopt});
    const auto w = single_window(s, d);
    EXPECT_DOUBLE_EQ(mle_cost(true_x(w, {s.nodes}), w, NoiseParams::uniform(1, 1, 1, 1)), 0.5);
}

TEST(MleCost, CoincidentPointsWithBearingAreDegenerate)
{
    const auto s = make_snapshot({v2(0, 0), v2(2, 0)}, {}, {{0, 1, true}}, {});
    Dataset d;
    d.edges.push_back({1.0, v2(1, 0)});
    const auto w = single_window(s, d);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    EXPECT_THROW(mle_cost(x, w, NoiseParams::uniform(1, 1, 1, 1)), DegenerateGeometry);
}

TEST(MleCost, MatchesIndependentTranscription)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(100 + k);
        const auto inst = random_instance(rng, {2, 6, 1 + k % 3, 2 + k % 2});
        const auto L = layout_for(inst.window);
        const Eigen::VectorXd x = random_vector(L.x_size(), rng, 5.0);
        const double want = mle_oracle(x, inst.window, inst.params);
        EXPECT_NEAR(mle_cost(x, inst.window, inst.params), want, 1e-12 * std::max(1.0, std::abs(want)));
    }
}

TEST(RelaxedCost, ZeroWithAnchorsAtOrigin)
{
    const auto s = make_snapshot({v2(1, 0), v2(2, 0)}, {v2(0, 0)}, {{0, 1, false}}, {{0, 0, false}});
    Dataset d;
    d.edges.push_back({1.0, std::nullopt});
    d.links.push_back({1.0, std::nullopt});
    const auto w = single_window(s, d);
    EXPECT_EQ(relaxed_cost(Eigen::VectorXd::Zero(layout_for(w).size()), w, NoiseParams::uniform(1, 1, 1, 1)), 0.0);
}

TEST(RelaxedCost, ExactEdgeVariablesLeaveOnlyAngleTerms)
{
    const auto s = make_snapshot({v2(0, 0), v2(3, 0), v2(0, 4)}, {}, {{0, 1, true}, {0, 2, true}, {1, 2, true}}, {});
    Rng rng(3);
    const auto d = synthesize_dataset(s, {}, noiseless(), 1.0, rng);
    const auto w = single_window(s, d);
    const auto prm = NoiseParams::uniform(0.5, 40, 1, 1);
    const Eigen::VectorXd z = lift(true_x(w, {s.nodes}), w);
    const auto L = layout_for(w);
    double expected = 0;
    for (int e = 0; e < L.edges; ++e) {
        expected -= 40 * d.edges[e].bearing->dot(z.segment(L.y(0, e), 2)) / d.edges[e].range;
    }
    EXPECT_NEAR(relaxed_cost(z, w, prm), expected, 1e-9);
}

TEST(RelaxedCost, LiftEqualsMleAndOptimumBelowIt)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(200 + k);
        const auto inst = random_instance(rng, {2, 6, 1 + k % 3, 2});
        const auto L = layout_for(inst.window);
        const Eigen::VectorXd x = random_vector(L.x_size(), rng, 5.0);
        const double mle = mle_cost(x, inst.window, inst.params);
        EXPECT_NEAR(relaxed_cost(lift(x, inst.window), inst.window, inst.params), mle,
                    1e-9 * std::max(1.0, std::abs(mle)));
    }
}

TEST(RelaxedCost, DifferenceEqualsDenseQuadratic)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(300 + k);
        const auto inst = random_instance(rng, {2, 6, 1 + k % 4, 2 + k % 2});
        const auto a = assemble(inst.window, inst.params);
        const auto dense = dense_quadratic(incidence(inst.window.topology, inst.window.length()), a.form);
        const Eigen::VectorXd z = random_vector(a.form.layout.size(), rng, 3.0);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(z.size());
        const double lhs = relaxed_cost(z, inst.window, inst.params) - relaxed_cost(zero, inst.window, inst.params);
        const double rhs = 0.5 * z.dot(dense.matrix * z) - dense.linear.dot(z);
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
        EXPECT_NEAR(relaxed_cost(zero, inst.window, inst.params), a.form.constant, 1e-10 * std::max(1.0, a.form.constant));
    }
}

TEST(RelaxedCost, ConvexAlongSegments)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(400 + k);
        const auto inst = random_instance(rng, {2, 6, 1 + k % 3, 2});
        const auto n = layout_for(inst.window).size();
        const Eigen::VectorXd z1 = random_vector(n, rng, 4.0);
        const Eigen::VectorXd z2 = random_vector(n, rng, 4.0);
        for (double theta : {0.0, 0.25, 0.5, 0.9, 1.0}) {
            const double mid = relaxed_cost(theta * z1 + (1 - theta) * z2, inst.window, inst.params);
            const double chord = theta * relaxed_cost(z1, inst.window, inst.params) +
                                 (1 - theta) * relaxed_cost(z2, inst.window, inst.params);
            EXPECT_LE(mid, chord + 1e-9 * std::max(1.0, std::abs(chord)));
        }
    }
}

TEST(Assemble, OneNodeOneAnchorBlock)
{
    const auto s = make_snapshot({v2(1, 1)}, {v2(0, 0)}, {}, {{0, 0, false}});
    Dataset d;
    d.links.push_back({std::sqrt(2.0), std::nullopt});
    const auto w = single_window(s, d);
    const auto a = assemble(w, NoiseParams::uniform(1, 1, 1, 1));
    const auto dense = dense_quadratic(incidence(s, 1), a.form);
    Eigen::MatrixXd expected(4, 4);
    expected << 1, 0, -1, 0, 0, 1, 0, -1, -1, 0, 1, 0, 0, -1, 0, 1;
    EXPECT_EQ(dense.matrix, expected);
}

TEST(Assemble, NoAnchorsMeansNoAnchorLinearTerm)
{
    Rng rng(4);
    const auto s = make_snapshot({v2(0, 0), v2(3, 0)}, {}, {{0, 1, true}}, {});
    const auto d = synthesize_dataset(s, {}, NoiseParams::uniform(0.5, 100, 1, 1), 1.0, rng);
    const auto a = assemble(single_window(s, d), NoiseParams::uniform(0.5, 100, 1, 1));
    EXPECT_TRUE(a.form.linear.head(a.form.layout.x_size()).isZero(0));
    EXPECT_EQ(a.form.layout.s_size(), 0);
    EXPECT_EQ(a.form.constant, 0.0);
}

TEST(Assemble, DoublingKappaDoublesOnlyThatPull)
{
    Rng rng(5);
    const auto inst = random_instance(rng, {3, 5, 2, 2});
    const auto& topo = inst.window.topology;
    int e = -1;
    for (std::size_t k = 0; k < topo.edges.size(); ++k) {
        if (inst.window.data[0].edges[k].bearing) {
            e = static_cast<int>(k);
            break;
        }
    }
    ASSERT_GE(e, 0);
    auto doubled = inst.params;
    const auto key = std::make_pair(topo.edges[e].i, topo.edges[e].j);
    auto noise = inst.params.edge(key.first, key.second);
    noise.kappa *= 2;
    doubled.edge_overrides[key] = noise;
    const auto a = assemble(inst.window, inst.params);
    const auto b = assemble(inst.window, doubled);
    const auto& L = a.form.layout;
    Eigen::VectorXd expected = a.form.linear;
    for (int tau = 0; tau < L.window; ++tau) {
        expected.segment(L.y(tau, e), L.dim) *= 2;
    }
    EXPECT_EQ(b.form.linear, expected);
    EXPECT_EQ(b.form.apply(Eigen::VectorXd::Ones(L.size())), a.form.apply(Eigen::VectorXd::Ones(L.size())));
}

TEST(Assemble, ZeroRangeWithBearing)
{
    const auto s = make_snapshot({v2(0, 0), v2(1, 0)}, {}, {{0, 1, true}}, {});
    Dataset d;
    d.edges.push_back({0.0, v2(1, 0)});
    const auto w = single_window(s, d);
    const auto prm = NoiseParams::uniform(1, 10, 1, 1);
    const auto a = assemble(w, prm);
    EXPECT_EQ(a.constraints.y_radius[0], 0.0);
    EXPECT_TRUE(a.form.edge_pull[0].isZero(0));
    AssemblyOptions strict;
    strict.strict_degenerate = true;
    EXPECT_THROW(assemble(w, prm, strict), DegenerateMeasurement);
}

TEST(Window, EdgeSetMustStayFixed)
{
    const auto a = make_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {}, {{0, 1, true}, {1, 2, true}}, {});
    const auto b = make_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {}, {{0, 1, true}, {0, 2, true}}, {});
    Rng rng(1);
    std::vector<Vec> vel(3, v2(0, 0));
    std::vector<NetworkSnapshot> snaps{a, b};
    std::vector<Dataset> data{synthesize_dataset(a, vel, noiseless(), 1, rng), synthesize_dataset(b, vel, noiseless(), 1, rng)};
    EXPECT_THROW(make_window(snaps, data), ConfigError);
    std::vector<Dataset> no_vel{synthesize_dataset(a, {}, noiseless(), 1, rng), synthesize_dataset(a, {}, noiseless(), 1, rng)};
    std::vector<NetworkSnapshot> same{a, a};
    EXPECT_THROW(make_window(same, no_vel), ConfigError);
}

TEST(QuadraticForm, SymmetricPsdAndMatchesDense)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(500 + k);
        const auto inst = random_instance(rng, {2, 8, 1 + k % 5, 2 + k % 2});
        const auto a = assemble(inst.window, inst.params);
        const auto dense = dense_quadratic(incidence(inst.window.topology, inst.window.length()), a.form);
        ASSERT_LE(dense.matrix.rows(), 500);
        EXPECT_LE((dense.matrix - dense.matrix.transpose()).norm(), 1e-10);
        const Eigen::VectorXd z = random_vector(dense.matrix.rows(), rng);
        EXPECT_GE(z.dot(a.form.apply(z)), 0.0);
        EXPECT_LE((dense.matrix * z - a.form.apply(z)).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, dense.matrix.cwiseAbs().maxCoeff()));
        EXPECT_LE((dense.linear - a.form.linear).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.form.linear.cwiseAbs().maxCoeff()));
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense.matrix, Eigen::EigenvaluesOnly);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Gradient, ZeroPointAndStationaryPoint)
{
    Rng rng(6);
    const auto inst = random_instance(rng, {2, 5, 2, 2});
    const auto a = assemble(inst.window, inst.params);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(a.form.layout.size());
    EXPECT_EQ(gradient(a.form, zero), -a.form.linear);
    // stationary point of the unconstrained quadratic through the dense form
    const auto dense = dense_quadratic(incidence(inst.window.topology, inst.window.length()), a.form);
    const Eigen::VectorXd zs = dense.matrix.completeOrthogonalDecomposition().solve(dense.linear);
    if ((dense.matrix * zs - dense.linear).norm() < 1e-8) {
        EXPECT_LE(gradient(a.form, zs).norm(), 1e-7 * std::max(1.0, a.form.linear.norm()));
    }
    EXPECT_THROW(gradient(a.form, Eigen::VectorXd::Zero(3)), ShapeMismatch);
}

TEST(Gradient, MatchesCentralDifferences)
{
    for (int k = 0; k < 10; ++k) {
        Rng rng(600 + k);
        const auto inst = random_instance(rng, {2, 6, 1 + k % 3, 2 + k % 2});
        const auto a = assemble(inst.window, inst.params);
        const Eigen::VectorXd z = random_vector(a.form.layout.size(), rng, 3.0);
        const Eigen::VectorXd g = gradient(a.form, z);
        auto q = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(a.form.apply(v)) - a.form.linear.dot(v); };
        Eigen::VectorXd fd(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(z[i]));
            Eigen::VectorXd zp = z;
            Eigen::VectorXd zm = z;
            zp[i] += h;
            zm[i] -= h;
            fd[i] = (q(zp) - q(zm)) / (2 * h);
        }
        EXPECT_LE((fd - g).norm(), 1e-6 * g.norm());
    }
}

TEST(DenseDump, WritesEveryEntry)
{
    const auto s = make_snapshot({v2(1, 1)}, {v2(0, 0)}, {}, {{0, 0, false}});
    Dataset d;
    d.links.push_back({1.0, std::nullopt});
    const auto a = assemble(single_window(s, d), NoiseParams::uniform(1, 1, 1, 1));
    std::stringstream ss;
    write_dense(ss, dense_quadratic(incidence(s, 1), a.form));
    int m = 0;
    int b = 0;
    std::string line;
    while (std::getline(ss, line)) {
        m += line.rfind("M ", 0) == 0;
        b += line.rfind("b ", 0) == 0;
    }
    EXPECT_EQ(b, 4);
    EXPECT_GE(m, 4);
}
