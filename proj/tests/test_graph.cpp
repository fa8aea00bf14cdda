#include "hcl/errors.hpp"
#include "hcl/graph.hpp"
#include "hcl/measurement.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace hcl;
using hcl::test::v2;

TEST(BuildSnapshot, CollinearNodesOnlyLinkNeighbours)
{
    const auto s = build_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {}, 1.5);
    ASSERT_EQ(s.edges.size(), 2u);
    EXPECT_EQ(s.edges[0].i, 0);
    EXPECT_EQ(s.edges[0].j, 1);
    EXPECT_EQ(s.edges[1].i, 1);
    EXPECT_EQ(s.edges[1].j, 2);
    EXPECT_FALSE(s.find_edge(0, 2));
}

TEST(BuildSnapshot, FarApartNodesAreDisconnected)
{
    EXPECT_THROW(build_snapshot({v2(0, 0), v2(10, 0)}, {}, 1.0), DisconnectedNetwork);
}

TEST(BuildSnapshot, RejectsBadRadiusAndDuplicates)
{
    EXPECT_THROW(build_snapshot({v2(0, 0), v2(1, 0)}, {}, 0.0), ConfigError);
    EXPECT_THROW(build_snapshot({v2(0, 0), v2(0, 0)}, {}, 2.0), ConfigError);
}

TEST(BuildSnapshot, TunedRadiusReachesEightyPercentOfPairs)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, std::sqrt(50.0));
    std::vector<Vec> pts;
    for (int i = 0; i < 10; ++i) {
        pts.push_back(v2(u(rng), u(rng)));
    }
    std::vector<double> d;
    for (int i = 0; i < 10; ++i) {
        for (int j = i + 1; j < 10; ++j) {
            d.push_back((pts[i] - pts[j]).norm());
        }
    }
    std::sort(d.begin(), d.end());
    const double radius = d[35] * (1 + 1e-9);
    const auto s = build_snapshot(pts, {}, radius);
    EXPECT_GE(s.edges.size(), 36u);
    // independent pair count
    std::size_t within = 0;
    for (double x : d) {
        within += x < radius;
    }
    EXPECT_EQ(s.edges.size(), within);
}

TEST(BuildSnapshot, BearingPolicySelectsSubset)
{
    BearingPolicy policy;
    policy.node_edge = [](int i, int j) { return i == 0 && j == 1; };
    policy.anchor_link = [](int, int) { return false; };
    const auto s = build_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {v2(0, 1)}, 1.5, policy);
    int bearings = 0;
    for (const auto& e : s.edges) {
        bearings += e.bearing;
    }
    EXPECT_EQ(bearings, 1);
    for (const auto& l : s.links) {
        EXPECT_FALSE(l.bearing);
    }
    EXPECT_EQ(BearingPolicy::none().node_edge(0, 1), false);
}

TEST(Incidence, PathGraphRows)
{
    const auto s = build_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {}, 1.5);
    const auto inc = incidence(s, 1);
    Eigen::MatrixXd expected(2, 3);
    expected << 1, -1, 0, 0, 1, -1;
    EXPECT_EQ(inc.arc_node, expected);
    EXPECT_EQ(inc.velocity.rows(), 0);
}

TEST(Incidence, VelocityChainRowsPerNode)
{
    const auto s = make_snapshot({v2(0, 0), v2(1, 0)}, {}, {{0, 1, true}}, {});
    const auto inc = incidence(s, 3);
    EXPECT_EQ(inc.velocity.rows(), 4);
    EXPECT_EQ(inc.velocity.cols(), 6);
    // row (step k, node i) links x_i(k) and x_i(k-1), time-major columns
    for (int r = 0; r < 4; ++r) {
        EXPECT_DOUBLE_EQ(inc.velocity.row(r).sum(), 0.0);
        EXPECT_DOUBLE_EQ(inc.velocity.row(r).cwiseAbs().sum(), 2.0);
    }
    EXPECT_EQ(inc.velocity(0, 2), 1.0);
    EXPECT_EQ(inc.velocity(0, 0), -1.0);
}

TEST(Incidence, KroneckerShapesAndDifferences)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<Vec> pts;
    for (int i = 0; i < 5; ++i) {
        pts.push_back(v2(u(rng), u(rng)));
    }
    const auto s = build_snapshot(pts, {v2(1, 1)}, 10.0);
    const int T = 3;
    const auto inc = incidence(s, T);
    const Eigen::MatrixXd A = inc.edge_operator();
    const int E = static_cast<int>(s.edges.size());
    EXPECT_EQ(A.rows(), T * E * 2);
    EXPECT_EQ(A.cols(), T * 5 * 2);
    EXPECT_EQ(inc.velocity_operator().rows(), (T - 1) * 5 * 2);
    EXPECT_EQ(inc.anchor_operator().rows(), T * static_cast<int>(s.links.size()) * 2);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(A.cols());
    EXPECT_LE((A * ones).cwiseAbs().maxCoeff(), 1e-12);
    for (int r = 0; r < inc.selector.rows(); ++r) {
        EXPECT_EQ(inc.selector.row(r).sum(), 1.0);
        EXPECT_EQ(inc.selector.row(r).cwiseAbs().sum(), 1.0);
    }

    Eigen::VectorXd x(A.cols());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        x[k] = u(rng);
    }
    const Eigen::VectorXd ax = A * x;
    for (int tau = 0; tau < T; ++tau) {
        for (int e = 0; e < E; ++e) {
            const auto& edge = s.edges[e];
            const Eigen::VectorXd diff =
                x.segment((tau * 5 + edge.i) * 2, 2) - x.segment((tau * 5 + edge.j) * 2, 2);
            EXPECT_EQ(ax.segment((tau * E + e) * 2, 2), diff);
        }
    }
}

TEST(Degrees, StarAndAnchorCounts)
{
    const auto star = make_snapshot({v2(0, 0), v2(1, 0), v2(-1, 0), v2(0, 1), v2(0, -1)}, {v2(5, 5), v2(6, 6)},
                                    {{0, 1, true}, {0, 2, true}, {0, 3, true}, {0, 4, true}},
                                    {{1, 0, true}, {1, 1, true}, {2, 0, true}});
    EXPECT_EQ(max_degree(star), 4);
    EXPECT_EQ(max_anchor_count(star), 2);
    EXPECT_EQ(star.degree(0), 4);
    EXPECT_EQ(star.neighbors(0), (std::vector<int>{1, 2, 3, 4}));
}

TEST(Snapshot, AnchorHubJoinsComponents)
{
    // two nodes only connected through a common anchor
    const auto s = make_snapshot({v2(0, 0), v2(5, 0)}, {v2(2, 0)}, {}, {{0, 0, true}, {1, 0, true}});
    EXPECT_TRUE(is_connected(s));
    EXPECT_THROW(make_snapshot({v2(0, 0), v2(5, 0)}, {v2(2, 0)}, {}, {{0, 0, true}}), DisconnectedNetwork);
}

TEST(Snapshot, CanonicalisesEdges)
{
    const auto s = make_snapshot({v2(0, 0), v2(1, 0), v2(2, 0)}, {}, {{2, 1, true}, {1, 0, false}}, {});
    EXPECT_EQ(s.edges[0].i, 0);
    EXPECT_EQ(s.edges[0].j, 1);
    EXPECT_FALSE(s.edges[0].bearing);
    EXPECT_EQ(s.edges[1].i, 1);
    EXPECT_THROW(make_snapshot({v2(0, 0), v2(1, 0)}, {}, {{0, 0, true}}, {}), ConfigError);
}

TEST(Snapshot, TextRoundTrip)
{
    const auto s = build_snapshot({v2(0.1, 0.2), v2(1.0 / 3.0, 0), v2(2, 0)}, {v2(0, 1)}, 1.9, BearingPolicy::all(), 4);
    std::stringstream ss;
    write_snapshot(ss, s);
    const auto r = read_snapshot(ss);
    EXPECT_EQ(r.tick, 4);
    ASSERT_EQ(r.nodes.size(), s.nodes.size());
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        EXPECT_EQ(r.nodes[i], s.nodes[i]);
    }
    ASSERT_EQ(r.edges.size(), s.edges.size());
    ASSERT_EQ(r.links.size(), s.links.size());
}

// Bearings are a subset of ranges on every construction path.
TEST(SnapshotProperty, BearingEdgesAreRangeEdges)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vec> pts;
        for (int i = 0; i < 6; ++i) {
            pts.push_back(v2(u(rng), u(rng)));
        }
        BearingPolicy policy;
        const bool pick = coin(rng);
        policy.node_edge = [pick](int i, int j) { return ((i + j) % 2 == 0) == pick; };
        try {
            const auto s = build_snapshot(pts, {v2(u(rng), u(rng))}, 6.0, policy);
            s.validate();
            std::stringstream ss;
            write_snapshot(ss, s);
            const auto r = read_snapshot(ss);
            for (const auto& e : r.edges) {
                EXPECT_TRUE(s.find_edge(e.i, e.j));
                EXPECT_EQ(e.bearing, ((e.i + e.j) % 2 == 0) == pick);
            }
        } catch (const DisconnectedNetwork&) {
        }
    }
}
