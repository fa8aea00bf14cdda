#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hcl {

/// A point or direction in R^p (p = 2 or 3).
using Vec = Eigen::VectorXd;

/// Undirected node-node range edge, stored with i < j. `bearing` marks
/// membership in the bearing edge set, so bearings are always a subset of
/// ranges.
struct NodeEdge {
    int i = 0;
    int j = 0;
    bool bearing = true;
};

/// Node-anchor range measurement; `bearing` marks an anchor bearing.
struct AnchorLink {
    int node = 0;
    int anchor = 0;
    bool bearing = true;
};

/// Chooses which range edges also carry bearings. Empty predicates mean
/// "every edge".
struct BearingPolicy {
    std::function<bool(int, int)> node_edge;
    std::function<bool(int, int)> anchor_link;

    static BearingPolicy all() { return {}; }
    static BearingPolicy none();
};

/// Network graph at one tick. Node ids index `nodes`, anchor ids index
/// `anchors`; the two id spaces are separate.
struct NetworkSnapshot {
    int dim = 2;
    int tick = 0;
    std::vector<Vec> nodes;
    std::vector<Vec> anchors;
    std::vector<NodeEdge> edges;   // sorted by (i, j)
    std::vector<AnchorLink> links; // sorted by (node, anchor)

    int node_count() const { return static_cast<int>(nodes.size()); }
    int anchor_count() const { return static_cast<int>(anchors.size()); }

    std::optional<std::size_t> find_edge(int a, int b) const;
    std::optional<std::size_t> find_link(int node, int anchor) const;
    std::vector<int> neighbors(int node) const;
    int degree(int node) const;

    /// Throws ConfigError on a broken structural invariant.
    void validate() const;
};

/// Disk-graph construction: every pair (node-node and node-anchor) closer
/// than `range_radius` gets a range measurement.
NetworkSnapshot build_snapshot(std::vector<Vec> nodes, std::vector<Vec> anchors, double range_radius,
                               const BearingPolicy& policy = BearingPolicy::all(), int tick = 0);

/// Snapshot with an explicit topology. Edges are canonicalised (i < j) and
/// sorted; connectivity is checked.
NetworkSnapshot make_snapshot(std::vector<Vec> nodes, std::vector<Vec> anchors, std::vector<NodeEdge> edges,
                              std::vector<AnchorLink> links, int tick = 0);

/// Connectivity of the node graph where every node that sees an anchor is
/// joined through a shared anchor hub. Without anchor links this is plain
/// connectivity of the node-node graph.
bool is_connected(const NetworkSnapshot& snapshot);

int max_degree(const NetworkSnapshot& snapshot);
int max_anchor_count(const NetworkSnapshot& snapshot);

/// Incidence structures over a window of `window` ticks with the topology
/// frozen. Column order of x is time-major: column block (tau * |V| + i).
struct IncidenceStructure {
    int dim = 2;
    int window = 1;
    int node_count = 0;
    Eigen::MatrixXd arc_node;     // C: |E| x |V|, row e has +1 at min id, -1 at max id
    Eigen::MatrixXd velocity;     // C_vel: (T0-1)|V| x T0|V|, row (k, i) links x_i(k), x_i(k-1)
    Eigen::MatrixXd selector;     // E: |links| x |V|

    /// A = (I_T0 (x) C) (x) I_p
    Eigen::MatrixXd edge_operator() const;
    /// N = C_vel (x) I_p
    Eigen::MatrixXd velocity_operator() const;
    /// (I_T0 (x) E) (x) I_p
    Eigen::MatrixXd anchor_operator() const;
};

IncidenceStructure incidence(const NetworkSnapshot& snapshot, int window);

/// Line-oriented text format, one record per line:
///   snapshot <tick> <dim>
///   node <id> <coords...>
///   anchor <id> <coords...>
///   edge <i> <j> <bearing 0|1>
///   link <node> <anchor> <bearing 0|1>
void write_snapshot(std::ostream& os, const NetworkSnapshot& snapshot);
NetworkSnapshot read_snapshot(std::istream& is);

} // namespace hcl
