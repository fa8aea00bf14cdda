#include "hcl/graph.hpp"

#include "hcl/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace hcl {

BearingPolicy BearingPolicy::none()
{
    return {[](int, int) { return false; }, [](int, int) { return false; }};
}

std::optional<std::size_t> NetworkSnapshot::find_edge(int a, int b) const
{
    const int lo = std::min(a, b);
    const int hi = std::max(a, b);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{lo, hi},
                               [](const NodeEdge& e, const std::pair<int, int>& key) {
                                   return std::pair{e.i, e.j} < key;
                               });
    if (it == edges.end() || it->i != lo || it->j != hi) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - edges.begin());
}

std::optional<std::size_t> NetworkSnapshot::find_link(int node, int anchor) const
{
    auto it = std::lower_bound(links.begin(), links.end(), std::pair{node, anchor},
                               [](const AnchorLink& l, const std::pair<int, int>& key) {
                                   return std::pair{l.node, l.anchor} < key;
                               });
    if (it == links.end() || it->node != node || it->anchor != anchor) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - links.begin());
}

std::vector<int> NetworkSnapshot::neighbors(int node) const
{
    std::vector<int> out;
    for (const auto& e : edges) {
        if (e.i == node) {
            out.push_back(e.j);
        } else if (e.j == node) {
            out.push_back(e.i);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

int NetworkSnapshot::degree(int node) const
{
    return static_cast<int>(std::count_if(edges.begin(), edges.end(),
                                          [node](const NodeEdge& e) { return e.i == node || e.j == node; }));
}

void NetworkSnapshot::validate() const
{
    if (dim != 2 && dim != 3) {
        throw ConfigError("snapshot dimension must be 2 or 3");
    }
    for (const auto& x : nodes) {
        if (x.size() != dim) {
            throw ConfigError("node position has wrong dimension");
        }
    }
    for (const auto& a : anchors) {
        if (a.size() != dim) {
            throw ConfigError("anchor position has wrong dimension");
        }
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& edge = edges[e];
        if (edge.i == edge.j) {
            throw ConfigError("self edge on node " + std::to_string(edge.i));
        }
        if (edge.i > edge.j || edge.i < 0 || edge.j >= node_count()) {
            throw ConfigError("edge is not canonical or references an unknown node");
        }
        if (e > 0 && std::pair{edges[e - 1].i, edges[e - 1].j} >= std::pair{edge.i, edge.j}) {
            throw ConfigError("edges are not sorted or contain duplicates");
        }
    }
    for (std::size_t l = 0; l < links.size(); ++l) {
        const auto& link = links[l];
        if (link.node < 0 || link.node >= node_count() || link.anchor < 0 || link.anchor >= anchor_count()) {
            throw ConfigError("anchor link references an unknown node or anchor");
        }
        if (l > 0 && std::pair{links[l - 1].node, links[l - 1].anchor} >= std::pair{link.node, link.anchor}) {
            throw ConfigError("anchor links are not sorted or contain duplicates");
        }
    }
}

namespace {

void canonicalise(std::vector<NodeEdge>& edges, std::vector<AnchorLink>& links)
{
    for (auto& e : edges) {
        if (e.i > e.j) {
            std::swap(e.i, e.j);
        }
    }
    std::sort(edges.begin(), edges.end(),
              [](const NodeEdge& a, const NodeEdge& b) { return std::pair{a.i, a.j} < std::pair{b.i, b.j}; });
    std::sort(links.begin(), links.end(), [](const AnchorLink& a, const AnchorLink& b) {
        return std::pair{a.node, a.anchor} < std::pair{b.node, b.anchor};
    });
}

int infer_dim(const std::vector<Vec>& nodes, const std::vector<Vec>& anchors)
{
    if (!nodes.empty()) {
        return static_cast<int>(nodes.front().size());
    }
    if (!anchors.empty()) {
        return static_cast<int>(anchors.front().size());
    }
    return 2;
}

} // namespace

NetworkSnapshot make_snapshot(std::vector<Vec> nodes, std::vector<Vec> anchors, std::vector<NodeEdge> edges,
                              std::vector<AnchorLink> links, int tick)
{
    canonicalise(edges, links);
    NetworkSnapshot snap;
    snap.dim = infer_dim(nodes, anchors);
    snap.tick = tick;
    snap.nodes = std::move(nodes);
    snap.anchors = std::move(anchors);
    snap.edges = std::move(edges);
    snap.links = std::move(links);
    snap.validate();
    if (!is_connected(snap)) {
        throw DisconnectedNetwork();
    }
    return snap;
}

NetworkSnapshot build_snapshot(std::vector<Vec> nodes, std::vector<Vec> anchors, double range_radius,
                               const BearingPolicy& policy, int tick)
{
    if (!(range_radius > 0.0)) {
        throw ConfigError("range radius must be positive");
    }
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            if ((nodes[a] - nodes[b]).norm() == 0.0) {
                throw ConfigError("node positions must be distinct");
            }
        }
    }
    std::vector<NodeEdge> edges;
    for (int a = 0; a < static_cast<int>(nodes.size()); ++a) {
        for (int b = a + 1; b < static_cast<int>(nodes.size()); ++b) {
            if ((nodes[a] - nodes[b]).norm() <= range_radius) {
                const bool bearing = policy.node_edge ? policy.node_edge(a, b) : true;
                edges.push_back({a, b, bearing});
            }
        }
    }
    std::vector<AnchorLink> links;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        for (int k = 0; k < static_cast<int>(anchors.size()); ++k) {
            if ((nodes[i] - anchors[k]).norm() <= range_radius) {
                const bool bearing = policy.anchor_link ? policy.anchor_link(i, k) : true;
                links.push_back({i, k, bearing});
            }
        }
    }
    return make_snapshot(std::move(nodes), std::move(anchors), std::move(edges), std::move(links), tick);
}

bool is_connected(const NetworkSnapshot& snapshot)
{
    const int n = snapshot.node_count();
    if (n == 0) {
        return true;
    }
    // Union-find over nodes plus one hub vertex (index n) for "has an anchor".
    std::vector<int> parent(n + 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
    for (const auto& e : snapshot.edges) {
        unite(e.i, e.j);
    }
    const bool has_links = !snapshot.links.empty();
    for (const auto& l : snapshot.links) {
        unite(l.node, n);
    }
    const int root = find(has_links ? n : 0);
    for (int i = 0; i < n; ++i) {
        if (find(i) != root) {
            return false;
        }
    }
    return true;
}

int max_degree(const NetworkSnapshot& snapshot)
{
    std::vector<int> deg(snapshot.nodes.size(), 0);
    for (const auto& e : snapshot.edges) {
        ++deg[e.i];
        ++deg[e.j];
    }
    return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

int max_anchor_count(const NetworkSnapshot& snapshot)
{
    std::vector<int> count(snapshot.nodes.size(), 0);
    for (const auto& l : snapshot.links) {
        ++count[l.node];
    }
    return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
}

IncidenceStructure incidence(const NetworkSnapshot& snapshot, int window)
{
    if (window < 1) {
        throw ConfigError("window length must be at least 1");
    }
    const int n = snapshot.node_count();
    IncidenceStructure inc;
    inc.dim = snapshot.dim;
    inc.window = window;
    inc.node_count = n;

    inc.arc_node = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(snapshot.edges.size()), n);
    for (std::size_t e = 0; e < snapshot.edges.size(); ++e) {
        inc.arc_node(static_cast<Eigen::Index>(e), snapshot.edges[e].i) = 1.0;
        inc.arc_node(static_cast<Eigen::Index>(e), snapshot.edges[e].j) = -1.0;
    }

    inc.velocity = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(window - 1) * n, static_cast<Eigen::Index>(window) * n);
    for (int k = 1; k < window; ++k) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(k - 1) * n + i;
            inc.velocity(row, static_cast<Eigen::Index>(k) * n + i) = 1.0;
            inc.velocity(row, static_cast<Eigen::Index>(k - 1) * n + i) = -1.0;
        }
    }

    inc.selector = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(snapshot.links.size()), n);
    for (std::size_t l = 0; l < snapshot.links.size(); ++l) {
        inc.selector(static_cast<Eigen::Index>(l), snapshot.links[l].node) = 1.0;
    }
    return inc;
}

Eigen::MatrixXd IncidenceStructure::edge_operator() const
{
    const Eigen::MatrixXd time_id = Eigen::MatrixXd::Identity(window, window);
    const Eigen::MatrixXd space_id = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd tc = Eigen::kroneckerProduct(time_id, arc_node);
    return Eigen::kroneckerProduct(tc, space_id);
}

Eigen::MatrixXd IncidenceStructure::velocity_operator() const
{
    const Eigen::MatrixXd space_id = Eigen::MatrixXd::Identity(dim, dim);
    return Eigen::kroneckerProduct(velocity, space_id);
}

Eigen::MatrixXd IncidenceStructure::anchor_operator() const
{
    const Eigen::MatrixXd time_id = Eigen::MatrixXd::Identity(window, window);
    const Eigen::MatrixXd space_id = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd te = Eigen::kroneckerProduct(time_id, selector);
    return Eigen::kroneckerProduct(te, space_id);
}

namespace {

void write_coords(std::ostream& os, const Vec& v)
{
    for (Eigen::Index d = 0; d < v.size(); ++d) {
        os << ' ' << v(d);
    }
}

Vec read_coords(std::istringstream& line, int dim)
{
    Vec v(dim);
    for (int d = 0; d < dim; ++d) {
        if (!(line >> v(d))) {
            throw ConfigError("snapshot record has too few coordinates");
        }
    }
    return v;
}

} // namespace

void write_snapshot(std::ostream& os, const NetworkSnapshot& snapshot)
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "snapshot " << snapshot.tick << ' ' << snapshot.dim << '\n';
    for (int i = 0; i < snapshot.node_count(); ++i) {
        os << "node " << i;
        write_coords(os, snapshot.nodes[i]);
        os << '\n';
    }
    for (int k = 0; k < snapshot.anchor_count(); ++k) {
        os << "anchor " << k;
        write_coords(os, snapshot.anchors[k]);
        os << '\n';
    }
    for (const auto& e : snapshot.edges) {
        os << "edge " << e.i << ' ' << e.j << ' ' << (e.bearing ? 1 : 0) << '\n';
    }
    for (const auto& l : snapshot.links) {
        os << "link " << l.node << ' ' << l.anchor << ' ' << (l.bearing ? 1 : 0) << '\n';
    }
    os << "end\n";
    os.precision(old_precision);
}

NetworkSnapshot read_snapshot(std::istream& is)
{
    std::string text;
    int tick = 0;
    int dim = 0;
    bool header = false;
    std::vector<std::pair<int, Vec>> nodes;
    std::vector<std::pair<int, Vec>> anchors;
    std::vector<NodeEdge> edges;
    std::vector<AnchorLink> links;
    while (std::getline(is, text)) {
        if (text.empty() || text[0] == '#') {
            continue;
        }
        std::istringstream line(text);
        std::string kind;
        line >> kind;
        if (kind == "snapshot") {
            line >> tick >> dim;
            header = true;
        } else if (!header) {
            throw ConfigError("snapshot stream must start with a 'snapshot' record");
        } else if (kind == "node" || kind == "anchor") {
            int id = 0;
            line >> id;
            (kind == "node" ? nodes : anchors).emplace_back(id, read_coords(line, dim));
        } else if (kind == "edge") {
            NodeEdge e;
            int b = 0;
            line >> e.i >> e.j >> b;
            e.bearing = b != 0;
            edges.push_back(e);
        } else if (kind == "link") {
            AnchorLink l;
            int b = 0;
            line >> l.node >> l.anchor >> b;
            l.bearing = b != 0;
            links.push_back(l);
        } else if (kind == "end") {
            break;
        } else {
            throw ConfigError("unknown snapshot record '" + kind + "'");
        }
        if (line.fail()) {
            throw ConfigError("malformed snapshot record: " + text);
        }
    }
    if (!header) {
        throw ConfigError("empty snapshot stream");
    }
    auto unpack = [](std::vector<std::pair<int, Vec>>& items, const char* what) {
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Vec> out;
        for (std::size_t n = 0; n < items.size(); ++n) {
            if (items[n].first != static_cast<int>(n)) {
                throw ConfigError(std::string(what) + " ids must be contiguous from 0");
            }
            out.push_back(items[n].second);
        }
        return out;
    };
    auto snap = make_snapshot(unpack(nodes, "node"), unpack(anchors, "anchor"), std::move(edges), std::move(links), tick);
    snap.dim = dim;
    snap.validate();
    return snap;
}

} // namespace hcl
