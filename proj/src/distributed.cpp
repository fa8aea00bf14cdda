#include "hcl/distributed.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace hcl {

NeighborView::NeighborView(int receiver, int round, std::span<const RoundMessage> delivered, AccessLog* audit)
    : receiver_(receiver), round_(round), delivered_(delivered), audit_(audit)
{
}

const Eigen::VectorXd& NeighborView::positions(int sender) const
{
    for (const auto& m : delivered_) {
        if (m.sender == sender && m.round == round_) {
            if (audit_ != nullptr) {
                audit_->reads.emplace_back(receiver_, sender);
            }
            return m.positions;
        }
    }
    throw ProtocolError("node " + std::to_string(receiver_) + " has no message from node " + std::to_string(sender) +
                        " in round " + std::to_string(round_));
}

NodeBlock local_extrapolate(const NodeState& state, int k, MomentumRule rule)
{
    const double beta = momentum_coefficient(rule, k);
    const auto& c = state.current;
    const auto& p = state.previous;
    return NodeBlock{c.x + beta * (c.x - p.x), c.y + beta * (c.y - p.y), c.w + beta * (c.w - p.w),
                     c.s + beta * (c.s - p.s)};
}

namespace {

Eigen::Index edge_slot(const LocalProblem& local, std::size_t e, int tau)
{
    return (static_cast<Eigen::Index>(e) * local.window + tau) * local.dim;
}

} // namespace

namespace {

/// Lower-id endpoint minus higher-id endpoint, so both ends of an edge
/// form the same residual bit for bit.
Vec oriented_difference(const LocalEdge& edge, const Vec& own, const Vec& other)
{
    return edge.sign > 0 ? Vec(own - other) : Vec(other - own);
}

Vec step_residual(const LocalProblem& local, const NodeBlock& hat, int k)
{
    const int p = local.dim;
    return local.velocity_weight * (hat.x.segment(Eigen::Index{k} * p, p) - hat.x.segment(Eigen::Index{k - 1} * p, p) -
                                    hat.s.segment(Eigen::Index{k - 1} * p, p));
}

} // namespace

// Written as x_hat - (M z_hat - b)_i / L, which equals (F1 + F2 + F3 + F4) / L
// with F1 = (L - sum w) x_hat_i, F2 = sum w (x_hat_j + C_ei y_hat),
// F3 = sum w (w_hat + a) and F4 the velocity residuals. Terms are added in
// the order the centralized operator uses so the two agree to the last bit.
Vec update_position(const LocalProblem& local, const NodeBlock& hat, const NeighborView& inbox, int tau)
{
    const int p = local.dim;
    const double step = 1.0 / local.lipschitz;
    const Vec own = hat.x.segment(Eigen::Index{tau} * p, p);

    Vec grad = Vec::Zero(p);
    for (std::size_t e = 0; e < local.edges.size(); ++e) {
        const auto& edge = local.edges[e];
        const Vec other = inbox.positions(edge.neighbor).segment(Eigen::Index{tau} * p, p);
        const Vec r = edge.weight * (oriented_difference(edge, own, other) - hat.y.segment(edge_slot(local, e, tau), p));
        if (edge.sign > 0) {
            grad += r;
        } else {
            grad -= r;
        }
    }
    Vec b = Vec::Zero(p);
    for (std::size_t l = 0; l < local.links.size(); ++l) {
        const auto& link = local.links[l];
        grad += link.weight * (own - hat.w.segment(edge_slot(local, l, tau), p));
        b += link.weight * link.anchor_position[tau];
    }
    // step tau ends at this instant, step tau + 1 starts here
    if (tau >= 1) {
        grad += step_residual(local, hat, tau);
    }
    if (tau + 1 <= local.window - 1) {
        grad -= step_residual(local, hat, tau + 1);
    }
    return own - step * (grad - b);
}

EdgeVarUpdate update_edge_vars(const LocalProblem& local, const NodeBlock& hat, const NeighborView& inbox, int tau)
{
    const int p = local.dim;
    const double step = 1.0 / local.lipschitz;
    const Vec own = hat.x.segment(Eigen::Index{tau} * p, p);
    EdgeVarUpdate out;
    for (std::size_t e = 0; e < local.edges.size(); ++e) {
        const auto& edge = local.edges[e];
        const Vec other = inbox.positions(edge.neighbor).segment(Eigen::Index{tau} * p, p);
        const Vec y_hat = hat.y.segment(edge_slot(local, e, tau), p);
        const Vec r = edge.weight * (oriented_difference(edge, own, other) - y_hat);
        Vec y = y_hat - step * (-r - edge.pull[tau]);
        project_ball(y, edge.radius[tau]);
        out.y.push_back(std::move(y));
    }
    for (std::size_t l = 0; l < local.links.size(); ++l) {
        const auto& link = local.links[l];
        const Vec w_hat = hat.w.segment(edge_slot(local, l, tau), p);
        const Vec r = link.weight * (own - w_hat);
        const Vec b = link.pull[tau] - link.weight * link.anchor_position[tau];
        Vec w = w_hat - step * (-r - b);
        project_ball(w, link.radius[tau]);
        out.w.push_back(std::move(w));
    }
    if (local.window > 1 && tau >= 1) {
        const Vec r = step_residual(local, hat, tau);
        Vec s = hat.s.segment(Eigen::Index{tau - 1} * p, p) - step * (-r - local.velocity_pull[tau - 1]);
        project_ball(s, local.velocity_radius[tau - 1]);
        out.s = std::move(s);
    }
    return out;
}

std::vector<NodeState> make_node_states(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                                        const Eigen::VectorXd& z0)
{
    const auto& L = form.layout;
    const int p = L.dim;
    const int T = L.window;
    Eigen::VectorXd start = z0;
    project(start, constraints);

    std::vector<NodeState> states(L.nodes);
    for (int i = 0; i < L.nodes; ++i) {
        LocalProblem& local = states[i].local;
        local.node = i;
        local.dim = p;
        local.window = T;
        local.lipschitz = lipschitz;
        local.velocity_weight = T > 1 ? form.velocity_weights[i] : 0.0;
    }
    for (int e = 0; e < L.edges; ++e) {
        const auto& term = form.edge_terms[e];
        for (int side = 0; side < 2; ++side) {
            const int node = side == 0 ? term.i : term.j;
            LocalEdge edge;
            edge.edge = e;
            edge.neighbor = side == 0 ? term.j : term.i;
            edge.sign = side == 0 ? 1.0 : -1.0;
            edge.weight = term.weight;
            for (int tau = 0; tau < T; ++tau) {
                edge.pull.push_back(form.edge_pull[static_cast<std::size_t>(tau) * L.edges + e]);
                edge.radius.push_back(constraints.y_radius[static_cast<std::size_t>(tau) * L.edges + e]);
            }
            states[node].local.edges.push_back(std::move(edge));
        }
    }
    for (int l = 0; l < L.links; ++l) {
        const auto& term = form.link_terms[l];
        LocalLink link;
        link.link = l;
        link.anchor = term.anchor;
        link.weight = term.weight;
        for (int tau = 0; tau < T; ++tau) {
            const std::size_t idx = static_cast<std::size_t>(tau) * L.links + l;
            link.pull.push_back(form.link_pull[idx]);
            link.radius.push_back(constraints.w_radius[idx]);
            link.anchor_position.push_back(form.anchor_offset[idx]);
        }
        states[term.node].local.links.push_back(std::move(link));
    }
    for (int k = 1; k < T; ++k) {
        for (int i = 0; i < L.nodes; ++i) {
            const std::size_t idx = static_cast<std::size_t>(k - 1) * L.nodes + i;
            states[i].local.velocity_pull.push_back(form.velocity_pull[idx]);
            states[i].local.velocity_radius.push_back(constraints.s_radius[idx]);
        }
    }

    for (int i = 0; i < L.nodes; ++i) {
        auto& st = states[i];
        const auto& local = st.local;
        NodeBlock block;
        block.x.resize(Eigen::Index{T} * p);
        block.y.resize(static_cast<Eigen::Index>(local.edges.size()) * T * p);
        block.w.resize(static_cast<Eigen::Index>(local.links.size()) * T * p);
        block.s.resize(Eigen::Index{T - 1} * p);
        for (int tau = 0; tau < T; ++tau) {
            block.x.segment(Eigen::Index{tau} * p, p) = start.segment(L.x(tau, i), p);
            for (std::size_t e = 0; e < local.edges.size(); ++e) {
                block.y.segment(edge_slot(local, e, tau), p) = start.segment(L.y(tau, local.edges[e].edge), p);
            }
            for (std::size_t l = 0; l < local.links.size(); ++l) {
                block.w.segment(edge_slot(local, l, tau), p) = start.segment(L.w(tau, local.links[l].link), p);
            }
        }
        for (int k = 1; k < T; ++k) {
            block.s.segment(Eigen::Index{k - 1} * p, p) = start.segment(L.s(k, i), p);
        }
        st.current = block;
        st.previous = std::move(block);
    }
    return states;
}

Eigen::VectorXd gather(std::span<const NodeState> states, const VariableLayout& L)
{
    const int p = L.dim;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(L.size());
    std::vector<bool> have_y(static_cast<std::size_t>(L.edges), false);
    for (const auto& st : states) {
        const auto& local = st.local;
        const auto& b = st.current;
        for (int tau = 0; tau < L.window; ++tau) {
            z.segment(L.x(tau, local.node), p) = b.x.segment(Eigen::Index{tau} * p, p);
            for (std::size_t l = 0; l < local.links.size(); ++l) {
                z.segment(L.w(tau, local.links[l].link), p) = b.w.segment(edge_slot(local, l, tau), p);
            }
        }
        for (std::size_t e = 0; e < local.edges.size(); ++e) {
            const int g = local.edges[e].edge;
            for (int tau = 0; tau < L.window; ++tau) {
                const Eigen::VectorXd copy = b.y.segment(edge_slot(local, e, tau), p);
                if (have_y[g]) {
                    if (!(z.segment(L.y(tau, g), p).array() == copy.array()).all()) {
                        throw ProtocolError("edge variable copies disagree on edge " + std::to_string(g));
                    }
                } else {
                    z.segment(L.y(tau, g), p) = copy;
                }
            }
            have_y[g] = true;
        }
        for (int k = 1; k < L.window; ++k) {
            z.segment(L.s(k, local.node), p) = b.s.segment(Eigen::Index{k - 1} * p, p);
        }
    }
    return z;
}

namespace {

/// Squared step and squared magnitude of a node's block; y copies are
/// counted by the lower-id endpoint only so the sums match the global z.
std::pair<double, double> block_norms(const NodeState& st, const NodeBlock& next)
{
    const auto& local = st.local;
    const int p = local.dim;
    const int T = local.window;
    double step = (next.x - st.current.x).squaredNorm() + (next.w - st.current.w).squaredNorm() +
                  (next.s - st.current.s).squaredNorm();
    double mag = next.x.squaredNorm() + next.w.squaredNorm() + next.s.squaredNorm();
    for (std::size_t e = 0; e < local.edges.size(); ++e) {
        if (local.edges[e].sign > 0) {
            const Eigen::Index off = static_cast<Eigen::Index>(e) * T * p;
            step += (next.y.segment(off, Eigen::Index{T} * p) - st.current.y.segment(off, Eigen::Index{T} * p)).squaredNorm();
            mag += next.y.segment(off, Eigen::Index{T} * p).squaredNorm();
        }
    }
    return {step, mag};
}

} // namespace

DistributedResult run_window(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                             const Eigen::VectorXd& z0, const SolverConfig& config, const DistributedOptions& options)
{
    if (z0.size() != form.layout.size()) {
        throw ShapeMismatch("initial point has the wrong dimension");
    }
    if (!(lipschitz > 0.0)) {
        throw DomainError("Lipschitz constant must be positive");
    }
    auto states = make_node_states(form, constraints, lipschitz, z0);
    const int n = form.layout.nodes;
    const int p = form.layout.dim;
    const int T = form.layout.window;

    std::vector<int> order = options.update_order;
    if (order.empty()) {
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
    }
    if (static_cast<int>(order.size()) != n) {
        throw ConfigError("update order must be a permutation of the nodes");
    }

    DistributedResult result;
    std::vector<NodeBlock> hats(n);
    std::vector<NodeBlock> next(n);
    std::vector<std::vector<RoundMessage>> inboxes(n);

    for (int k = 1; k <= config.max_iterations; ++k) {
        // Extrapolate and broadcast.
        for (int i = 0; i < n; ++i) {
            hats[i] = local_extrapolate(states[i], k, config.momentum);
            inboxes[i].clear();
        }
        for (int i = 0; i < n; ++i) {
            for (const auto& edge : states[i].local.edges) {
                inboxes[edge.neighbor].push_back({i, k, hats[i].x});
                ++result.messages;
                if (options.keep_log) {
                    result.log.push_back({k, i, edge.neighbor, static_cast<int>(hats[i].x.size())});
                }
            }
        }
        // Barrier, then local updates from round-k data only.
        for (int i : order) {
            const auto& local = states[i].local;
            const NeighborView inbox(i, k, inboxes[i], options.audit);
            NodeBlock out{Eigen::VectorXd(hats[i].x.size()), Eigen::VectorXd(hats[i].y.size()),
                          Eigen::VectorXd(hats[i].w.size()), Eigen::VectorXd(hats[i].s.size())};
            for (int tau = 0; tau < T; ++tau) {
                out.x.segment(Eigen::Index{tau} * p, p) = update_position(local, hats[i], inbox, tau);
                EdgeVarUpdate ev = update_edge_vars(local, hats[i], inbox, tau);
                for (std::size_t e = 0; e < ev.y.size(); ++e) {
                    out.y.segment(edge_slot(local, e, tau), p) = ev.y[e];
                }
                for (std::size_t l = 0; l < ev.w.size(); ++l) {
                    out.w.segment(edge_slot(local, l, tau), p) = ev.w[l];
                }
                if (ev.s) {
                    out.s.segment(Eigen::Index{tau - 1} * p, p) = *ev.s;
                }
            }
            if (!out.x.allFinite() || !out.y.allFinite() || !out.w.allFinite() || !out.s.allFinite()) {
                throw Divergence("divergence: non-finite values at node " + std::to_string(i) + " in round " +
                                 std::to_string(k));
            }
            next[i] = std::move(out);
        }
        double step_sq = 0.0;
        double mag_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto [s, m] = block_norms(states[i], next[i]);
            step_sq += s;
            mag_sq += m;
        }
        for (int i = 0; i < n; ++i) {
            states[i].previous = std::move(states[i].current);
            states[i].current = std::move(next[i]);
        }
        result.iterations = k;
        if (options.observer) {
            options.observer(k, gather(states, form.layout));
        }
        if (std::sqrt(step_sq) / std::max(1.0, std::sqrt(mag_sq)) < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.z = gather(states, form.layout);
    return result;
}

void write_message_log(std::ostream& os, std::span<const MessageRecord> log)
{
    os << "round,sender,receiver,payload\n";
    for (const auto& m : log) {
        os << m.round << ',' << m.sender << ',' << m.receiver << ',' << m.payload << '\n';
    }
}

} // namespace hcl
