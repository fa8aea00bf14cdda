#pragma once

#include "hcl/problem.hpp"
#include "hcl/solver.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace hcl {

/// Range (and bearing) edge as seen from one endpoint.
struct LocalEdge {
    int edge = 0;     // global edge index, used only to gather results
    int neighbor = 0;
    double sign = 1;  // incidence entry C(e, node): +1 for the lower id
    double weight = 0;
    std::vector<Vec> pull;      // per tau
    std::vector<double> radius; // per tau
};

struct LocalLink {
    int link = 0;
    int anchor = 0;
    double weight = 0;
    std::vector<Vec> pull;
    std::vector<double> radius;
    std::vector<Vec> anchor_position; // per tau, broadcast by the anchor
};

/// Everything one node is allowed to know: its own measurements, the ids of
/// its one-hop neighbours, and the shared scalar L.
struct LocalProblem {
    int node = 0;
    int dim = 2;
    int window = 1;
    double lipschitz = 1;
    std::vector<LocalEdge> edges;
    std::vector<LocalLink> links;
    double velocity_weight = 0;
    std::vector<Vec> velocity_pull;      // step k = 1 .. window-1 at index k-1
    std::vector<double> velocity_radius; // same indexing
};

/// A node's slice of z. y and w are [local edge][tau], s is [step - 1].
struct NodeBlock {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    Eigen::VectorXd s;
};

struct NodeState {
    LocalProblem local;
    NodeBlock current;
    NodeBlock previous;
};

/// Extrapolated window positions broadcast by `sender` in `round`.
struct RoundMessage {
    int sender = 0;
    int round = 0;
    Eigen::VectorXd positions;
};

/// Records which sender's broadcast each node read.
struct AccessLog {
    std::vector<std::pair<int, int>> reads; // (reader, sender)
};

/// The messages delivered to one node in one round.
class NeighborView {
public:
    NeighborView(int receiver, int round, std::span<const RoundMessage> delivered, AccessLog* audit = nullptr);

    /// Throws ProtocolError when no round message from `sender` arrived.
    const Eigen::VectorXd& positions(int sender) const;

private:
    int receiver_;
    int round_;
    std::span<const RoundMessage> delivered_;
    AccessLog* audit_;
};

/// z_i + beta_k (z_i - z_i^prev) on the node's own block.
NodeBlock local_extrapolate(const NodeState& state, int k, MomentumRule rule);

/// x_i^{k+1}(tau) = (F1 + F2 + F3 + F4) / L
Vec update_position(const LocalProblem& local, const NodeBlock& hat, const NeighborView& inbox, int tau);

struct EdgeVarUpdate {
    std::vector<Vec> y;   // per local edge
    std::vector<Vec> w;   // per local link
    std::optional<Vec> s; // only for tau >= 1
};

/// Projected y, w, s updates at instant tau.
EdgeVarUpdate update_edge_vars(const LocalProblem& local, const NodeBlock& hat, const NeighborView& inbox, int tau);

/// Splits an assembled problem into per-node states initialised at `z0`
/// (projected onto the constraint set first).
std::vector<NodeState> make_node_states(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                                        const Eigen::VectorXd& z0);

/// Reassembles z from node blocks. Each y_ij is kept by both endpoints;
/// throws ProtocolError if the two copies differ.
Eigen::VectorXd gather(std::span<const NodeState> states, const VariableLayout& layout);

struct MessageRecord {
    int round = 0;
    int sender = 0;
    int receiver = 0;
    int payload = 0; // reals
};

struct DistributedOptions {
    bool keep_log = false;
    /// Order in which nodes compute within a round; empty means 0..n-1.
    std::vector<int> update_order;
    AccessLog* audit = nullptr;
    IterateObserver observer;
};

struct DistributedResult {
    Eigen::VectorXd z;
    int iterations = 0;
    bool converged = false;
    std::size_t messages = 0;
    std::vector<MessageRecord> log;
};

/// Synchronous rounds of extrapolate -> broadcast -> local update until the
/// global stopping rule (aggregated from per-node step norms) holds.
DistributedResult run_window(const QuadraticForm& form, const ConstraintSet& constraints, double lipschitz,
                             const Eigen::VectorXd& z0, const SolverConfig& config,
                             const DistributedOptions& options = {});

/// "round,sender,receiver,payload" header plus one row per message.
void write_message_log(std::ostream& os, std::span<const MessageRecord> log);

} // namespace hcl
