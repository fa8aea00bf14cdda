#pragma once

#include "hcl/measurement.hpp"
#include "hcl/problem.hpp"
#include "hcl/solver.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace hcl {

struct RandomInstanceSpec {
    int min_nodes = 2;
    int max_nodes = 8;
    int window = 1;
    int dim = 2;
};

/// A random connected network over a window with per-channel noise
/// overrides, a random subset of bearings and noisy synthetic data.
struct Instance {
    MeasurementWindow window;
    NoiseParams params;
};

Instance random_instance(Rng& rng, const RandomInstanceSpec& spec);

struct DistributedCheck {
    double max_iterate_deviation = 0; // relative, over every iteration
    double final_deviation = 0;       // relative, final z
    int iterations = 0;
    int centralized_iterations = 0;
    std::size_t messages = 0;
    std::size_t expected_messages = 0; // iterations * sum of degrees
    bool order_independent = false;    // bitwise, reversed update order
};

/// Runs the per-node protocol and the centralized solver from the same
/// start and compares the iterate sequences.
DistributedCheck check_distributed(const Instance& instance, const SolverConfig& config);

/// ||grad_fd - (Mz - b)|| / ||Mz - b|| at a random point, with central
/// differences of the term-by-term relaxed cost.
double check_gradient(const Instance& instance, Rng& rng);

struct LipschitzCheck {
    double largest_eigenvalue = 0; // of the dense Kronecker-built M
    double bound = 0;
    double operator_mismatch = 0;  // max |dense M z - apply(z)| on a random z
};

LipschitzCheck check_lipschitz(const Instance& instance, Rng& rng);

struct EnvelopeCheck {
    double worst_ratio = 0; // max_k (f(z^k) - f(z_ref)) / (2 L ||z0 - z_ref||^2 / (k+1)^2)
    int iterations = 0;
    int reference_iterations = 0;
};

/// FISTA objective gap against the O(1/k^2) envelope, with z_ref from a
/// long reference run.
EnvelopeCheck check_envelope(const Instance& instance, const SolverConfig& config, int reference_iterations);

struct VerifyRow {
    std::string suite;
    int instance = 0;
    double value = 0;
    double threshold = 0;
    bool pass = false;
};

struct VerifyOptions {
    int distributed_instances = 50;
    int gradient_instances = 20;
    int lipschitz_instances = 20;
    int envelope_instances = 3;
    int reference_iterations = 1000000;
};

/// Every oracle suite; rows are in a fixed order.
std::vector<VerifyRow> run_verify(std::uint64_t seed, const VerifyOptions& options);

void write_verify(std::ostream& os, const std::vector<VerifyRow>& rows);

} // namespace hcl
