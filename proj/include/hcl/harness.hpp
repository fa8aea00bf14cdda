#pragma once

#include "hcl/config.hpp"
#include "hcl/metrics.hpp"
#include "hcl/params.hpp"
#include "hcl/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hcl {

/// Worker count from HCL_WORKERS, else the hardware concurrency.
int worker_count_from_env();

/// Runs fn(0..n-1) on `workers` threads. Every index runs even if some
/// throw; the exception of the lowest failing index is rethrown.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

struct RunOptions {
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    int workers = 1;
};

/// Applies the trial and seed overrides.
ExperimentConfig with_overrides(ExperimentConfig config, const RunOptions& options);

std::vector<std::uint64_t> trial_seeds(std::uint64_t base, int trials);
std::vector<std::uint64_t> tuning_seeds(std::uint64_t base, int trials);

/// Ordered key/value pairs; written as "key,value".
using Summary = std::vector<std::pair<std::string, double>>;

struct StaticResult {
    std::vector<double> mpe; // per anchor configuration
    double mean = 0;
    double stddev = 0;
    double relative_spread = 0; // stddev / mean
};

StaticResult run_static(const ExperimentConfig& config, int workers);

struct MethodTrace {
    std::string method; // convex | ekf
    std::vector<double> mne;                 // per tick
    std::vector<std::vector<double>> trials; // [trial][tick] node-averaged error
    double cov = 0;          // over ticks >= metric_start
    double curved_mean = 0;  // over curved ticks >= metric_start
    double straight_mean = 0;
    long long iterations = 0;
    std::size_t messages = 0;
    std::vector<OutlierStats> outliers; // per trial, when contamination is on
};

struct DynamicResult {
    std::vector<bool> curved;
    std::vector<MethodTrace> methods;
    std::optional<double> ekf_process_noise;
    std::vector<double> ekf_grid_error; // tuning error per grid point
    int last_corrupted = -1;            // max over trials
    double peak_wins = 0;               // fraction of trials, convex vs ekf
    double recovery_wins = 0;
    double joint_wins = 0;

    const MethodTrace* find(const std::string& method) const;
};

DynamicResult run_dynamic(const ExperimentConfig& config, int workers);

struct ParamsResult {
    std::vector<double> known_mne;
    std::vector<double> estimated_mne;
    std::vector<double> sigma_median; // per tick, over trials and range channels
    std::vector<double> kappa_median;
    std::optional<int> settled_tick;  // first tick after which sigma_median stays in the band
    double band_low = 0.4;
    double band_high = 0.6;
    double final_ratio = 0; // estimated / known MNE at the last tick
    std::vector<TraceRow> trace; // trial 0
};

ParamsResult run_params(const ExperimentConfig& config, int workers);

/// Outputs of one run: files written under `dir`, all plain delimited text.
void write_static(const std::filesystem::path& dir, const ExperimentConfig& config, const StaticResult& result);
void write_dynamic(const std::filesystem::path& dir, const ExperimentConfig& config, const DynamicResult& result);
void write_params(const std::filesystem::path& dir, const ExperimentConfig& config, const ParamsResult& result);
void write_verify_outputs(const std::filesystem::path& dir, std::uint64_t seed, const std::vector<VerifyRow>& rows);

void write_summary(std::ostream& os, const Summary& summary);
Summary read_summary(std::istream& is);

/// 64-bit FNV-1a, printed in hex in manifests.
std::uint64_t fnv1a(const std::string& text);

extern const char* const version;

} // namespace hcl
