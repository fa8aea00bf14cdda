#pragma once

#include "hcl/graph.hpp"

#include <span>
#include <vector>

namespace hcl {

/// Estimates indexed [trial][tick][node].
using TrialTracks = std::vector<std::vector<std::vector<Vec>>>;

/// MNE(t) = 1/(M N) sum_m sum_i ||x_hat^m_i(t) - x_i(t)||; truth is
/// [tick][node]. Throws ShapeMismatch when shapes disagree.
std::vector<double> mne(const TrialTracks& estimates, const std::vector<std::vector<Vec>>& truth);

/// MPE = 1/(M N) sum_m sum_i ||x_hat^m_i - x_i||; estimates [trial][node].
double mpe(const std::vector<std::vector<Vec>>& estimates, const std::vector<Vec>& truth);

/// Mean over nodes of the position error at every tick of one trial.
std::vector<double> trial_error(const std::vector<std::vector<Vec>>& estimates,
                                const std::vector<std::vector<Vec>>& truth);

double mean(std::span<const double> values);
/// Population standard deviation.
double stddev(std::span<const double> values);
/// stddev / mean.
double coefficient_of_variation(std::span<const double> values);

struct OutlierStats {
    double baseline = 0; // mean error on [baseline_start, contamination_start)
    double peak = 0;     // max error from contamination_start on
    int recovery = 0;    // ticks after the last corrupted tick until error <= 2 baseline
};

/// `last_corrupted` is the last tick with an injected outlier. When the
/// error never returns to the band the recovery runs to the end of the
/// trace.
OutlierStats outlier_stats(std::span<const double> error, int baseline_start, int contamination_start,
                           int last_corrupted);

} // namespace hcl
