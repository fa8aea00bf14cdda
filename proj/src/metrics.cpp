#include "hcl/metrics.hpp"

#include "hcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hcl {

std::vector<double> trial_error(const std::vector<std::vector<Vec>>& estimates,
                                const std::vector<std::vector<Vec>>& truth)
{
    if (estimates.size() != truth.size()) {
        throw ShapeMismatch("estimate and truth tick counts differ");
    }
    std::vector<double> out(truth.size(), 0.0);
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (estimates[t].size() != truth[t].size() || truth[t].empty()) {
            throw ShapeMismatch("estimate and truth node counts differ");
        }
        double sum = 0;
        for (std::size_t i = 0; i < truth[t].size(); ++i) {
            if (estimates[t][i].size() != truth[t][i].size()) {
                throw ShapeMismatch("estimate and truth dimensions differ");
            }
            sum += (estimates[t][i] - truth[t][i]).norm();
        }
        out[t] = sum / static_cast<double>(truth[t].size());
    }
    return out;
}

std::vector<double> mne(const TrialTracks& estimates, const std::vector<std::vector<Vec>>& truth)
{
    if (estimates.empty()) {
        throw ShapeMismatch("no trials");
    }
    std::vector<double> out(truth.size(), 0.0);
    for (const auto& trial : estimates) {
        const auto e = trial_error(trial, truth);
        for (std::size_t t = 0; t < e.size(); ++t) {
            out[t] += e[t];
        }
    }
    for (double& v : out) {
        v /= static_cast<double>(estimates.size());
    }
    return out;
}

double mpe(const std::vector<std::vector<Vec>>& estimates, const std::vector<Vec>& truth)
{
    if (estimates.empty()) {
        throw ShapeMismatch("no trials");
    }
    double sum = 0;
    for (const auto& trial : estimates) {
        sum += trial_error({trial}, {truth}).front();
    }
    return sum / static_cast<double>(estimates.size());
}

double mean(std::span<const double> values)
{
    if (values.empty()) {
        throw ShapeMismatch("mean of an empty series");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values)
{
    const double m = mean(values);
    double sq = 0;
    for (double v : values) {
        sq += (v - m) * (v - m);
    }
    return std::sqrt(sq / static_cast<double>(values.size()));
}

double coefficient_of_variation(std::span<const double> values)
{
    return stddev(values) / mean(values);
}

OutlierStats outlier_stats(std::span<const double> error, int baseline_start, int contamination_start,
                           int last_corrupted)
{
    const int n = static_cast<int>(error.size());
    if (baseline_start < 0 || baseline_start >= contamination_start || contamination_start >= n ||
        last_corrupted >= n) {
        throw ConfigError("outlier metric windows do not fit the trace");
    }
    OutlierStats s;
    s.baseline = mean(error.subspan(baseline_start, contamination_start - baseline_start));
    s.peak = *std::max_element(error.begin() + contamination_start, error.end());
    int k = std::max(last_corrupted, contamination_start);
    while (k < n && error[k] > 2.0 * s.baseline) {
        ++k;
    }
    s.recovery = k - std::max(last_corrupted, contamination_start);
    return s;
}

} // namespace hcl
