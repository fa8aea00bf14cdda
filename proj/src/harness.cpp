#include "hcl/harness.hpp"

#include "hcl/ekf.hpp"
#include "hcl/errors.hpp"
#include "hcl/seeds.hpp"
#include "hcl/table.hpp"
#include "hcl/tracking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace hcl {

const char* const version = "0.1.0";

int worker_count_from_env()
{
    if (const char* env = std::getenv("HCL_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1 || n > 1024) {
            throw ConfigError(std::string("HCL_WORKERS must be a positive integer, got '") + env + "'");
        }
        return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn)
{
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(workers, 1, std::max(n, 1));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

ExperimentConfig with_overrides(ExperimentConfig config, const RunOptions& options)
{
    if (options.trials) {
        if (*options.trials < 1) {
            throw ConfigError("trial count must be at least 1");
        }
        config.trials = *options.trials;
    }
    if (options.seed) {
        config.seed = *options.seed;
    }
    return config;
}

std::vector<std::uint64_t> trial_seeds(std::uint64_t base, int trials)
{
    std::vector<std::uint64_t> out;
    for (int m = 0; m < trials; ++m) {
        out.push_back(derive_seed(base, streams::trial, static_cast<std::uint64_t>(m)));
    }
    return out;
}

std::vector<std::uint64_t> tuning_seeds(std::uint64_t base, int trials)
{
    std::vector<std::uint64_t> out;
    for (int m = 0; m < trials; ++m) {
        out.push_back(derive_seed(base, streams::tuning, static_cast<std::uint64_t>(m)));
    }
    return out;
}

namespace {

void assert_disjoint(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b)
{
    const std::set<std::uint64_t> s(a.begin(), a.end());
    for (const auto v : b) {
        if (s.count(v)) {
            throw ConfigError("tuning seeds overlap evaluation seeds");
        }
    }
}

std::vector<double> tail(const std::vector<double>& v, int from)
{
    if (from >= static_cast<int>(v.size())) {
        throw ConfigError("metric_start lies beyond the trajectory");
    }
    return {v.begin() + std::max(from, 0), v.end()};
}

double masked_mean(const std::vector<double>& v, const std::vector<bool>& mask, bool want, int from)
{
    double sum = 0;
    int n = 0;
    for (int t = std::max(from, 0); t < static_cast<int>(v.size()); ++t) {
        if (mask[t] == want) {
            sum += v[t];
            ++n;
        }
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> average(const std::vector<std::vector<double>>& rows)
{
    std::vector<double> out(rows.front().size(), 0.0);
    for (const auto& r : rows) {
        for (std::size_t t = 0; t < out.size(); ++t) {
            out[t] += r[t];
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(rows.size());
    }
    return out;
}

double median(std::vector<double> v)
{
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) {
        return *mid;
    }
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

std::vector<std::vector<Vec>> truth_of(const Scenario& sc)
{
    return sc.nodes;
}

std::unique_ptr<OutlierPolicy> outlier_policy(const OutlierSpec& spec, const Scenario& sc)
{
    if (!spec.enabled) {
        return nullptr;
    }
    if (spec.start < 0 || spec.end <= spec.start || spec.end > sc.ticks()) {
        throw ConfigError("outlier window does not fit the scenario");
    }
    auto p = std::make_unique<OutlierPolicy>();
    const int start = spec.start;
    const int end = spec.end;
    p->active = [start, end](int t) { return t >= start && t < end; };
    const auto snap = sc.snapshot_at(start);
    if (spec.target == "link") {
        if (!snap.find_link(spec.node, spec.anchor)) {
            throw ConfigError("outlier link is not measured");
        }
        p->selection.links.push_back({spec.node, spec.anchor});
    } else {
        if (spec.node < 0 || spec.node >= snap.node_count()) {
            throw ConfigError("outlier node does not exist");
        }
        p->selection = OutlierSelection::all_of_node(snap, spec.node);
    }
    p->factor = spec.factor;
    p->probability = spec.probability;
    return p;
}

struct DynamicTrial {
    std::vector<double> convex;
    std::vector<double> ekf;
    long long iterations = 0;
    std::size_t messages = 0;
    int last_corrupted = -1;
};

std::vector<Vec> perturbed_start(const std::vector<Vec>& truth, double std_dev, Rng& rng)
{
    std::normal_distribution<double> g(0.0, std_dev);
    std::vector<Vec> out = truth;
    for (auto& v : out) {
        for (Eigen::Index d = 0; d < v.size(); ++d) {
            v[d] += g(rng);
        }
    }
    return out;
}

std::vector<double> ekf_error(const std::vector<StreamTick>& stream, const Scenario& sc, const NoiseParams& params,
                              double q, double init_std, Rng& rng)
{
    const auto init = perturbed_start(sc.nodes.front(), init_std, rng);
    const auto est = ekf_run(stream, init, params, EkfTuning{q, init_std});
    return trial_error(est, truth_of(sc));
}

} // namespace

const MethodTrace* DynamicResult::find(const std::string& method) const
{
    for (const auto& m : methods) {
        if (m.method == method) {
            return &m;
        }
    }
    return nullptr;
}

StaticResult run_static(const ExperimentConfig& config, int workers)
{
    if (config.kind != ExperimentKind::Static) {
        throw ConfigError("config '" + config.name + "' is not a static experiment");
    }
    const int configs = config.statics.configurations;
    if (configs < 1) {
        throw ConfigError("static sweep needs at least one configuration");
    }
    const NoiseParams params = config.noise.params();
    TrackerConfig tracker = config.tracker;
    tracker.window = 1;
    StaticResult result;
    const auto seeds = trial_seeds(config.seed, config.trials);
    for (int c = 0; c < configs; ++c) {
        Rng layout_rng(derive_seed(config.seed, streams::configuration, static_cast<std::uint64_t>(c)));
        const auto net = random_static_network(config.statics.network, layout_rng);
        const auto snap = net.snapshot();
        std::vector<std::vector<Vec>> estimates(static_cast<std::size_t>(config.trials));
        parallel_for(config.trials, workers, [&](int m) {
            Rng rng(derive_seed(seeds[m], streams::configuration, static_cast<std::uint64_t>(c)));
            std::vector<StreamTick> stream(1);
            stream[0].snapshot = snap;
            stream[0].data = synthesize_dataset(snap, {}, params, 1.0, rng);
            estimates[m] = run_known_params(stream, params, tracker).estimates.front();
        });
        result.mpe.push_back(mpe(estimates, net.nodes));
    }
    result.mean = mean(result.mpe);
    result.stddev = stddev(result.mpe);
    result.relative_spread = result.stddev / result.mean;
    return result;
}

DynamicResult run_dynamic(const ExperimentConfig& config, int workers)
{
    if (config.kind != ExperimentKind::Dynamic) {
        throw ConfigError("config '" + config.name + "' is not a dynamic experiment");
    }
    const Scenario sc = config.scenario.build();
    const NoiseParams params = config.noise.params();
    const auto policy = outlier_policy(config.outliers, sc);
    const bool convex = config.method != Method::Ekf;
    const bool ekf = config.method != Method::Convex;
    const auto seeds = trial_seeds(config.seed, config.trials);

    DynamicResult result;
    result.curved = sc.curved;

    if (ekf) {
        const auto tuning = tuning_seeds(config.seed, config.ekf.tuning_trials);
        assert_disjoint(seeds, tuning);
        const auto& grid = config.ekf.grid;
        std::vector<double> grid_error(grid.size() * tuning.size());
        parallel_for(static_cast<int>(tuning.size()), workers, [&](int j) {
            Rng rng(tuning[j]);
            const auto stream = measurement_stream(sc, params, rng, policy.get());
            const std::uint64_t init_seed = rng();
            for (std::size_t g = 0; g < grid.size(); ++g) {
                Rng init_rng(init_seed);
                grid_error[g * tuning.size() + j] =
                    mean(tail(ekf_error(stream, sc, params, grid[g], config.ekf.init_std, init_rng), config.metric_start));
            }
        });
        for (std::size_t g = 0; g < grid.size(); ++g) {
            result.ekf_grid_error.push_back(mean(std::span<const double>(grid_error).subspan(g * tuning.size(), tuning.size())));
        }
        result.ekf_process_noise = grid_search_tune(grid, [&](double q) {
            const auto at = std::find(grid.begin(), grid.end(), q) - grid.begin();
            return result.ekf_grid_error[static_cast<std::size_t>(at)];
        });
    }

    std::vector<DynamicTrial> trials(static_cast<std::size_t>(config.trials));
    parallel_for(config.trials, workers, [&](int m) {
        Rng rng(seeds[m]);
        const auto stream = measurement_stream(sc, params, rng, policy.get());
        const std::uint64_t init_seed = rng();
        auto& out = trials[m];
        for (int t = 0; t < static_cast<int>(stream.size()); ++t) {
            if (stream[t].corrupted > 0) {
                out.last_corrupted = t;
            }
        }
        if (convex) {
            const auto run = run_known_params(stream, params, config.tracker);
            out.convex = trial_error(run.estimates, truth_of(sc));
            out.iterations = run.iterations;
            out.messages = run.messages;
        }
        if (ekf) {
            Rng init_rng(init_seed);
            out.ekf = ekf_error(stream, sc, params, *result.ekf_process_noise, config.ekf.init_std, init_rng);
        }
    });

    for (const auto& t : trials) {
        result.last_corrupted = std::max(result.last_corrupted, t.last_corrupted);
    }
    auto summarize = [&](const std::string& name, auto pick) {
        MethodTrace mt;
        mt.method = name;
        for (auto& t : trials) {
            mt.trials.push_back(pick(t));
            if (name == "convex") {
                mt.iterations += t.iterations;
                mt.messages += t.messages;
            }
        }
        mt.mne = average(mt.trials);
        mt.cov = coefficient_of_variation(tail(mt.mne, config.metric_start));
        mt.curved_mean = masked_mean(mt.mne, sc.curved, true, config.metric_start);
        mt.straight_mean = masked_mean(mt.mne, sc.curved, false, config.metric_start);
        if (policy) {
            for (std::size_t m = 0; m < trials.size(); ++m) {
                const int last = trials[m].last_corrupted >= 0 ? trials[m].last_corrupted : config.outliers.end - 1;
                mt.outliers.push_back(outlier_stats(mt.trials[m], config.metric_start, config.outliers.start, last));
            }
        }
        result.methods.push_back(std::move(mt));
    };
    if (convex) {
        summarize("convex", [](const DynamicTrial& t) { return t.convex; });
    }
    if (ekf) {
        summarize("ekf", [](const DynamicTrial& t) { return t.ekf; });
    }
    if (policy && convex && ekf) {
        const auto& c = result.methods[0].outliers;
        const auto& e = result.methods[1].outliers;
        int peak = 0;
        int recovery = 0;
        int joint = 0;
        for (std::size_t m = 0; m < c.size(); ++m) {
            const bool p = c[m].peak < e[m].peak;
            const bool r = c[m].recovery < e[m].recovery;
            peak += p;
            recovery += r;
            joint += p && r;
        }
        const double n = static_cast<double>(c.size());
        result.peak_wins = peak / n;
        result.recovery_wins = recovery / n;
        result.joint_wins = joint / n;
    }
    return result;
}

ParamsResult run_params(const ExperimentConfig& config, int workers)
{
    if (config.kind != ExperimentKind::Params) {
        throw ConfigError("config '" + config.name + "' is not a parameter-estimation experiment");
    }
    const Scenario sc = config.scenario.build();
    const NoiseParams params = config.noise.params();
    const auto seeds = trial_seeds(config.seed, config.trials);
    const ParamFreeConfig pf{config.tracker, config.params.defaults.params(), config.params.limits};

    struct Trial {
        std::vector<double> known;
        std::vector<double> estimated;
        std::vector<TraceRow> trace;
    };
    std::vector<Trial> trials(static_cast<std::size_t>(config.trials));
    parallel_for(config.trials, workers, [&](int m) {
        Rng rng(seeds[m]);
        const auto stream = measurement_stream(sc, params, rng);
        auto& out = trials[m];
        if (config.params.compare_known) {
            out.known = trial_error(run_known_params(stream, params, config.tracker).estimates, truth_of(sc));
        }
        auto run = run_parameter_free(stream, pf);
        out.estimated = trial_error(run.track.estimates, truth_of(sc));
        out.trace = std::move(run.trace);
    });

    ParamsResult result;
    std::vector<std::vector<double>> estimated;
    std::vector<std::vector<double>> known;
    for (const auto& t : trials) {
        estimated.push_back(t.estimated);
        if (config.params.compare_known) {
            known.push_back(t.known);
        }
    }
    result.estimated_mne = average(estimated);
    if (!known.empty()) {
        result.known_mne = average(known);
        result.final_ratio = result.estimated_mne.back() / result.known_mne.back();
    }

    const int ticks = sc.ticks();
    std::vector<std::vector<double>> sigma(static_cast<std::size_t>(ticks));
    std::vector<std::vector<double>> kappa(static_cast<std::size_t>(ticks));
    for (const auto& t : trials) {
        for (const auto& row : t.trace) {
            // Rows are labelled with the 1-based estimation tick.
            const int tick = row.tick - 1;
            if ((row.kind == "edge" || row.kind == "link") && tick >= 0 && tick < ticks) {
                sigma[tick].push_back(row.sigma);
                kappa[tick].push_back(row.kappa);
            }
        }
    }
    for (int t = 0; t < ticks; ++t) {
        result.sigma_median.push_back(median(sigma[t]));
        result.kappa_median.push_back(median(kappa[t]));
    }
    const double lo = config.noise.range_sigma * 0.8;
    const double hi = config.noise.range_sigma * 1.2;
    result.band_low = lo;
    result.band_high = hi;
    int settle = ticks;
    while (settle > 0 && result.sigma_median[settle - 1] >= lo && result.sigma_median[settle - 1] <= hi) {
        --settle;
    }
    if (settle < ticks) {
        result.settled_tick = settle;
    }
    result.trace = trials.front().trace;
    return result;
}

void write_summary(std::ostream& os, const Summary& summary)
{
    os << "key,value\n";
    for (const auto& [k, v] : summary) {
        os << k << ',' << format_number(v) << '\n';
    }
}

Summary read_summary(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "key,value") {
        throw ConfigError("summary header missing");
    }
    Summary out;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw ConfigError("malformed summary row: " + line);
        }
        out.emplace_back(line.substr(0, comma), parse_number(line.substr(comma + 1)));
    }
    return out;
}

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::ofstream open_out(const std::filesystem::path& dir, const char* name)
{
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) {
        throw ConfigError("cannot write " + (dir / name).string());
    }
    return os;
}

std::string hex(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const std::vector<std::uint64_t>& tuning, const std::vector<std::string>& files)
{
    auto os = open_out(dir, "manifest.txt");
    os << "name " << config.name << '\n';
    os << "version " << version << '\n';
    os << "eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
    os << "config_fnv1a " << hex(fnv1a(config.canonical)) << '\n';
    os << "config " << config.canonical << '\n';
    os << "base_seed " << config.seed << '\n';
    os << "trials " << config.trials << '\n';
    const auto seeds = trial_seeds(config.seed, config.trials);
    for (std::size_t m = 0; m < seeds.size(); ++m) {
        os << "trial_seed " << m << ' ' << hex(seeds[m]) << '\n';
    }
    for (std::size_t m = 0; m < tuning.size(); ++m) {
        os << "tuning_seed " << m << ' ' << hex(tuning[m]) << '\n';
    }
    for (const auto& f : files) {
        os << "file " << f << '\n';
    }
}

void write_long_traces(const std::filesystem::path& dir, const std::string& scenario,
                       const std::vector<std::pair<std::string, const std::vector<double>*>>& traces)
{
    std::vector<LongRow> rows;
    for (const auto& [method, trace] : traces) {
        for (std::size_t t = 0; t < trace->size(); ++t) {
            rows.push_back({scenario, method, static_cast<int>(t), (*trace)[t]});
        }
    }
    auto os = open_out(dir, "long.csv");
    write_long(os, rows);
}

} // namespace

void write_static(const std::filesystem::path& dir, const ExperimentConfig& config, const StaticResult& result)
{
    Table t{{"configuration", "mpe"}, {}};
    for (std::size_t c = 0; c < result.mpe.size(); ++c) {
        t.rows.push_back({static_cast<double>(c), result.mpe[c]});
    }
    {
        auto os = open_out(dir, "mpe.csv");
        write_table(os, t);
    }
    {
        auto os = open_out(dir, "summary.csv");
        write_summary(os, {{"mpe_mean", result.mean}, {"mpe_stddev", result.stddev},
                           {"mpe_relative_spread", result.relative_spread}});
    }
    write_manifest(dir, config, {}, {"mpe.csv", "summary.csv"});
}

void write_dynamic(const std::filesystem::path& dir, const ExperimentConfig& config, const DynamicResult& result)
{
    Table mne_table;
    mne_table.header = {"tick", "curved"};
    for (const auto& m : result.methods) {
        mne_table.header.push_back(m.method);
    }
    for (std::size_t t = 0; t < result.curved.size(); ++t) {
        std::vector<double> row{static_cast<double>(t), result.curved[t] ? 1.0 : 0.0};
        for (const auto& m : result.methods) {
            row.push_back(m.mne[t]);
        }
        mne_table.rows.push_back(std::move(row));
    }
    {
        auto os = open_out(dir, "mne.csv");
        write_table(os, mne_table);
    }
    std::vector<std::pair<std::string, const std::vector<double>*>> traces;
    for (const auto& m : result.methods) {
        traces.emplace_back(m.method, &m.mne);
    }
    write_long_traces(dir, config.name, traces);

    Summary s;
    for (const auto& m : result.methods) {
        s.emplace_back(m.method + "_cov", m.cov);
        s.emplace_back(m.method + "_curved_mean", m.curved_mean);
        s.emplace_back(m.method + "_straight_mean", m.straight_mean);
        if (m.method == "convex") {
            s.emplace_back("convex_iterations", static_cast<double>(m.iterations));
            s.emplace_back("convex_messages", static_cast<double>(m.messages));
        }
    }
    if (result.ekf_process_noise) {
        s.emplace_back("ekf_process_noise", *result.ekf_process_noise);
        for (std::size_t g = 0; g < result.ekf_grid_error.size(); ++g) {
            s.emplace_back("ekf_grid_error_" + format_number(config.ekf.grid[g]), result.ekf_grid_error[g]);
        }
    }
    std::vector<std::string> files{"mne.csv", "long.csv", "summary.csv"};
    if (config.outliers.enabled) {
        s.emplace_back("last_corrupted", result.last_corrupted);
        s.emplace_back("peak_wins", result.peak_wins);
        s.emplace_back("recovery_wins", result.recovery_wins);
        s.emplace_back("joint_wins", result.joint_wins);
        Table o;
        o.header = {"trial"};
        for (const auto& m : result.methods) {
            for (const char* f : {"_baseline", "_peak", "_recovery"}) {
                o.header.push_back(m.method + f);
            }
        }
        for (std::size_t k = 0; k < static_cast<std::size_t>(config.trials); ++k) {
            std::vector<double> row{static_cast<double>(k)};
            for (const auto& m : result.methods) {
                row.push_back(m.outliers[k].baseline);
                row.push_back(m.outliers[k].peak);
                row.push_back(m.outliers[k].recovery);
            }
            o.rows.push_back(std::move(row));
        }
        auto os = open_out(dir, "outliers.csv");
        write_table(os, o);
        files.push_back("outliers.csv");
    }
    {
        auto os = open_out(dir, "summary.csv");
        write_summary(os, s);
    }
    write_manifest(dir, config,
                   result.ekf_process_noise ? tuning_seeds(config.seed, config.ekf.tuning_trials)
                                            : std::vector<std::uint64_t>{},
                   files);
}

void write_params(const std::filesystem::path& dir, const ExperimentConfig& config, const ParamsResult& result)
{
    Table t;
    t.header = {"tick", "estimated", "sigma_median", "kappa_median"};
    if (!result.known_mne.empty()) {
        t.header.insert(t.header.begin() + 1, "known");
    }
    for (std::size_t k = 0; k < result.estimated_mne.size(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        if (!result.known_mne.empty()) {
            row.push_back(result.known_mne[k]);
        }
        row.push_back(result.estimated_mne[k]);
        row.push_back(result.sigma_median[k]);
        row.push_back(result.kappa_median[k]);
        t.rows.push_back(std::move(row));
    }
    {
        auto os = open_out(dir, "mne.csv");
        write_table(os, t);
    }
    std::vector<std::pair<std::string, const std::vector<double>*>> traces{{"estimated", &result.estimated_mne},
                                                                           {"sigma_median", &result.sigma_median}};
    if (!result.known_mne.empty()) {
        traces.insert(traces.begin(), {"known", &result.known_mne});
    }
    write_long_traces(dir, config.name, traces);
    {
        auto os = open_out(dir, "param_trace.csv");
        write_param_trace(os, result.trace);
    }
    Summary s{{"final_estimated_mne", result.estimated_mne.back()},
              {"sigma_band_low", result.band_low},
              {"sigma_band_high", result.band_high},
              {"sigma_settled_tick", result.settled_tick ? *result.settled_tick : -1.0},
              {"final_sigma_median", result.sigma_median.back()},
              {"final_kappa_median", result.kappa_median.back()}};
    if (!result.known_mne.empty()) {
        s.emplace_back("final_known_mne", result.known_mne.back());
        s.emplace_back("final_ratio", result.final_ratio);
    }
    {
        auto os = open_out(dir, "summary.csv");
        write_summary(os, s);
    }
    write_manifest(dir, config, {}, {"mne.csv", "long.csv", "param_trace.csv", "summary.csv"});
}

void write_verify_outputs(const std::filesystem::path& dir, std::uint64_t seed, const std::vector<VerifyRow>& rows)
{
    {
        auto os = open_out(dir, "verify.csv");
        write_verify(os, rows);
    }
    auto os = open_out(dir, "manifest.txt");
    os << "name verify\n";
    os << "version " << version << '\n';
    os << "base_seed " << seed << '\n';
    os << "file verify.csv\n";
}

} // namespace hcl
