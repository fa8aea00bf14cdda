// Experiment runner: static | dynamic | params | verify.
#include "hcl/errors.hpp"
#include "hcl/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Flags& f, bool needs_config)
{
    auto* c = sub->add_option("-c,--config", f.config, "experiment config (JSON)");
    if (needs_config) {
        c->required()->check(CLI::ExistingFile);
    }
    sub->add_option("-o,--out", f.out, "output directory")->capture_default_str();
    sub->add_option("-t,--trials", f.trials, "override the Monte Carlo trial count");
    sub->add_option("-s,--seed", f.seed, "override the base seed");
}

void print_summary(const hcl::Summary& s)
{
    for (const auto& [k, v] : s) {
        std::cout << k << ' ' << v << '\n';
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cooperative localization experiments"};
    app.require_subcommand(1);
    Flags flags;
    auto* st = app.add_subcommand("static", "anchor-configuration sweep on static networks");
    auto* dy = app.add_subcommand("dynamic", "trajectory tracking, convex and/or EKF");
    auto* pa = app.add_subcommand("params", "parameter-free tracking with noise estimation");
    auto* ve = app.add_subcommand("verify", "oracle suites: distributed vs centralized, gradient, Lipschitz, envelope");
    add_common(st, flags, true);
    add_common(dy, flags, true);
    add_common(pa, flags, true);
    add_common(ve, flags, false);
    CLI11_PARSE(app, argc, argv);

    try {
        const int workers = hcl::worker_count_from_env();
        const hcl::RunOptions options{flags.trials, flags.seed, workers};
        if (ve->parsed()) {
            hcl::VerifyOptions vo;
            const auto seed = flags.seed.value_or(1);
            const auto rows = hcl::run_verify(seed, vo);
            hcl::write_verify_outputs(flags.out, seed, rows);
            int failed = 0;
            for (const auto& r : rows) {
                failed += !r.pass;
            }
            std::cout << rows.size() - failed << '/' << rows.size() << " checks passed\n";
            return failed ? 2 : 0;
        }
        const auto config = hcl::with_overrides(hcl::load_config(flags.config), options);
        if (st->parsed()) {
            const auto r = hcl::run_static(config, workers);
            hcl::write_static(flags.out, config, r);
            print_summary({{"mpe_mean", r.mean}, {"mpe_stddev", r.stddev}, {"mpe_relative_spread", r.relative_spread}});
        } else if (dy->parsed()) {
            const auto r = hcl::run_dynamic(config, workers);
            hcl::write_dynamic(flags.out, config, r);
            for (const auto& m : r.methods) {
                std::cout << m.method << " cov " << m.cov << " curved " << m.curved_mean << '\n';
            }
            if (config.outliers.enabled) {
                std::cout << "peak_wins " << r.peak_wins << " recovery_wins " << r.recovery_wins << '\n';
            }
        } else {
            const auto r = hcl::run_params(config, workers);
            hcl::write_params(flags.out, config, r);
            std::cout << "final_ratio " << r.final_ratio << " settled_tick "
                      << (r.settled_tick ? std::to_string(*r.settled_tick) : "never") << '\n';
        }
    } catch (const hcl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: unexpected: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
