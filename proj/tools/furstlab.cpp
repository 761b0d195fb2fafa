#include "furst/config.hpp"
#include "furst/errors.hpp"
#include "furst/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"furstlab: experiments on nonstationary random matrix products"};
    app.set_version_flag("--version", furst::kVersion);
    app.require_subcommand(1);

    struct Flags {
        std::string                  config;
        std::optional<std::uint64_t> seed;
        std::optional<std::string>   out;
        std::optional<int>           workers;
        std::optional<double>        budget;
    };
    Flags flags;
    std::string chosen;
    for (const auto& kind : furst::experiment_kinds()) {
        CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
        sub->add_option("--config", flags.config, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "64-bit master seed (overrides the config)");
        sub->add_option("--out", flags.out, "output directory (default $FURSTLAB_OUT_DIR or ./furstlab_out)");
        sub->add_option("--workers", flags.workers, "worker threads, 0 = hardware concurrency")
            ->check(CLI::Range(0, 1024));
        sub->add_option("--budget", flags.budget, "refuse runs estimated above this many operations")
            ->check(CLI::PositiveNumber);
        sub->callback([&chosen, kind] { chosen = kind; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const furst::RunConfig cfg = furst::load_config(flags.config);
        furst::RunOptions      opt;
        opt.seed    = flags.seed;
        opt.out     = flags.out;
        opt.workers = flags.workers;
        opt.budget  = flags.budget;
        const auto res = furst::run_experiment(chosen, cfg, opt);
        std::cout << chosen << ": seed " << res.seed << ", wrote";
        for (const auto& f : res.files) std::cout << ' ' << f;
        std::cout << " and manifest.json to " << res.outDir << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "furstlab " << chosen << ": " << e.what() << '\n';
        return furst::exit_code_for(e);
    }
}
