// msw: batch runner for the Morse-Smale-Witten workbench.

#include "msw/errors.hpp"
#include "msw/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<double> parse_csv(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Morse-Smale-Witten complexes of f + eta mu on the flat torus across lambda"};
    app.require_subcommand(1, 1);

    std::string config_path;
    double lambda = 0.0;
    std::string lambdas;
    std::string out_dir;
    int workers = 0;
    long long seed = -1;
    app.add_option("--config", config_path, "JSON run configuration (default problem if omitted)");
    app.add_option("--lambda", lambda, "lambda for count")->check(CLI::PositiveNumber);
    app.add_option("--lambdas", lambdas, "comma separated lambda list for sweep and report");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "shooting threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for perturbation utilities")->check(CLI::NonNegativeNumber);

    const std::pair<const char*, const char*> commands[] = {
        {"check", "assumption checks (exit 2 if any fails)"},
        {"crit", "critical points of F"},
        {"trace", "slow manifold arcs, folds and lambda = 0 catalog"},
        {"count", "boundary matrix and witnesses at --lambda"},
        {"sweep", "Betti numbers over --lambdas"},
        {"fastslow", "fast-slow complex against the smallest lambda"},
        {"foldtest", "fold normal form exit scaling"},
        {"report", "full pipeline with verdicts"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : msw::kExitConfig;
    }

    msw::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = msw::load_config(config_path);
        if (lambda > 0) cfg.lambda = lambda;
        if (!lambdas.empty()) {
            cfg.lambdas = parse_csv(lambdas);
            for (double l : cfg.lambdas)
                if (!(l > 0)) throw msw::Error(msw::ErrorKind::Config, "lambdas must be positive");
        }
        if (!out_dir.empty()) cfg.output = out_dir;
        if (workers > 0) cfg.workers = workers;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    } catch (const msw::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return msw::kExitConfig;
    } catch (const std::invalid_argument&) {
        std::cerr << "error: --lambdas must be a comma separated list of numbers\n";
        return msw::kExitConfig;
    }
    return msw::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout);
}
