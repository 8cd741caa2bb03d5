#pragma once

/**
 * @file pipeline.hpp
 * @brief Run configuration, cached pipeline stages and the batch commands
 *        behind the msw executable.
 */

#include "msw/assumptions.hpp"
#include "msw/complexes.hpp"
#include "msw/foldtest.hpp"
#include "msw/homology.hpp"
#include "msw/orbits.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace msw {

struct RunConfig {
    Problem problem = default_problem();
    std::vector<double> lambdas{0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0};
    double lambda = 8.0;  ///< single-lambda commands
    std::vector<double> convergence_lambdas{0.4, 0.2, 0.1, 0.05};
    double proximity = 0.1;
    std::vector<double> fold_epsilons{1e-2, 1e-3, 1e-4, 1e-5};
    double fold_delta = 0.1;
    std::string output = "out";
    int workers = 1;
    std::uint64_t seed = 1;
};

/// Unknown keys and malformed values throw Error(Config).
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Copy of `problem` with shooting parameters jittered deterministically from `seed`.
Problem perturbed(const Problem& problem, std::uint64_t seed);

/// Copy of `problem` with integration and solver tolerances halved.
Problem halved_tolerances(const Problem& problem);

/// Floats rounded to `digits` significant digits so that dumps are reproducible.
nlohmann::json rounded(const nlohmann::json& j, int digits = 12);

/// Mod-2 count for every adjacent pair (p, q) of the complex.
std::map<std::pair<int, int>, int> counts_mod2(const Z2ChainComplex& c);

struct PairConvergence {
    int p = -1, q = -1;
    int orbits = 0;         ///< fast-slow orbits from p to q
    ConvergenceReport best;  ///< the fast-slow orbit followed most closely at the last lambda
    [[nodiscard]] bool ok() const { return best.decreasing && best.final_below; }
};

struct Verdict {
    bool invariance = false;    ///< equal Betti rows over regular lambdas, b1 = b2 = #components
    bool large_lambda = false;  ///< C^lambda_max equals the restricted complex shifted by one
    bool small_lambda = false;  ///< C^lambda_min equals the fast-slow complex
    std::vector<std::string> notes;
    [[nodiscard]] bool ok() const { return invariance && large_lambda && small_lambda; }
};

/// Lazily computed and cached stages for one configuration.
class Pipeline {
public:
    explicit Pipeline(RunConfig config);

    [[nodiscard]] const RunConfig& config() const noexcept { return config_; }
    /// The problem with eta_max resolved: 3 + max |eta| over Crit(F) and folds unless configured.
    const Problem& problem();

    const std::vector<CritPointF>& crits();
    const Catalog& catalog();
    const AssumptionReport& assumptions();
    const LambdaComplex& at(double lambda);
    const ZeroComplex& zero();
    const std::pair<Z2ChainComplex, LevelSetGeometry>& restricted();
    const std::vector<PairConvergence>& convergence();
    const FoldScaling& foldtest();

    ComparisonReport compare_large(double lambda);
    ComparisonReport compare_small(double lambda);
    Verdict verdict();

    nlohmann::json sweep_json();

private:
    RunConfig config_;
    std::optional<std::vector<CritPointF>> crits_;
    std::optional<Catalog> catalog_;
    std::optional<AssumptionReport> assumptions_;
    std::map<double, LambdaComplex> complexes_;
    std::optional<ZeroComplex> zero_;
    std::optional<std::pair<Z2ChainComplex, LevelSetGeometry>> restricted_;
    std::optional<std::vector<PairConvergence>> convergence_;
    std::optional<FoldScaling> foldtest_;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitAssumptions = 2, kExitNumeric = 3 };

/// Commands write report.json plus tables/ and witnesses/ under config.output
/// and a short summary to `log`; the return value is the exit code.
int cmd_check(Pipeline& pl, std::ostream& log);
int cmd_crit(Pipeline& pl, std::ostream& log);
int cmd_trace(Pipeline& pl, std::ostream& log);
int cmd_count(Pipeline& pl, std::ostream& log);
int cmd_sweep(Pipeline& pl, std::ostream& log);
int cmd_fastslow(Pipeline& pl, std::ostream& log);
int cmd_foldtest(Pipeline& pl, std::ostream& log);
int cmd_report(Pipeline& pl, std::ostream& log);

/// Dispatch by name, mapping exceptions to exit codes.
int run_command(const std::string& name, const RunConfig& config, std::ostream& log);

}  // namespace msw
