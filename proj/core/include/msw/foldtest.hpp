#pragma once

/**
 * @file foldtest.hpp
 * @brief Exit offset of the planar fold model z1' = -z2 + z1^2, z2' = -eps
 *        and its scaling in eps.
 */

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <span>
#include <vector>

namespace msw {

struct FoldRun {
    double epsilon = 0.0;
    double delta = 0.0;
    double rho = 0.0;       ///< |z2| when z1 first reaches delta
    double exit_time = 0.0;
};

struct FoldScaling {
    std::vector<FoldRun> runs;
    double slope = 0.0;  ///< least-squares slope of log rho against log eps
};

/// Integrate from (-1, 1) until z1 = delta. Throws Error(NoExit) if the section is never reached.
FoldRun fold_exit(double epsilon, double delta);

FoldScaling fold_scaling(std::span<const double> epsilons, double delta);

void to_json(nlohmann::json& j, const FoldRun& r);
void to_json(nlohmann::json& j, const FoldScaling& s);
/// CSV with columns epsilon,rho.
void write_csv(std::ostream& os, const FoldScaling& s);

}  // namespace msw
