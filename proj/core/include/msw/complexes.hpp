#pragma once

/**
 * @file complexes.hpp
 * @brief The complexes C^lambda (from shooting) and C^0 (from fast-slow
 *        orbits) on the generators Crit(F) graded by index_F.
 */

#include "msw/homology.hpp"
#include "msw/orbits.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace msw {

std::map<int, std::vector<int>> graded_generators(std::span<const CritPointF> crits);

struct LambdaComplex {
    double lambda = 0.0;
    bool regular = true;
    std::string reason;  ///< why lambda was flagged, if it was
    Z2ChainComplex complex;
    std::vector<ShootingResult> shooting;  ///< one per source of index >= 1
    double max_energy_residual = 0.0;

    [[nodiscard]] const ShootingResult* from(int p) const;
};

/// Errors of kind NonRegularLambda are caught and reported through `regular`.
LambdaComplex build_complex_lambda(const Problem& problem, std::span<const CritPointF> crits, double lambda,
                                   const ShootingOptions& options = {});

struct ZeroComplex {
    Z2ChainComplex complex;
    std::map<std::pair<int, int>, std::vector<FastSlowOrbitSeq>> orbits;
};

ZeroComplex build_complex_zero(const Problem& problem, std::span<const CritPointF> crits, const Catalog& catalog);

void to_json(nlohmann::json& j, const LambdaComplex& c);
void to_json(nlohmann::json& j, const ZeroComplex& c);

}  // namespace msw
