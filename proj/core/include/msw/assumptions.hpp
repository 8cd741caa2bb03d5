#pragma once

/**
 * @file assumptions.hpp
 * @brief Numerical checks of the genericity assumptions that can be checked
 *        on T^2, with margins.
 */

#include "msw/critical.hpp"
#include "msw/field.hpp"
#include "msw/orbits.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace msw {

enum class CheckStatus { Pass, Fail, Unverifiable };
const char* to_string(CheckStatus s) noexcept;

struct AssumptionCheck {
    std::string id;  ///< "A2", "A3", ...
    CheckStatus status = CheckStatus::Unverifiable;
    double margin = 0.0;  ///< measured quantity compared against the threshold
    double threshold = 0.0;
    std::string note;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    [[nodiscard]] bool ok() const;
    [[nodiscard]] const AssumptionCheck* find(const std::string& id) const;
};

/**
 * A2, A3, A6, A7, A8, A9 and A12 with margins; A4, A5, A10, A11, A13 listed as
 * unverifiable. A12 needs the handle-slide catalog: pass one in, or it is built.
 */
AssumptionReport check_assumptions(const Problem& problem, std::span<const CritPointF> crits,
                                   const Catalog* catalog = nullptr);

void to_json(nlohmann::json& j, const AssumptionCheck& c);
void to_json(nlohmann::json& j, const AssumptionReport& r);

}  // namespace msw
