#pragma once

/**
 * @file critical.hpp
 * @brief Critical points of F, of f_eta at fixed eta, and of single fields.
 */

#include "msw/field.hpp"

#include <array>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

namespace msw {

enum class SlowType { Attractor, Repeller, Degenerate };
const char* to_string(SlowType t) noexcept;

/// A critical point of F on T^2 x R.
struct CritPointF {
    ExtendedPoint point;
    int index_F = 0;
    int fast_index = 0;
    SlowType slow_type = SlowType::Degenerate;
    /// Eigenvalues of D^2 F, ascending.
    std::array<double, 3> hessian_eigs{};
    /// Sorted position by (eta, x1, x2); stable for a fixed configuration.
    int id = -1;
    double F = 0.0;

    /// Residual of the defining system at the stored point.
    [[nodiscard]] double residual(const Problem& problem) const;
};

/// A critical point of a function on T^2 (f_eta at fixed eta, or f, or mu).
struct PlanarCrit {
    Vec2 x = Vec2::Zero();
    int index = 0;
    Vec2 eigvals = Vec2::Zero();  ///< ascending
    Mat2 eigvecs = Mat2::Identity();  ///< columns match eigvals
    double value = 0.0;
};

struct FastIndex {
    int index = 0;
    bool eig_near_zero = false;
    double min_abs_eig = 0.0;
};

/// Number of negative eigenvalues of Hess f + eta Hess mu at x.
FastIndex fast_index(const Problem& problem, const Vec2& x, double eta);

/**
 * All solutions of {grad f + eta grad mu = 0, mu = 0} reachable by damped
 * Newton from a seed_grid x seed_grid lattice, with eta seeded at zeta(x).
 * Points are deduplicated, sorted and classified. Throws
 * Error(DegenerateCritical) when D^2 F is singular at a solution.
 */
std::vector<CritPointF> find_crit_F(const Problem& problem, int grid = 0);

/// Build the classified record for a point already known to solve the system.
CritPointF classify_crit(const Problem& problem, const ExtendedPoint& p);

/// Newton polish of an approximate solution of the 3x3 system; nullopt on failure.
std::optional<ExtendedPoint> newton_crit_F(const Problem& problem, const ExtendedPoint& start);

/// Critical points of h = f_eta at fixed eta by damped Newton from a grid.
std::vector<PlanarCrit> crit_points_f_eta(const Problem& problem, double eta, int grid = 24);

/// Critical points of a single field.
std::vector<PlanarCrit> crit_points(const TorusField& field, int grid = 24);

/// Slope of the slow equation eta' = -mu(x(eta)) with respect to eta at a branch point.
double slow_slope(const Problem& problem, const Vec2& x, double eta);

void to_json(nlohmann::json& j, const CritPointF& c);

}  // namespace msw
