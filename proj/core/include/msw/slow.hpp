#pragma once

/**
 * @file slow.hpp
 * @brief The critical manifold C_F = {grad f + eta grad mu = 0} in T^2 x R,
 *        its folds, and the fast orbits that shrink into a fold.
 *
 * C_F is a union of smooth curves. It is traced by pseudo-arclength
 * continuation and cut at folds (det Hess f_eta = 0) into arcs on which the
 * fast index is constant and eta is strictly monotone.
 */

#include "msw/critical.hpp"
#include "msw/field.hpp"
#include "msw/flow.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace msw {

struct BranchNode {
    Vec3 y = Vec3::Zero();  ///< lifted (x1, x2, eta)
    double s = 0.0;         ///< arclength from the component start
};

enum class EndKind { Fold, EtaCutoff, Loop };
const char* to_string(EndKind k) noexcept;

struct ArcEnd {
    EndKind kind = EndKind::EtaCutoff;
    int fold = -1;
};

enum class MarkerKind { CritF, HandleSlide, CuspOrbit, InitialJump, FinalJump, FastLanding };
const char* to_string(MarkerKind k) noexcept;

struct Marker {
    MarkerKind kind = MarkerKind::CritF;
    int ref = -1;  ///< crit id, or index into the owning catalog list
    double eta = 0.0;
};

/// A fold-free arc of C_F. Nodes are ordered by arclength; eta is monotone.
struct SlowBranch {
    int id = -1;
    int component = -1;
    int fast_index = 0;
    std::vector<BranchNode> nodes;
    ArcEnd start, end;
    std::vector<Marker> markers;
    double eta_lo = 0.0, eta_hi = 0.0;
    bool eta_increasing = true;
    /// False if the monotonicity check failed on the stored nodes.
    bool monotone = true;

    [[nodiscard]] bool contains_eta(double eta) const { return eta >= eta_lo && eta <= eta_hi; }
};

struct FoldPoint {
    int id = -1;
    ExtendedPoint point;
    Vec2 center_dir = Vec2::Zero();  ///< unit kernel vector of Hess f_eta
    double c = 0.0;                  ///< -<center_dir, grad mu>
    double d = 0.0;                  ///< -1/2 D^3 f_eta (v, v, v)
    int lower_index = 0;
    /// The two arcs live on the side sign(eta - eta_p) = orientation.
    int orientation = 0;
    int upper_arc = -1;  ///< arc carrying fast index lower_index + 1
    int lower_arc = -1;
    /// Quadratic coefficient of eta - eta_p in the center coordinate, fitted on the curve.
    double fitted_curvature = 0.0;
};

struct SlowManifold {
    std::vector<std::vector<BranchNode>> components;
    std::vector<bool> closed;
    std::vector<SlowBranch> branches;
    std::vector<FoldPoint> folds;
    double eta_cut = 0.0;
};

/**
 * Trace every component of C_F with |eta| <= eta_cut that is reachable from
 * the critical points of F or from the planar rest points of f_eta on a grid
 * of eta levels. Throws Error(ContinuationStall) when the step size collapses
 * and Error(FoldDegenerate) at a fold with vanishing normal form coefficient.
 */
SlowManifold trace_slow_manifold(const Problem& problem, std::span<const CritPointF> crits, double eta_cut);

/// Solve grad f_eta(x) = 0 at fixed eta from a starting guess.
std::optional<Vec2> polish_at_eta(const Problem& problem, const Vec2& guess, double eta);

/// The point of an arc over a given eta (nullopt if eta is outside its range).
std::optional<Vec2> branch_point_at(const Problem& problem, const SlowBranch& arc, double eta);

/// Velocity (dx/dtau, deta/dtau) of the reduced flow eta' = -mu along C_F in slow time.
Vec3 slow_velocity(const Problem& problem, const Vec2& x, double eta);

struct FoldModel {
    Vec2 center_dir = Vec2::Zero();
    double c = 0.0;
    double d = 0.0;
    double predicted_curvature = 0.0;  ///< -d / c
};

/// Normal form coefficients of the fold at p from third derivatives.
FoldModel fold_local_model(const Problem& problem, const ExtendedPoint& p);

/// Curvature of eta along the curve near a fold, by least squares on sampled curve points.
double fit_fold_curvature(const Problem& problem, const FoldPoint& fold, double radius = 0.03);

struct ShortOrbit {
    double s = 0.0;
    double eta = 0.0;
    Vec2 from = Vec2::Zero();  ///< point on the higher-index arc
    Vec2 to = Vec2::Zero();    ///< point on the lower-index arc
    Trajectory trajectory;     ///< fast orbit from `from` to `to`, forward time
    bool unique = false;       ///< the opposite separatrix does not reach `to`
    double length = 0.0;
};

/**
 * The fast orbit between the two arcs meeting at a fold, at
 * eta = eta_p + orientation * s^2. Throws Error(NotFound) when the
 * separatrix does not connect.
 */
ShortOrbit short_orbit(const Problem& problem, const SlowManifold& manifold, const FoldPoint& fold, double s);

void to_json(nlohmann::json& j, const FoldPoint& f);
void to_json(nlohmann::json& j, const SlowBranch& b);
/// CSV with columns branch,fast_index,s,x1,x2,eta,d_C,mu (x reduced mod 2pi).
void write_branches_csv(std::ostream& os, const Problem& problem, const SlowManifold& m);

}  // namespace msw
