#pragma once

/**
 * @file orbits.hpp
 * @brief Connecting orbits of the lambda-flow counted mod 2, and the lambda = 0
 *        catalog (handle-slides, cusp orbits, jumps) with the fast-slow orbits
 *        built from it.
 */

#include "msw/critical.hpp"
#include "msw/field.hpp"
#include "msw/flow.hpp"
#include "msw/slow.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msw {

// ---------------------------------------------------------------- lambda > 0

struct ShootingOptions {
    double radius = 0.0;         ///< r0; 0 means tol.shoot_radius
    int angle_samples = 0;       ///< 0 means tol.angle_samples
    double pair_separation = 0;  ///< 0 means tol.pair_separation
    int workers = 1;
};

/// One transverse crossing of W^u(p) with W^s(q).
struct Crossing {
    int target = -1;
    double angle = 0.0;     ///< effective angle on the unstable circle of p
    int depth = 0;          ///< refinement levels used
    double approach = 0.0;  ///< closest distance of the witness to q
    /// Separation of the bracketing pair at the last split (transversality margin proxy).
    double margin = 0.0;
    Trajectory witness;     ///< from near p to the closest approach to q
    double energy_residual = 0.0;  ///< |energy - (F(p) - F(q))|
};

struct ShootingResult {
    int source = -1;
    double lambda = 0.0;
    std::vector<Crossing> crossings;
    int shots = 0;
    int discarded_pairs = 0;
    bool regular = true;
    std::string irregular_reason;

    [[nodiscard]] int count(int q) const;
};

/// Confinement bound on |eta|: problem.eta_max if set, else max |eta| over Crit(F) plus tol.eta_margin.
double eta_bound(const Problem& problem, std::span<const CritPointF> crits);

/// Half the minimum pairwise distance among the critical points.
double attribution_radius(std::span<const CritPointF> crits);

/// Unstable eigenvectors of the lambda-flow linearization at p (columns).
Eigen::MatrixXd unstable_directions(const Problem& problem, const CritPointF& p, double lambda);

/**
 * Shoot the unstable manifold of p and attribute every itinerary change on
 * the unstable circle to the critical point whose stable manifold it crosses.
 * Throws Error(NonRegularLambda) when a bracket cannot be resolved.
 */
ShootingResult shoot_unstable_manifold(const Problem& problem, std::span<const CritPointF> crits, double lambda,
                                       int p, const ShootingOptions& options = {});

struct BoundaryCount {
    int count_mod2 = 0;
    int raw_count = 0;
    std::vector<Trajectory> witnesses;
};

BoundaryCount count_boundary_lambda(const Problem& problem, std::span<const CritPointF> crits, double lambda, int p,
                                    int q, const ShootingOptions& options = {});

// ---------------------------------------------------------------- lambda = 0

/// A rest point of f_eta on an arc of C_F at a given eta.
struct ArcPoint {
    int arc = -1;
    double eta = 0.0;
    Vec2 x = Vec2::Zero();
};

struct HandleSlide {
    int id = -1;
    double eta = 0.0;
    ArcPoint from, to;
    int from_branch = 0;  ///< sign of the unstable separatrix used
    double slope = 0.0;   ///< d s / d eta at the root
    double approach = 0.0;
    Trajectory witness;
};

enum class CuspDirection { IntoFold, OutOfFold };
const char* to_string(CuspDirection d) noexcept;

struct CuspOrbit {
    int id = -1;
    int fold = -1;
    ArcPoint partner;
    CuspDirection direction = CuspDirection::IntoFold;
    double decay_exponent = 0.0;
    Trajectory witness;  ///< forward time, from source to target
};

/// Jump off a fold along its center direction on the departing side.
struct FoldJump {
    int fold = -1;
    ArcPoint landing;
    int landing_index = -1;
    Trajectory witness;
};

/// Initial jump p -> arc point (p in Crit^+) or final jump arc point -> q (q in Crit^-).
struct Jump {
    int crit = -1;
    ArcPoint point;
    bool initial = true;
    Trajectory witness;
};

struct Catalog {
    SlowManifold manifold;
    std::vector<CritPointF> crits;
    std::vector<HandleSlide> handle_slides;
    std::vector<CuspOrbit> cusps;
    std::vector<FoldJump> fold_jumps;
    std::vector<Jump> jumps;
    int scan_samples = 0;
};

struct CatalogOptions {
    int handle_slide_samples = 0;  ///< 0 means tol.handle_slide_samples
};

/// Rest points of f_eta collected from all arcs over eta.
std::vector<ArcPoint> rest_points_at(const Problem& problem, const SlowManifold& m, double eta);

/**
 * Splitting scan over eta for saddle-to-saddle fast orbits. Throws
 * Error(TangentialConnection) when a root has vanishing slope.
 */
std::vector<HandleSlide> detect_handle_slides(const Problem& problem, const SlowManifold& m, int samples);

/// Exponent a of a power-law approach |x - x*| ~ t^{-a}, from the tail d' vs d relation.
double decay_exponent(const Trajectory& traj, const Vec2& target, double lo = 1e-3, double hi = 3e-2);

/**
 * Cusp orbits at a fold (saddles landing in it, or leaving it into saddles),
 * plus the fold jump along the center direction. Throws
 * Error(AmbiguousDecay) if a landing cannot be classified by its decay rate.
 */
std::pair<std::vector<CuspOrbit>, FoldJump> detect_cusp_orbits(const Problem& problem, const SlowManifold& m,
                                                               const FoldPoint& fold);

std::vector<Jump> detect_jumps(const Problem& problem, const SlowManifold& m, std::span<const CritPointF> crits);

Catalog build_catalog(const Problem& problem, std::span<const CritPointF> crits, const CatalogOptions& options = {});

enum class SegmentKind { Slow, Fast };
enum class FastKind { HandleSlide, Cusp, InitialJump, FinalJump, FoldJump };
const char* to_string(FastKind k) noexcept;

struct Segment {
    SegmentKind kind = SegmentKind::Slow;
    // slow
    int arc = -1;
    double eta_from = 0.0, eta_to = 0.0;
    // fast
    FastKind fast = FastKind::HandleSlide;
    int ref = -1;  ///< index into the catalog list for its kind
};

struct RestPoint {
    ExtendedPoint point;
    double F = 0.0;
    std::string label;
};

struct FastSlowOrbitSeq {
    int p = -1, q = -1;
    std::vector<RestPoint> rests;
    std::vector<Segment> segments;
    char case_tag = 'I';  ///< 'I'..'IV' encoded as 1..4 in case_number
    int case_number = 1;

    [[nodiscard]] bool parity_ok() const;
};

/// All fast-slow orbits from p to q (index(p) = index(q) + 1).
std::vector<FastSlowOrbitSeq> enumerate_fast_slow(const Problem& problem, int p, int q, const Catalog& catalog);

/// Polyline image of a fast-slow orbit in lifted (x, eta).
std::vector<Vec3> fast_slow_polyline(const Problem& problem, const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                     double spacing = 0.01);

/// Hausdorff distance between two point sets, x compared on the torus.
double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);

/// Resample a trajectory to roughly uniform spacing.
std::vector<Vec3> resample(const Trajectory& traj, double spacing = 0.01);

struct ConvergenceReport {
    int p = -1, q = -1;
    std::vector<double> lambdas;
    std::vector<double> distances;
    std::vector<double> eta_range_error;
    bool decreasing = false;
    bool final_below = false;
};

/**
 * Hausdorff distance between lambda-orbit witnesses and the fast-slow orbit for
 * each lambda in a decreasing list.
 */
ConvergenceReport check_convergence(const Problem& problem, std::span<const CritPointF> crits,
                                    const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                    std::span<const double> lambdas, const ShootingOptions& options = {},
                                    double proximity = 0.1);

/// Same, with the witnesses per lambda already computed.
ConvergenceReport check_convergence(const Problem& problem, const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                    std::span<const double> lambdas,
                                    std::span<const std::vector<const Trajectory*>> witnesses, double proximity = 0.1);

void to_json(nlohmann::json& j, const HandleSlide& h);
void to_json(nlohmann::json& j, const CuspOrbit& c);
void to_json(nlohmann::json& j, const FoldJump& f);
void to_json(nlohmann::json& j, const Jump& jp);
void to_json(nlohmann::json& j, const FastSlowOrbitSeq& s);
void to_json(nlohmann::json& j, const ConvergenceReport& r);
nlohmann::json catalog_json(const Catalog& c);

}  // namespace msw
