#pragma once

/**
 * @file flow.hpp
 * @brief Integration of the lambda-flow x' = -(grad f + eta grad mu),
 *        eta' = -lambda^2 mu and of the fast flow (lambda = 0, eta frozen).
 *
 * Trajectories are integrated in lifted coordinates so that winding around the
 * torus is visible; the energy int |p'|^2_{g_lambda} dt is carried as a fourth
 * state component.
 */

#include "msw/critical.hpp"
#include "msw/field.hpp"
#include "msw/ode.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace msw {

using FlowNode = ode::Node<4>;
using FlowState = FlowNode::State;

enum class TerminalKind { ConvergedTo, EscapePlusEta, EscapeMinusEta, Undetermined };
const char* to_string(TerminalKind k) noexcept;

struct Terminal {
    TerminalKind kind = TerminalKind::Undetermined;
    int target = -1;  ///< basin id for ConvergedTo
    friend bool operator==(const Terminal&, const Terminal&) = default;
};

/// Ball around a rest point used for convergence detection.
struct Basin {
    int id = -1;
    Vec3 center = Vec3::Zero();  ///< (x1, x2, eta); x is compared on the torus
    double radius = 0.0;
};

struct Budget {
    double max_time = 1e5;
    long max_steps = 2'000'000;
};

struct Trajectory {
    double lambda = 0.0;
    std::vector<FlowNode> nodes;  ///< lifted (x1, x2, eta, energy)
    Terminal terminal;
    double energy_spent = 0.0;
    double F_start = 0.0;
    double F_end = 0.0;
    bool step_failure = false;
    /// Largest per-step increase of F (should stay below 1e-9).
    double max_F_increase = 0.0;
    /// Smallest |grad F|_{g_lambda} seen outside all basins (Palais-Smale monitor).
    double min_speed_outside = INFINITY;

    [[nodiscard]] std::vector<std::pair<double, ExtendedPoint>> samples() const;
    [[nodiscard]] Vec3 end_point() const;
    [[nodiscard]] Vec3 point(std::size_t i) const { return nodes[i].y.head<3>(); }
};

struct FlowOptions {
    bool detect_convergence = true;
    bool detect_escape = true;
    /// Integrate -grad F (false) or +grad F (true, i.e. backward in time).
    bool reverse = false;
};

/// Distance from a lifted (x, eta) point to a basin center, x taken on the torus.
double basin_distance(const Vec3& y, const Basin& b) noexcept;

/// Basins around every critical point of F; radius = basin_factor * min |eig D^2 F|.
std::vector<Basin> crit_basins(const Problem& problem, std::span<const CritPointF> crits);
/// Basins around planar rest points of f_eta at a fixed eta.
std::vector<Basin> planar_basins(const Problem& problem, std::span<const PlanarCrit> rests, double eta);

ode::StepOptions step_options(const Tolerances& tol);

/// State derivative (x1, x2, eta, energy); sign = -1 runs the flow backward.
FlowState flow_rhs(const Problem& problem, double lambda, double sign, const FlowState& s);

/**
 * Integrate the lambda-flow from `start` (lifted coordinates allowed).
 * Terminal events: basin entry with K-step contraction (ConvergedTo),
 * |eta| > eta_max (Escape*), budget exhaustion (Undetermined). A controller
 * failure truncates the trajectory and sets step_failure.
 */
Trajectory integrate(const Problem& problem, double lambda, const Vec3& start, const Budget& budget,
                     std::span<const Basin> basins, const FlowOptions& options = {}, double start_energy = 0.0,
                     double t0 = 0.0);
Trajectory integrate(const Problem& problem, double lambda, const ExtendedPoint& start, const Budget& budget,
                     std::span<const Basin> basins, const FlowOptions& options = {});

/// The fast flow at frozen eta: a 2-d gradient flow of f_eta on T^2.
Trajectory fast_integrate(const Problem& problem, double eta, const Vec2& x_start, const Budget& budget,
                          std::span<const Basin> basins, const FlowOptions& options = {});

/// Recompute the terminal tag of a finished trajectory from its samples.
Terminal classify_terminal(const Problem& problem, const Trajectory& traj, std::span<const Basin> basins,
                           const Budget& budget);

/// CSV with columns t,x1,x2,eta,F (x reduced mod 2pi).
void write_csv(std::ostream& os, const Problem& problem, const Trajectory& traj);

/// Energy identity residual |energy_spent - (F_start - F_end)|.
double energy_residual(const Trajectory& traj);

/// Reverse a backward-integrated trajectory into forward time order.
Trajectory reversed(const Trajectory& traj);

}  // namespace msw
