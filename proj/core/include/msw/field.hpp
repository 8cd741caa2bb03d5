#pragma once

/**
 * @file field.hpp
 * @brief Trigonometric fields on the flat 2-torus and the Lagrange-multiplier
 *        function F(x, eta) = f(x) + eta * mu(x) built from them.
 *
 * Angles live on T^2 = R^2 / 2piZ^2 with the identity metric. Integrators work
 * with unwrapped (lifted) coordinates; everything that is stored or compared
 * goes through the reduction helpers below.
 */

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <numbers>
#include <vector>

namespace msw {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduce an angle to [0, 2pi).
double wrap_angle(double a) noexcept;
/// Reduce both components to [0, 2pi).
Vec2 wrap(const Vec2& x) noexcept;
/// Shortest representative of a - b on the torus (components in [-pi, pi)).
Vec2 torus_delta(const Vec2& a, const Vec2& b) noexcept;
double torus_distance(const Vec2& a, const Vec2& b) noexcept;

/// One Fourier mode a cos<k,x> + b sin<k,x>.
struct FourierTerm {
    std::array<int, 2> k{0, 0};
    double a = 0.0;
    double b = 0.0;
};

/// Third derivative tensor of a scalar field on T^2, indexed [i][j][l].
using Tensor3 = std::array<std::array<std::array<double, 2>, 2>, 2>;

/**
 * A finite trigonometric polynomial x -> sum a_k cos<k,x> + b_k sin<k,x>.
 *
 * Derivatives are exact term-wise differentiation, so the field is 2pi-periodic
 * in each coordinate to the rounding of the same expression.
 */
class TorusField {
public:
    TorusField() = default;
    explicit TorusField(std::vector<FourierTerm> terms) : terms_(std::move(terms)) {}

    [[nodiscard]] double value(const Vec2& x) const;
    [[nodiscard]] Vec2 gradient(const Vec2& x) const;
    [[nodiscard]] Mat2 hessian(const Vec2& x) const;
    [[nodiscard]] Tensor3 third(const Vec2& x) const;

    [[nodiscard]] const std::vector<FourierTerm>& terms() const noexcept { return terms_; }
    [[nodiscard]] bool empty() const noexcept { return terms_.empty(); }

    /// Term list concatenation; equal wave vectors are not merged.
    TorusField& operator+=(const TorusField& other);

private:
    std::vector<FourierTerm> terms_;
};

double eval(const TorusField& field, const Vec2& x);
Vec2 grad(const TorusField& field, const Vec2& x);
Mat2 hess(const TorusField& field, const Vec2& x);

/// A point of T^2 x R with the angle pair kept reduced mod 2pi.
struct ExtendedPoint {
    Vec2 x = Vec2::Zero();
    double eta = 0.0;

    ExtendedPoint() = default;
    ExtendedPoint(const Vec2& angles, double multiplier) : x(wrap(angles)), eta(multiplier) {}
    static ExtendedPoint lifted(const Vec3& y) { return {Vec2(y[0], y[1]), y[2]}; }
};

double distance(const ExtendedPoint& a, const ExtendedPoint& b) noexcept;

/// Numerical knobs shared by all modules. Defaults are the documented ones.
struct Tolerances {
    double newton_tol = 1e-12;
    double dedupe_radius = 1e-6;
    double degenerate_eig = 1e-8;
    int seed_grid = 64;

    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = 0.5;
    double basin_factor = 0.05;
    int converge_steps = 20;

    double continuation_step = 0.01;
    double continuation_tol = 1e-10;
    double min_continuation_step = 1e-7;

    double mu_grad_tol = 1e-6;
    double assumption_margin = 1e-4;
    double eta_margin = 3.0;

    double shoot_radius = 1e-5;
    int angle_samples = 64;
    double pair_separation = 1e-3;
    int max_bisection_levels = 6000;
    double attribution_fraction = 0.5;
    double witness_approach = 2e-3;

    int handle_slide_samples = 200;
    double eta_bisection_tol = 1e-10;
    double transversality_tol = 1e-6;
    double fold_offset = 1e-3;
    double short_orbit_eps0 = 0.05;

    double trace_step = 0.01;
    double trace_tol = 1e-12;
    int level_grid = 128;
};

void to_json(nlohmann::json& j, const Tolerances& t);
/// Overlays the keys present in j onto t; unknown keys throw Error(Config).
void update_from_json(const nlohmann::json& j, Tolerances& t);

/// The data (f, mu) together with tolerances and the confinement bound.
struct Problem {
    TorusField f;
    TorusField mu;
    Tolerances tol;
    /// Escape threshold on |eta|; 0 means not yet derived.
    double eta_max = 0.0;

    /// f_eta = f + eta mu
    [[nodiscard]] double f_eta(const Vec2& x, double eta) const { return f.value(x) + eta * mu.value(x); }
    [[nodiscard]] Vec2 grad_f_eta(const Vec2& x, double eta) const { return f.gradient(x) + eta * mu.gradient(x); }
    [[nodiscard]] Mat2 hess_f_eta(const Vec2& x, double eta) const { return f.hessian(x) + eta * mu.hessian(x); }

    [[nodiscard]] double F(const ExtendedPoint& p) const { return f_eta(p.x, p.eta); }
    [[nodiscard]] double F(const Vec3& y) const { return f_eta(Vec2(y[0], y[1]), y[2]); }
};

/**
 * Right-hand side of the lambda-flow, i.e. minus the gradient of F in the
 * metric g + lambda^{-2} d eta^2: (-(grad f + eta grad mu), -lambda^2 mu).
 * lambda = 0 gives the fast system with eta frozen.
 */
Vec3 grad_F(const Problem& problem, const ExtendedPoint& p, double lambda);
Vec3 grad_F(const Problem& problem, const Vec3& lifted, double lambda);

/// Euclidean Hessian D^2 F at (x, eta): [[Hess f_eta, grad mu], [grad mu^T, 0]].
Mat3 hess_F(const Problem& problem, const ExtendedPoint& p);

/// Jacobian of grad_F (the flow field) at a point.
Mat3 flow_jacobian(const Problem& problem, const ExtendedPoint& p, double lambda);

/// zeta(x) = -<grad mu, grad f> / |grad mu|^2, so grad f + zeta grad mu is orthogonal to grad mu.
double zeta(const Problem& problem, const Vec2& x);

void to_json(nlohmann::json& j, const FourierTerm& t);
void from_json(const nlohmann::json& j, FourierTerm& t);
void to_json(nlohmann::json& j, const TorusField& field);
void from_json(const nlohmann::json& j, TorusField& field);

/// mu = cos x1 + 0.5 cos x2.
TorusField default_mu();
/// The shipped default f; see README for why it carries a coupling mode.
TorusField default_f();
Problem default_problem();

}  // namespace msw
