#include "msw/field.hpp"

#include "msw/errors.hpp"

#include <cmath>
#include <string_view>
#include <variant>

namespace msw {

double wrap_angle(double a) noexcept {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

Vec2 wrap(const Vec2& x) noexcept { return {wrap_angle(x[0]), wrap_angle(x[1])}; }

Vec2 torus_delta(const Vec2& a, const Vec2& b) noexcept {
    Vec2 d = a - b;
    for (int i = 0; i < 2; ++i) d[i] -= kTwoPi * std::floor((d[i] + std::numbers::pi) / kTwoPi);
    return d;
}

double torus_distance(const Vec2& a, const Vec2& b) noexcept { return torus_delta(a, b).norm(); }

double distance(const ExtendedPoint& a, const ExtendedPoint& b) noexcept {
    const Vec2 d = torus_delta(a.x, b.x);
    return std::sqrt(d.squaredNorm() + (a.eta - b.eta) * (a.eta - b.eta));
}

double TorusField::value(const Vec2& x) const {
    double v = 0.0;
    for (const auto& t : terms_) {
        const double ph = t.k[0] * x[0] + t.k[1] * x[1];
        v += t.a * std::cos(ph) + t.b * std::sin(ph);
    }
    return v;
}

Vec2 TorusField::gradient(const Vec2& x) const {
    Vec2 g = Vec2::Zero();
    for (const auto& t : terms_) {
        const double ph = t.k[0] * x[0] + t.k[1] * x[1];
        const double s = -t.a * std::sin(ph) + t.b * std::cos(ph);
        g[0] += s * t.k[0];
        g[1] += s * t.k[1];
    }
    return g;
}

Mat2 TorusField::hessian(const Vec2& x) const {
    Mat2 h = Mat2::Zero();
    for (const auto& t : terms_) {
        const double ph = t.k[0] * x[0] + t.k[1] * x[1];
        const double s = -t.a * std::cos(ph) - t.b * std::sin(ph);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) h(i, j) += s * t.k[i] * t.k[j];
    }
    return h;
}

Tensor3 TorusField::third(const Vec2& x) const {
    Tensor3 out{};
    for (const auto& t : terms_) {
        const double ph = t.k[0] * x[0] + t.k[1] * x[1];
        const double s = t.a * std::sin(ph) - t.b * std::cos(ph);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int l = 0; l < 2; ++l) out[i][j][l] += s * t.k[i] * t.k[j] * t.k[l];
    }
    return out;
}

TorusField& TorusField::operator+=(const TorusField& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    return *this;
}

double eval(const TorusField& field, const Vec2& x) { return field.value(x); }
Vec2 grad(const TorusField& field, const Vec2& x) { return field.gradient(x); }
Mat2 hess(const TorusField& field, const Vec2& x) { return field.hessian(x); }

Vec3 grad_F(const Problem& problem, const Vec3& y, double lambda) {
    const Vec2 x(y[0], y[1]);
    const Vec2 g = problem.f.gradient(x) + y[2] * problem.mu.gradient(x);
    return {-g[0], -g[1], -lambda * lambda * problem.mu.value(x)};
}

Vec3 grad_F(const Problem& problem, const ExtendedPoint& p, double lambda) {
    return grad_F(problem, Vec3(p.x[0], p.x[1], p.eta), lambda);
}

Mat3 hess_F(const Problem& problem, const ExtendedPoint& p) {
    Mat3 h = Mat3::Zero();
    h.topLeftCorner<2, 2>() = problem.hess_f_eta(p.x, p.eta);
    const Vec2 gm = problem.mu.gradient(p.x);
    h(0, 2) = h(2, 0) = gm[0];
    h(1, 2) = h(2, 1) = gm[1];
    return h;
}

Mat3 flow_jacobian(const Problem& problem, const ExtendedPoint& p, double lambda) {
    Mat3 j = -hess_F(problem, p);
    j.row(2) *= lambda * lambda;
    return j;
}

double zeta(const Problem& problem, const Vec2& x) {
    const Vec2 gm = problem.mu.gradient(x);
    const double n2 = gm.squaredNorm();
    if (std::sqrt(n2) < problem.tol.mu_grad_tol)
        throw Error(ErrorKind::NearCriticalMu, "|grad mu| below tolerance in zeta");
    return -gm.dot(problem.f.gradient(x)) / n2;
}

void to_json(nlohmann::json& j, const FourierTerm& t) { j = {{"k", {t.k[0], t.k[1]}}, {"a", t.a}, {"b", t.b}}; }

void from_json(const nlohmann::json& j, FourierTerm& t) {
    if (!j.is_object()) throw Error(ErrorKind::Config, "field term must be an object");
    for (const auto& [key, _] : j.items())
        if (key != "k" && key != "a" && key != "b") throw Error(ErrorKind::Config, "unknown field term key '" + key + "'");
    const auto& k = j.at("k");
    if (!k.is_array() || k.size() != 2) throw Error(ErrorKind::Config, "wave vector k must be [int, int]");
    t.k = {k[0].get<int>(), k[1].get<int>()};
    t.a = j.value("a", 0.0);
    t.b = j.value("b", 0.0);
}

void to_json(nlohmann::json& j, const TorusField& field) {
    j = nlohmann::json::array();
    for (const auto& t : field.terms()) j.push_back(t);
}

void from_json(const nlohmann::json& j, TorusField& field) {
    if (!j.is_array()) throw Error(ErrorKind::Config, "field must be a JSON list of terms");
    field = TorusField(j.get<std::vector<FourierTerm>>());
}

namespace {

using TolMember = std::variant<double Tolerances::*, int Tolerances::*>;

struct TolEntry {
    std::string_view name;
    TolMember member;
};

constexpr TolEntry kTolTable[] = {
    {"newton_tol", &Tolerances::newton_tol},
    {"dedupe_radius", &Tolerances::dedupe_radius},
    {"degenerate_eig", &Tolerances::degenerate_eig},
    {"seed_grid", &Tolerances::seed_grid},
    {"rtol", &Tolerances::rtol},
    {"atol", &Tolerances::atol},
    {"max_step", &Tolerances::max_step},
    {"basin_factor", &Tolerances::basin_factor},
    {"converge_steps", &Tolerances::converge_steps},
    {"continuation_step", &Tolerances::continuation_step},
    {"continuation_tol", &Tolerances::continuation_tol},
    {"min_continuation_step", &Tolerances::min_continuation_step},
    {"mu_grad_tol", &Tolerances::mu_grad_tol},
    {"assumption_margin", &Tolerances::assumption_margin},
    {"eta_margin", &Tolerances::eta_margin},
    {"shoot_radius", &Tolerances::shoot_radius},
    {"angle_samples", &Tolerances::angle_samples},
    {"pair_separation", &Tolerances::pair_separation},
    {"max_bisection_levels", &Tolerances::max_bisection_levels},
    {"attribution_fraction", &Tolerances::attribution_fraction},
    {"witness_approach", &Tolerances::witness_approach},
    {"handle_slide_samples", &Tolerances::handle_slide_samples},
    {"eta_bisection_tol", &Tolerances::eta_bisection_tol},
    {"transversality_tol", &Tolerances::transversality_tol},
    {"fold_offset", &Tolerances::fold_offset},
    {"short_orbit_eps0", &Tolerances::short_orbit_eps0},
    {"trace_step", &Tolerances::trace_step},
    {"trace_tol", &Tolerances::trace_tol},
    {"level_grid", &Tolerances::level_grid},
};

}  // namespace

void to_json(nlohmann::json& j, const Tolerances& t) {
    j = nlohmann::json::object();
    for (const auto& e : kTolTable) {
        std::visit([&](auto member) { j[std::string(e.name)] = t.*member; }, e.member);
    }
}

void update_from_json(const nlohmann::json& j, Tolerances& t) {
    if (!j.is_object()) throw Error(ErrorKind::Config, "tolerances must be an object");
    for (const auto& [key, val] : j.items()) {
        bool found = false;
        for (const auto& e : kTolTable) {
            if (e.name != key) continue;
            found = true;
            std::visit(
                [&](auto member) {
                    using T = std::remove_reference_t<decltype(t.*member)>;
                    if (!val.is_number()) throw Error(ErrorKind::Config, "tolerance '" + key + "' must be a number");
                    if constexpr (std::is_same_v<T, int>) {
                        if (!val.is_number_integer())
                            throw Error(ErrorKind::Config, "tolerance '" + key + "' must be an integer");
                    }
                    t.*member = val.get<T>();
                },
                e.member);
        }
        if (!found) throw Error(ErrorKind::Config, "unknown tolerance key '" + key + "'");
    }
}

TorusField default_mu() { return TorusField({{{1, 0}, 1.0, 0.0}, {{0, 1}, 0.5, 0.0}}); }

TorusField default_f() {
    // cos(x1 - 0.4) + 0.8 cos(x2 - 1.1) + 0.3 cos(2 x2) + coupling
    return TorusField({
        {{1, 0}, std::cos(0.4), std::sin(0.4)},
        {{0, 1}, 0.8 * std::cos(1.1), 0.8 * std::sin(1.1)},
        {{0, 2}, 0.3, 0.0},
        {{1, 1}, -0.5, -0.3},
    });
}

Problem default_problem() {
    Problem p;
    p.f = default_f();
    p.mu = default_mu();
    return p;
}

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::NearCriticalMu: return "NearCriticalMu";
        case ErrorKind::NewtonDivergence: return "NewtonDivergence";
        case ErrorKind::DegenerateCritical: return "DegenerateCritical";
        case ErrorKind::StepFailure: return "StepFailure";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::ContinuationStall: return "ContinuationStall";
        case ErrorKind::FoldDegenerate: return "FoldDegenerate";
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::NonRegularLambda: return "NonRegularLambda";
        case ErrorKind::TangentialConnection: return "TangentialConnection";
        case ErrorKind::AmbiguousDecay: return "AmbiguousDecay";
        case ErrorKind::GraphInconsistency: return "GraphInconsistency";
        case ErrorKind::TraceFailure: return "TraceFailure";
        case ErrorKind::BijectionMismatch: return "BijectionMismatch";
        case ErrorKind::NoExit: return "NoExit";
    }
    return "Unknown";
}

}  // namespace msw
