#include "msw/critical.hpp"

#include "msw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <tuple>

namespace msw {

const char* to_string(SlowType t) noexcept {
    switch (t) {
        case SlowType::Attractor: return "attractor";
        case SlowType::Repeller: return "repeller";
        case SlowType::Degenerate: return "degenerate";
    }
    return "?";
}

double CritPointF::residual(const Problem& problem) const {
    const Vec2 g = problem.grad_f_eta(point.x, point.eta);
    return std::max(g.norm(), std::abs(problem.mu.value(point.x)));
}

FastIndex fast_index(const Problem& problem, const Vec2& x, double eta) {
    const Eigen::SelfAdjointEigenSolver<Mat2> es(problem.hess_f_eta(x, eta), Eigen::EigenvaluesOnly);
    FastIndex out;
    const Vec2 ev = es.eigenvalues();
    out.index = static_cast<int>((ev.array() < 0.0).count());
    out.min_abs_eig = ev.cwiseAbs().minCoeff();
    out.eig_near_zero = out.min_abs_eig < problem.tol.degenerate_eig;
    return out;
}

double slow_slope(const Problem& problem, const Vec2& x, double eta) {
    const Mat2 h = problem.hess_f_eta(x, eta);
    const Vec2 gm = problem.mu.gradient(x);
    return gm.dot(h.fullPivLu().solve(gm));
}

std::optional<ExtendedPoint> newton_crit_F(const Problem& problem, const ExtendedPoint& start) {
    Vec3 y(start.x[0], start.x[1], start.eta);
    const double tol = problem.tol.newton_tol;
    for (int it = 0; it < 80; ++it) {
        const ExtendedPoint p = ExtendedPoint::lifted(y);
        const Vec2 g = problem.grad_f_eta(p.x, p.eta);
        const Vec3 r(g[0], g[1], problem.mu.value(p.x));
        if (r.cwiseAbs().maxCoeff() <= tol) return ExtendedPoint(p.x, p.eta);
        const Mat3 j = hess_F(problem, p);
        Vec3 dy = j.fullPivLu().solve(-r);
        if (!dy.allFinite()) return std::nullopt;
        const double n = dy.norm();
        if (n > 0.5) dy *= 0.5 / n;
        y += dy;
        if (std::abs(y[2]) > 1e6) return std::nullopt;
    }
    const ExtendedPoint p = ExtendedPoint::lifted(y);
    const Vec2 g = problem.grad_f_eta(p.x, p.eta);
    if (std::max(g.cwiseAbs().maxCoeff(), std::abs(problem.mu.value(p.x))) <= 10 * tol) return ExtendedPoint(p.x, p.eta);
    return std::nullopt;
}

CritPointF classify_crit(const Problem& problem, const ExtendedPoint& p) {
    CritPointF c;
    c.point = p;
    const Eigen::SelfAdjointEigenSolver<Mat3> es(hess_F(problem, p), Eigen::EigenvaluesOnly);
    const Vec3 ev = es.eigenvalues();
    for (int i = 0; i < 3; ++i) c.hessian_eigs[i] = ev[i];
    if (ev.cwiseAbs().minCoeff() < problem.tol.degenerate_eig)
        throw Error(ErrorKind::DegenerateCritical, "D^2 F has a near-zero eigenvalue");
    c.index_F = static_cast<int>((ev.array() < 0.0).count());
    const FastIndex fi = fast_index(problem, p.x, p.eta);
    c.fast_index = fi.index;
    if (fi.eig_near_zero) {
        c.slow_type = SlowType::Degenerate;
    } else {
        c.slow_type = slow_slope(problem, p.x, p.eta) > 0.0 ? SlowType::Repeller : SlowType::Attractor;
    }
    c.F = problem.F(p);
    return c;
}

std::vector<CritPointF> find_crit_F(const Problem& problem, int grid) {
    if (grid <= 0) grid = problem.tol.seed_grid;
    std::vector<ExtendedPoint> found;
    const double dx = kTwoPi / grid;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const Vec2 x((i + 0.5) * dx, (j + 0.5) * dx);
            const Vec2 gm = problem.mu.gradient(x);
            // seeds far from the zero level cannot reach it within a few damped steps
            if (std::abs(problem.mu.value(x)) > 1.5 * dx * std::max(gm.norm(), 0.2)) continue;
            if (gm.norm() < problem.tol.mu_grad_tol) continue;
            const auto sol = newton_crit_F(problem, ExtendedPoint(x, zeta(problem, x)));
            if (!sol) continue;
            const bool dup = std::any_of(found.begin(), found.end(), [&](const ExtendedPoint& q) {
                return distance(q, *sol) < problem.tol.dedupe_radius;
            });
            if (!dup) found.push_back(*sol);
        }
    }
    std::sort(found.begin(), found.end(), [](const ExtendedPoint& a, const ExtendedPoint& b) {
        return std::tie(a.eta, a.x[0], a.x[1]) < std::tie(b.eta, b.x[0], b.x[1]);
    });
    std::vector<CritPointF> out;
    out.reserve(found.size());
    for (const auto& p : found) {
        CritPointF c = classify_crit(problem, p);
        c.id = static_cast<int>(out.size());
        if (c.residual(problem) > 10 * problem.tol.newton_tol)
            throw Error(ErrorKind::NewtonDivergence, "critical point residual check failed");
        out.push_back(c);
    }
    return out;
}

namespace {

std::vector<PlanarCrit> planar_newton(const std::function<Vec2(const Vec2&)>& g,
                                      const std::function<Mat2(const Vec2&)>& h,
                                      const std::function<double(const Vec2&)>& v, int grid) {
    std::vector<PlanarCrit> out;
    const double dx = kTwoPi / grid;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            Vec2 x((i + 0.5) * dx, (j + 0.5) * dx);
            bool ok = false;
            for (int it = 0; it < 60; ++it) {
                const Vec2 r = g(x);
                if (r.cwiseAbs().maxCoeff() < 1e-13) {
                    ok = true;
                    break;
                }
                Vec2 step = h(x).fullPivLu().solve(-r);
                if (!step.allFinite()) break;
                const double n = step.norm();
                if (n > 0.3) step *= 0.3 / n;
                x += step;
            }
            if (!ok) continue;
            x = wrap(x);
            const bool dup = std::any_of(out.begin(), out.end(),
                                         [&](const PlanarCrit& c) { return torus_distance(c.x, x) < 1e-7; });
            if (dup) continue;
            PlanarCrit c;
            c.x = x;
            const Eigen::SelfAdjointEigenSolver<Mat2> es(h(x));
            c.eigvals = es.eigenvalues();
            c.eigvecs = es.eigenvectors();
            c.index = static_cast<int>((c.eigvals.array() < 0.0).count());
            c.value = v(x);
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const PlanarCrit& a, const PlanarCrit& b) { return std::tie(a.x[0], a.x[1]) < std::tie(b.x[0], b.x[1]); });
    return out;
}

}  // namespace

std::vector<PlanarCrit> crit_points_f_eta(const Problem& problem, double eta, int grid) {
    return planar_newton([&](const Vec2& x) { return problem.grad_f_eta(x, eta); },
                         [&](const Vec2& x) { return problem.hess_f_eta(x, eta); },
                         [&](const Vec2& x) { return problem.f_eta(x, eta); }, grid);
}

std::vector<PlanarCrit> crit_points(const TorusField& field, int grid) {
    return planar_newton([&](const Vec2& x) { return field.gradient(x); },
                         [&](const Vec2& x) { return field.hessian(x); },
                         [&](const Vec2& x) { return field.value(x); }, grid);
}

void to_json(nlohmann::json& j, const CritPointF& c) {
    j = {{"id", c.id},
         {"x", {c.point.x[0], c.point.x[1]}},
         {"eta", c.point.eta},
         {"F", c.F},
         {"index_F", c.index_F},
         {"fast_index", c.fast_index},
         {"slow_type", to_string(c.slow_type)},
         {"hessian_eigs", c.hessian_eigs}};
}

}  // namespace msw
