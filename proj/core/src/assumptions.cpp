#include "msw/assumptions.hpp"

#include "msw/homology.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace msw {

const char* to_string(CheckStatus s) noexcept {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Unverifiable: return "unverifiable";
    }
    return "?";
}

bool AssumptionReport::ok() const {
    return std::none_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Fail; });
}

const AssumptionCheck* AssumptionReport::find(const std::string& id) const {
    for (const auto& c : checks)
        if (c.id == id) return &c;
    return nullptr;
}

namespace {

AssumptionCheck above(std::string id, double margin, double threshold, std::string note) {
    AssumptionCheck c;
    c.id = std::move(id);
    c.margin = margin;
    c.threshold = threshold;
    c.status = margin > threshold ? CheckStatus::Pass : CheckStatus::Fail;
    c.note = std::move(note);
    return c;
}

}  // namespace

AssumptionReport check_assumptions(const Problem& problem, std::span<const CritPointF> crits, const Catalog* catalog) {
    AssumptionReport r;
    const auto& tol = problem.tol;

    // A2: f and mu Morse
    const auto cf = crit_points(problem.f, tol.seed_grid);
    const auto cm = crit_points(problem.mu, tol.seed_grid);
    double eig = INFINITY;
    for (const auto& c : cf) eig = std::min(eig, c.eigvals.cwiseAbs().minCoeff());
    for (const auto& c : cm) eig = std::min(eig, c.eigvals.cwiseAbs().minCoeff());
    r.checks.push_back(above("A2", eig, tol.degenerate_eig, "min |eig Hess| over Crit(f) and Crit(mu)"));

    // A3: 0 regular value of mu, f restricted to mu^{-1}(0) Morse
    double gmin = INFINITY, second = INFINITY;
    try {
        const auto geo = trace_level_set(problem);
        for (const auto& comp : geo.components)
            for (const auto& x : comp.polyline) gmin = std::min(gmin, problem.mu.gradient(x).norm());
        for (const auto& c : geo.all_crits()) {
            const Vec2 g = problem.mu.gradient(c.x);
            const Vec2 t = Vec2(-g[1], g[0]).normalized();
            const double z = zeta(problem, c.x);
            second = std::min(second, std::abs(t.dot((problem.f.hessian(c.x) + z * problem.mu.hessian(c.x)) * t)));
        }
    } catch (const Error&) {
        gmin = 0.0;
    }
    r.checks.push_back(above("A3", std::min(gmin, second), tol.mu_grad_tol,
                             "min of |grad mu| on mu^{-1}(0) and |f''| at restricted critical points"));

    // A6: Crit(f) and Crit(mu) disjoint
    double sep = INFINITY;
    for (const auto& a : cf)
        for (const auto& b : cm) sep = std::min(sep, torus_distance(a.x, b.x));
    r.checks.push_back(above("A6", sep, tol.assumption_margin, "min distance between Crit(f) and Crit(mu)"));

    Catalog built;
    if (!catalog) {
        try {
            built = build_catalog(problem, crits);
            catalog = &built;
        } catch (const Error& e) {
            for (const char* id : {"A7", "A8", "A9"}) {
                auto c = above(id, 0.0, tol.assumption_margin, "");
                c.note = std::string("slow manifold unavailable: ") + e.what();
                r.checks.push_back(c);
            }
        }
    }
    if (catalog) {
        const auto& m = catalog->manifold;

        // A7: [Hess f_eta | grad mu] has rank 2 along C_F
        double sv = INFINITY;
        for (const auto& b : m.branches)
            for (const auto& n : b.nodes) {
                const Vec2 x(n.y[0], n.y[1]);
                Eigen::Matrix<double, 2, 3> J;
                J.leftCols<2>() = problem.hess_f_eta(x, n.y[2]);
                J.col(2) = problem.mu.gradient(x);
                sv = std::min(sv, Eigen::JacobiSVD<Eigen::Matrix<double, 2, 3>>(J).singularValues()[1]);
            }
        r.checks.push_back(above("A7", sv, tol.assumption_margin, "min second singular value of [Hess f_eta | grad mu] on C_F"));

        // A8: d_C has simple zeros; one eigenvalue vanishes at each fold
        double slope = INFINITY, other = INFINITY;
        for (const auto& f : m.folds) {
            const double h = 1e-5;
            const Vec2& v = f.center_dir;
            const double dp = problem.hess_f_eta(f.point.x + h * v, f.point.eta).determinant();
            const double dm = problem.hess_f_eta(f.point.x - h * v, f.point.eta).determinant();
            slope = std::min(slope, std::abs(dp - dm) / (2 * h));
            const auto ev = Eigen::SelfAdjointEigenSolver<Mat2>(problem.hess_f_eta(f.point.x, f.point.eta)).eigenvalues();
            other = std::min(other, ev.cwiseAbs().maxCoeff());
        }
        auto a8 = above("A8", std::min(slope, other), tol.assumption_margin,
                        "min over folds of |d/ds d_C| and of the nonzero Hessian eigenvalue");
        a8.note += "; folds: " + std::to_string(m.folds.size());
        r.checks.push_back(a8);

        // A9: mu nonzero at folds
        double mu_f = INFINITY;
        for (const auto& f : m.folds) mu_f = std::min(mu_f, std::abs(problem.mu.value(f.point.x)));
        r.checks.push_back(above("A9", mu_f, tol.assumption_margin, "min |mu| at folds"));

    }

    // A12: special eta values distinct
    std::vector<double> etas;
    for (const auto& c : crits) etas.push_back(c.point.eta);
    if (catalog) {
        for (const auto& f : catalog->manifold.folds) etas.push_back(f.point.eta);
        for (const auto& h : catalog->handle_slides) etas.push_back(h.eta);
    }
    std::sort(etas.begin(), etas.end());
    double gap = INFINITY;
    for (std::size_t i = 1; i < etas.size(); ++i) gap = std::min(gap, etas[i] - etas[i - 1]);
    r.checks.push_back(above("A12", gap, tol.assumption_margin,
                             "min gap among eta of Crit(F), folds, handle-slides (" + std::to_string(etas.size()) +
                                 " values)"));

    for (const char* id : {"A4", "A5", "A10", "A11", "A13"}) {
        AssumptionCheck c;
        c.id = id;
        c.note = "monitored through transversality margins during orbit counting";
        r.checks.push_back(c);
    }
    std::sort(r.checks.begin(), r.checks.end(), [](const auto& a, const auto& b) {
        return std::stoi(a.id.substr(1)) < std::stoi(b.id.substr(1));
    });
    return r;
}

void to_json(nlohmann::json& j, const AssumptionCheck& c) {
    j = {{"id", c.id}, {"status", to_string(c.status)}, {"note", c.note}};
    if (c.status != CheckStatus::Unverifiable) {
        j["margin"] = c.margin;
        j["threshold"] = c.threshold;
    }
}

void to_json(nlohmann::json& j, const AssumptionReport& r) {
    j = {{"ok", r.ok()}, {"checks", r.checks}};
}

}  // namespace msw
