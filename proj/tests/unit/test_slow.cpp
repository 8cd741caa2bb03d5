#include "common.hpp"

#include "msw/critical.hpp"
#include "msw/orbits.hpp"
#include "msw/slow.hpp"

#include <doctest.h>

#include <set>

using namespace msw;

namespace {

struct Traced {
    Problem problem = default_problem();
    std::vector<CritPointF> crits;
    SlowManifold m;
    explicit Traced(double step_scale = 1.0) {
        problem.tol.continuation_step *= step_scale;
        crits = find_crit_F(problem);
        m = trace_slow_manifold(problem, crits, eta_bound(problem, crits));
    }
};

const Traced& traced() {
    static const Traced t;
    return t;
}

}  // namespace

TEST_CASE("default slow manifold: arcs, folds and branch nodes") {
    const auto& t = traced();
    CHECK(t.m.branches.size() == 8);
    CHECK(t.m.folds.size() == 4);
    for (const auto& b : t.m.branches) {
        CHECK(b.monotone);
        int det_sign = 0;
        for (const auto& n : b.nodes) {
            const Vec2 x(n.y[0], n.y[1]);
            CHECK(t.problem.grad_f_eta(x, n.y[2]).norm() <= 1e-8);
            // skip the nodes sitting on the fold itself
            const double det = t.problem.hess_f_eta(x, n.y[2]).determinant();
            if (std::abs(det) < 1e-4) continue;
            const int s = det > 0 ? 1 : -1;
            if (det_sign == 0) det_sign = s;
            CHECK(s == det_sign);
        }
    }
}

TEST_CASE("fold index bookkeeping and normal form coefficients") {
    const auto& t = traced();
    for (const auto& f : t.m.folds) {
        const auto& up = t.m.branches.at(static_cast<std::size_t>(f.upper_arc));
        const auto& lo = t.m.branches.at(static_cast<std::size_t>(f.lower_arc));
        CHECK(up.fast_index == f.lower_index + 1);
        CHECK(lo.fast_index == f.lower_index);
        const auto fi = fast_index(t.problem, f.point.x, f.point.eta);
        CHECK(fi.eig_near_zero);
        CHECK(std::abs(f.c) > 1e-4);
        CHECK(std::abs(f.d) > 1e-4);
        // curvature of eta along the curve against the -d/c prediction
        const auto model = fold_local_model(t.problem, f.point);
        CHECK(std::abs(f.fitted_curvature - model.predicted_curvature) <= 0.05 * std::abs(model.predicted_curvature));
    }
}

TEST_CASE("fold count and coefficients are stable under step halving") {
    const auto& a = traced();
    const Traced b(0.5);
    REQUIRE(a.m.folds.size() == b.m.folds.size());
    for (std::size_t i = 0; i < a.m.folds.size(); ++i) {
        CHECK(std::abs(a.m.folds[i].point.eta - b.m.folds[i].point.eta) < 1e-8);
        CHECK(std::abs(a.m.folds[i].c - b.m.folds[i].c) <= 0.01 * std::abs(a.m.folds[i].c));
        CHECK(std::abs(a.m.folds[i].d - b.m.folds[i].d) <= 0.01 * std::abs(a.m.folds[i].d));
    }
}

TEST_CASE("synthetic fold z1' = -z2 + z1^2") {
    // f ~ -x1^3 / 3 and mu ~ x1 near the origin; x2 is a transverse hyperbolic direction
    Problem p;
    p.f = testing::field({{{1, 0}, 0.0, -2.0 / 3.0}, {{2, 0}, 0.0, 1.0 / 3.0}, testing::cos_term(0, 1, 1.0)});
    p.mu = testing::field({{{1, 0}, 0.0, 1.0}});
    const auto model = fold_local_model(p, ExtendedPoint{Vec2(0, 0), 0.0});
    CHECK(std::abs(std::abs(model.c) - 1.0) < 1e-3);
    CHECK(std::abs(std::abs(model.d) - 1.0) < 1e-3);
}

TEST_CASE("critical points on the slow manifold") {
    const auto& t = traced();
    std::set<int> seen;
    for (const auto& b : t.m.branches)
        for (const auto& mk : b.markers)
            if (mk.kind == MarkerKind::CritF) seen.insert(mk.ref);
    CHECK(seen.size() == t.crits.size());
    for (const auto& c : t.crits) {
        CHECK(slow_velocity(t.problem, c.point.x, c.point.eta).norm() < 1e-9);
        // hyperbolic equilibrium of the slow equation
        CHECK(std::abs(slow_slope(t.problem, c.point.x, c.point.eta)) > 1e-4);
    }
}

TEST_CASE("slow velocity changes sign only at critical points") {
    const auto& t = traced();
    for (const auto& b : t.m.branches) {
        int crossings = 0;
        for (std::size_t i = 1; i < b.nodes.size(); ++i) {
            const auto mu = [&](std::size_t k) { return t.problem.mu.value(Vec2(b.nodes[k].y[0], b.nodes[k].y[1])); };
            if (mu(i - 1) * mu(i) < 0) ++crossings;
        }
        int markers = 0;
        for (const auto& mk : b.markers)
            if (mk.kind == MarkerKind::CritF) ++markers;
        CHECK(crossings == markers);
    }
}

TEST_CASE("short orbits near a fold shrink with s") {
    const auto& t = traced();
    for (const auto& f : t.m.folds) {
        const auto a = short_orbit(t.problem, t.m, f, 1e-2);
        const auto b = short_orbit(t.problem, t.m, f, 1e-3);
        CHECK(a.trajectory.terminal.kind == TerminalKind::ConvergedTo);
        CHECK(b.trajectory.terminal.kind == TerminalKind::ConvergedTo);
        CHECK(b.trajectory.energy_spent < a.trajectory.energy_spent);
        double far = 0.0;
        for (std::size_t i = 0; i < b.trajectory.nodes.size(); ++i)
            far = std::max(far, torus_distance(Vec2(b.trajectory.point(i)[0], b.trajectory.point(i)[1]), f.point.x));
        CHECK(far < 0.05);
    }
}
