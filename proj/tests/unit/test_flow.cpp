#include "common.hpp"

#include "msw/critical.hpp"
#include "msw/flow.hpp"
#include "msw/orbits.hpp"

#include <doctest.h>

using namespace msw;

namespace {

struct Setup {
    Problem problem = default_problem();
    std::vector<CritPointF> crits;
    std::vector<Basin> basins;
    Setup() {
        crits = find_crit_F(problem);
        problem.eta_max = eta_bound(problem, crits);
        basins = crit_basins(problem, crits);
    }
};

bool F_monotone(const Problem& p, const Trajectory& t) {
    for (std::size_t i = 1; i < t.nodes.size(); ++i)
        if (p.F(t.point(i)) > p.F(t.point(i - 1)) + 1e-9) return false;
    return true;
}

}  // namespace

TEST_CASE("a critical point is stationary") {
    Setup s;
    const auto& c = s.crits.front();
    Budget b;
    b.max_time = 50;
    const auto t = integrate(s.problem, 1.0, c.point, b, s.basins);
    CHECK(t.terminal.kind == TerminalKind::ConvergedTo);
    CHECK(t.terminal.target == c.id);
    CHECK(std::abs(t.energy_spent) < 1e-12);
}

TEST_CASE("unstable sphere of an index-2 point escapes with F decreasing") {
    Setup s;
    for (const auto& c : s.crits) {
        if (c.index_F != 2) continue;
        const auto U = unstable_directions(s.problem, c, 1.0);
        REQUIRE(U.cols() == 2);
        for (double th : {0.3, 2.1, 4.4}) {
            const Vec3 y = Vec3(c.point.x[0], c.point.x[1], c.point.eta) + 1e-4 * (std::cos(th) * U.col(0) + std::sin(th) * U.col(1));
            const auto t = integrate(s.problem, 1.0, y, Budget{}, s.basins);
            CHECK(F_monotone(s.problem, t));
            CHECK(t.max_F_increase <= 1e-9);
            const bool escaped =
                t.terminal.kind == TerminalKind::EscapePlusEta || t.terminal.kind == TerminalKind::EscapeMinusEta;
            const bool converged = t.terminal.kind == TerminalKind::ConvergedTo;
            CHECK((escaped || converged));
            CHECK(energy_residual(t) <= 1e-4);
        }
    }
}

TEST_CASE("fast flow converges on the torus and satisfies the energy identity") {
    const auto p = default_problem();
    for (double eta : {-1.0, 0.4, 2.5}) {
        const auto rests = crit_points_f_eta(p, eta);
        const auto basins = planar_basins(p, rests, eta);
        for (const auto& r : rests) {
            if (r.index != 2) continue;
            const Vec2 start = r.x + 1e-4 * r.eigvecs.col(0);
            const auto t = fast_integrate(p, eta, start, Budget{}, basins);
            REQUIRE(t.terminal.kind == TerminalKind::ConvergedTo);
            const auto& end = rests[static_cast<std::size_t>(t.terminal.target)];
            CHECK(end.index < 2);
            CHECK(energy_residual(t) <= 1e-4);
            CHECK(t.F_start > t.F_end);
        }
    }
}

TEST_CASE("terminal classification") {
    Setup s;
    // start high above the critical set: mu < 0 under the attracting rest point pushes eta up
    Budget b;
    b.max_time = 1e4;
    const auto up = integrate(s.problem, 1.0, ExtendedPoint{Vec2(3.1, 3.1), s.problem.eta_max - 0.5}, b, s.basins);
    CHECK(up.terminal.kind == TerminalKind::EscapePlusEta);

    Budget tiny;
    tiny.max_time = 1e-3;
    const auto cut = integrate(s.problem, 1.0, ExtendedPoint{Vec2(1.0, 2.0), 0.3}, tiny, s.basins);
    CHECK(cut.terminal.kind == TerminalKind::Undetermined);
    CHECK(classify_terminal(s.problem, cut, s.basins, tiny).kind == TerminalKind::Undetermined);
}
