#include "common.hpp"

#include "msw/assumptions.hpp"
#include "msw/critical.hpp"
#include "msw/errors.hpp"
#include "msw/homology.hpp"

#include <doctest.h>

using namespace msw;
using testing::kPi;

TEST_CASE("symmetric configuration has four critical points at eta = 0") {
    const auto p = testing::symmetric_problem();
    const auto crits = find_crit_F(p);
    REQUIRE(crits.size() == 4);
    int idx2 = 0, idx1 = 0;
    for (const auto& c : crits) {
        CHECK(std::abs(c.point.eta) < 1e-10);
        const double x2 = wrap_angle(c.point.x[1]);
        if (c.index_F == 2) {
            ++idx2;
            CHECK(std::abs(std::sin(x2)) < 1e-10);
            CHECK(std::cos(x2) > 0);
            CHECK(std::abs(std::cos(c.point.x[0]) + 0.5) < 1e-10);
        } else {
            ++idx1;
            CHECK(c.index_F == 1);
            CHECK(std::cos(x2) < 0);
            CHECK(std::abs(std::cos(c.point.x[0]) - 0.5) < 1e-10);
        }
    }
    CHECK(idx2 == 2);
    CHECK(idx1 == 2);
}

TEST_CASE("fast index on the symmetric configuration") {
    const auto p = testing::symmetric_problem();
    // Hess f_0 = diag(0, -cos x2): one eigenvalue vanishes at both points
    const auto a = fast_index(p, Vec2(2 * kPi / 3, 0), 0.0);
    CHECK(a.eig_near_zero);
    CHECK(a.index == 1);
    const auto b = fast_index(p, Vec2(kPi / 3, kPi), 0.0);
    CHECK(b.eig_near_zero);
    CHECK(b.index == 0);
    // away from eta = 0 the mu term resolves the zero eigenvalue
    CHECK(fast_index(p, Vec2(2 * kPi / 3, 0), -0.5).index == 2);
    CHECK(fast_index(p, Vec2(kPi / 3, kPi), 0.5).index == 1);
}

TEST_CASE("mu without zeros gives no critical points") {
    Problem p = testing::symmetric_problem();
    p.mu = testing::field({{{0, 0}, 2.0, 0.0}, testing::cos_term(1, 0, 1.0)});
    CHECK(find_crit_F(p).empty());
}

TEST_CASE("default configuration: defining system, nondegeneracy, index relations") {
    const auto p = default_problem();
    const auto crits = find_crit_F(p);
    REQUIRE(crits.size() == 6);
    const auto [rc, geo] = build_restricted_complex(p);
    const auto bij = projection_bijection(crits, geo);
    const auto restricted = geo.all_crits();
    REQUIRE(bij.size() == crits.size());
    for (const auto& c : crits) {
        CHECK(c.residual(p) <= p.tol.newton_tol * 10);
        for (double e : c.hessian_eigs) CHECK(std::abs(e) > p.tol.degenerate_eig);
        // Morse index on T^2 x R is the restricted index plus one
        CHECK(c.index_F == restricted[static_cast<std::size_t>(bij.at(c.id))].index + 1);
        // repellers of the slow equation gain one from the eta direction
        if (c.slow_type == SlowType::Repeller) CHECK(c.index_F == c.fast_index + 1);
        else CHECK(c.index_F == c.fast_index);
    }
}

TEST_CASE("assumption checker") {
    const auto p = default_problem();
    const auto crits = find_crit_F(p);
    const auto rep = check_assumptions(p, crits);
    CHECK(rep.ok());
    for (const char* id : {"A2", "A3", "A6", "A7", "A8", "A9", "A12"}) {
        const auto* c = rep.find(id);
        REQUIRE(c);
        CHECK(c->status == CheckStatus::Pass);
    }

    // every eta of the symmetric configuration is 0
    const auto s = testing::symmetric_problem();
    const auto srep = check_assumptions(s, find_crit_F(s));
    REQUIRE(srep.find("A12"));
    CHECK(srep.find("A12")->status == CheckStatus::Fail);
    CHECK_FALSE(srep.ok());

    // f = mu shares every critical point with mu
    Problem same = p;
    same.f = same.mu;
    const auto frep = check_assumptions(same, {});
    REQUIRE(frep.find("A6"));
    CHECK(frep.find("A6")->status == CheckStatus::Fail);
}
