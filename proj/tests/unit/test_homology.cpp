#include "common.hpp"

#include "msw/complexes.hpp"
#include "msw/errors.hpp"
#include "msw/homology.hpp"

#include <doctest.h>

using namespace msw;

namespace {

Z2Matrix from_rows(const std::vector<std::vector<int>>& rows) {
    Z2Matrix m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m.set(static_cast<int>(r), static_cast<int>(c), rows[r][c] != 0);
    return m;
}

}  // namespace

TEST_CASE("z2_reduce") {
    const auto zero = z2_reduce(Z2Matrix(3, 3));
    CHECK(zero.rank == 0);
    CHECK(zero.kernel.size() == 3);

    Z2Matrix id(4, 4);
    for (int i = 0; i < 4; ++i) id.set(i, i, true);
    const auto full = z2_reduce(id);
    CHECK(full.rank == 4);
    CHECK(full.kernel.empty());

    CHECK(z2_reduce(from_rows({{1, 1}, {1, 1}})).rank == 1);

    // kernel vectors really are in the kernel
    const auto m = from_rows({{1, 0, 1, 1}, {0, 1, 1, 0}, {1, 1, 0, 1}});
    const auto red = z2_reduce(m);
    CHECK(red.rank == 2);
    REQUIRE(red.kernel.size() == 2);
    for (const auto& v : red.kernel)
        for (int r = 0; r < m.rows(); ++r) {
            int s = 0;
            for (int c = 0; c < m.cols(); ++c) s ^= (m.get(r, c) ? 1 : 0) & v[static_cast<std::size_t>(c)];
            CHECK(s == 0);
        }
}

TEST_CASE("circle complex: one max, one min") {
    const auto c = make_complex({{0, {0}}, {1, {1}}}, [](int, int) { return false; }, Provenance::Restricted);
    CHECK(c.boundary_squared_zero());
    const auto b = c.betti();
    CHECK(b.at(0) == 1);
    CHECK(b.at(1) == 1);
}

TEST_CASE("level set topology") {
    const auto p = default_problem();
    const auto top = level_set_topology(p);
    CHECK(top.components == 2);
    CHECK(level_set_topology(p, 2 * p.tol.level_grid).components == 2);
    // cos x1 = -0.5 cos x2 has two roots x1 for every x2: two vertical circles of length >= 2 pi
    for (double len : top.lengths) CHECK(len >= 2 * testing::kPi - 1e-6);

    Problem none = p;
    none.mu = testing::field({{{0, 0}, 2.0, 0.0}, testing::cos_term(1, 0, 1.0)});
    CHECK(level_set_topology(none).components == 0);
}

TEST_CASE("restricted complex of the default configuration") {
    const auto p = default_problem();
    const auto [rc, geo] = build_restricted_complex(p);
    CHECK(rc.boundary_squared_zero());
    const auto b = rc.betti();
    CHECK(b.at(0) == 2);
    CHECK(b.at(1) == 2);
    const auto crits = find_crit_F(p);
    const auto bij = projection_bijection(crits, geo);
    CHECK(bij.size() == crits.size());
}

TEST_CASE("compare_shifted") {
    const auto c = make_complex({{1, {0, 1}}, {2, {2}}}, [](int p, int q) { return p == 2 && q == 1; }, Provenance::Lambda);
    const std::map<int, int> id{{0, 0}, {1, 1}, {2, 2}};
    const auto same = compare_shifted(c, c, id, 0);
    CHECK(same.generators_match);
    CHECK(same.boundary_equal);

    const auto d = make_complex({{1, {0, 1}}, {2, {2}}}, [](int p, int q) { return p == 2 && q == 0; }, Provenance::Lambda);
    const auto diff = compare_shifted(c, d, id, 0);
    CHECK_FALSE(diff.boundary_equal);
    CHECK_FALSE(diff.mismatches.empty());

    const auto small = make_complex({{1, {0}}}, [](int, int) { return false; }, Provenance::Lambda);
    CHECK_THROWS_AS(compare_shifted(c, small, id, 0), Error);
}

TEST_CASE("complex without critical points is trivial") {
    Problem p = testing::symmetric_problem();
    p.mu = testing::field({{{0, 0}, 2.0, 0.0}, testing::cos_term(1, 0, 1.0)});
    const auto crits = find_crit_F(p);
    const auto lc = build_complex_lambda(p, crits, 1.0);
    CHECK(lc.regular);
    for (const auto& [k, b] : lc.complex.betti()) CHECK(b == 0);
}

TEST_CASE("lambda = 1 complex of the default configuration") {
    const auto p = default_problem();
    const auto crits = find_crit_F(p);
    const auto lc = build_complex_lambda(p, crits, 1.0);
    REQUIRE(lc.regular);
    CHECK(lc.complex.boundary_squared_zero());
    const auto b = lc.complex.betti();
    CHECK(b.at(1) == 2);
    CHECK(b.at(2) == 2);
    CHECK(lc.max_energy_residual <= 1e-4);
}
