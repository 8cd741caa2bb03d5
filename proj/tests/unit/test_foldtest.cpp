#include "msw/errors.hpp"
#include "msw/foldtest.hpp"

#include <doctest.h>

#include <vector>

using namespace msw;

// Reference exits computed separately with scipy solve_ivp (DOP853, rtol 1e-12).
TEST_CASE("fold exit matches an independent integrator") {
    const std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5};
    const std::vector<double> rho01{0.0643064, 0.0164762, 0.00415392, 0.000988438};
    const std::vector<double> rho05{0.0906057, 0.0214366, 0.00483859, 0.00106528};
    for (std::size_t i = 0; i < eps.size(); ++i) {
        CHECK(fold_exit(eps[i], 0.1).rho == doctest::Approx(rho01[i]).epsilon(1e-4));
        CHECK(fold_exit(eps[i], 0.5).rho == doctest::Approx(rho05[i]).epsilon(1e-4));
    }
}

TEST_CASE("fold scaling") {
    const std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5};
    const auto s = fold_scaling(eps, 0.1);
    REQUIRE(s.runs.size() == eps.size());
    for (std::size_t i = 1; i < s.runs.size(); ++i) CHECK(s.runs[i].rho < s.runs[i - 1].rho);
    CHECK(s.slope == doctest::Approx(0.6038).epsilon(2e-3));
    // the -eps/delta correction shrinks with delta, pulling the fit toward 2/3
    CHECK(fold_scaling(eps, 0.5).slope > s.slope);
}

TEST_CASE("no exit without drift") {
    CHECK_THROWS_AS(fold_exit(0.0, 0.1), Error);
}
