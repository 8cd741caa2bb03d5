#include "common.hpp"

#include "msw/complexes.hpp"
#include "msw/orbits.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace msw;

namespace {

struct Fixture {
    Problem problem = default_problem();
    std::vector<CritPointF> crits;
    Catalog catalog;
    Fixture() {
        crits = find_crit_F(problem);
        problem.eta_max = eta_bound(problem, crits);
        catalog = build_catalog(problem, crits);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

/// Straight-line approach to the origin along x1 with distance d(t).
template <class D, class Dd>
Trajectory synthetic(D d, Dd dd, double t0, double t1, int n) {
    Trajectory tr;
    for (int i = 0; i <= n; ++i) {
        const double t = t0 * std::pow(t1 / t0, double(i) / n);
        FlowNode node;
        node.t = t;
        node.y[0] = d(t);
        node.dy[0] = dd(t);
        tr.nodes.push_back(node);
    }
    return tr;
}

}  // namespace

TEST_CASE("catalog of the default configuration") {
    const auto& fx = fixture();
    CHECK(fx.catalog.handle_slides.size() == 2);
    CHECK(fx.catalog.cusps.size() == 6);
    CHECK(fx.catalog.jumps.size() == 18);
    CHECK(fx.catalog.fold_jumps.size() == fx.catalog.manifold.folds.size());

    std::set<double> etas;
    for (const auto& h : fx.catalog.handle_slides) {
        CHECK(std::abs(h.slope) > 1e-8);
        etas.insert(h.eta);
    }
    CHECK(etas.size() == fx.catalog.handle_slides.size());
}

TEST_CASE("handle-slide scan is stable under doubling") {
    const auto& fx = fixture();
    CatalogOptions opts;
    opts.handle_slide_samples = 2 * fx.catalog.scan_samples;
    const auto fine = detect_handle_slides(fx.problem, fx.catalog.manifold, opts.handle_slide_samples);
    REQUIRE(fine.size() == fx.catalog.handle_slides.size());
    for (std::size_t i = 0; i < fine.size(); ++i)
        CHECK(fine[i].eta == doctest::Approx(fx.catalog.handle_slides[i].eta).epsilon(1e-5));
}

TEST_CASE("cusp orbits decay like 1/t") {
    for (const auto& c : fixture().catalog.cusps) {
        CHECK(c.decay_exponent >= 0.7);
        CHECK(c.decay_exponent <= 1.3);
    }
}

TEST_CASE("decay exponent separates power-law and exponential approach") {
    const auto power = synthetic([](double t) { return 1.0 / t; }, [](double t) { return -1.0 / (t * t); }, 10, 2000, 400);
    CHECK(decay_exponent(power, Vec2::Zero()) == doctest::Approx(1.0).epsilon(0.02));

    const auto expo = synthetic([](double t) { return std::exp(-t); }, [](double t) { return -std::exp(-t); }, 1, 10, 400);
    const double a = decay_exponent(expo, Vec2::Zero());
    CHECK((a < 0.7 || a > 1.3));
}

TEST_CASE("fast-slow orbits alternate and respect the case parity") {
    const auto& fx = fixture();
    const auto zero = build_complex_zero(fx.problem, fx.crits, fx.catalog);
    int total = 0;
    for (const auto& [pq, seqs] : zero.orbits)
        for (const auto& s : seqs) {
            CHECK(s.parity_ok());
            ++total;
        }
    CHECK(total > 0);
    CHECK(zero.complex.boundary_squared_zero());
}

TEST_CASE("no fast-slow orbit climbs in F") {
    const auto& fx = fixture();
    for (const auto& p : fx.crits)
        for (const auto& q : fx.crits) {
            if (p.index_F != q.index_F + 1) continue;
            if (p.F >= q.F) continue;
            CHECK(enumerate_fast_slow(fx.problem, p.id, q.id, fx.catalog).empty());
        }
}

TEST_CASE("hausdorff") {
    const std::vector<Vec3> a{{0, 0, 0}, {1, 0, 0}};
    const std::vector<Vec3> b{{0, 0, 0.5}, {1, 0, 0}};
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(hausdorff(a, b) == doctest::Approx(0.5));
    // x is periodic
    const std::vector<Vec3> c{{2 * testing::kPi, 0, 0}};
    const std::vector<Vec3> d{{0, 0, 0}};
    CHECK(hausdorff(c, d) == doctest::Approx(0.0).epsilon(1e-12));
}
