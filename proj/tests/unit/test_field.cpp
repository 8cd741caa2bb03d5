#include "common.hpp"

#include "msw/field.hpp"

#include <doctest.h>

#include <random>

using namespace msw;
using testing::cos_term;
using testing::kPi;

namespace {

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("eval on simple fields") {
    const auto c1 = testing::field({cos_term(1, 0, 1.0)});
    const auto mu = default_mu();
    CHECK(eval(c1, Vec2(0, 0)) == doctest::Approx(1.0));
    CHECK(eval(mu, Vec2(kPi, 0)) == doctest::Approx(-0.5));
    CHECK(eval(c1, Vec2(2 * kPi, 0)) == doctest::Approx(1.0));
}

TEST_CASE("fields are periodic") {
    const auto f = default_f();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 50; ++i) {
        const Vec2 x(u(rng), u(rng));
        CHECK(std::abs(f.value(x + Vec2(2 * kPi, 0)) - f.value(x)) < 1e-12);
        CHECK(std::abs(f.value(x + Vec2(0, 2 * kPi)) - f.value(x)) < 1e-12);
    }
}

TEST_CASE("analytic derivatives") {
    const auto c1 = testing::field({cos_term(1, 0, 1.0)});
    const Vec2 g = grad(c1, Vec2(kPi / 2, 0));
    CHECK(g[0] == doctest::Approx(-1.0));
    CHECK(g[1] == doctest::Approx(0.0));
    const Mat2 h = hess(default_mu(), Vec2(0, 0));
    CHECK(h(0, 0) == doctest::Approx(-1.0));
    CHECK(h(1, 1) == doctest::Approx(-0.5));
    CHECK(h(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("gradient and Hessian match central differences") {
    const auto f = default_f();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 2 * kPi);
    const double h = 1e-5;
    for (int i = 0; i < 100; ++i) {
        const Vec2 x(u(rng), u(rng));
        Vec2 fd;
        Mat2 hd;
        for (int k = 0; k < 2; ++k) {
            const Vec2 e = Vec2::Unit(k) * h;
            fd[k] = (f.value(x + e) - f.value(x - e)) / (2 * h);
            hd.col(k) = (f.gradient(x + e) - f.gradient(x - e)) / (2 * h);
        }
        CHECK(rel_err(f.gradient(x), fd) <= 1e-6);
        CHECK(rel_err(Eigen::Map<const Eigen::VectorXd>(f.hessian(x).data(), 4),
                      Eigen::Map<const Eigen::VectorXd>(hd.data(), 4)) <= 1e-6);
    }
}

TEST_CASE("grad_F is minus the metric gradient of F") {
    const auto p = default_problem();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 2 * kPi), ue(-2, 2);
    const double h = 1e-6;
    for (double lambda : {0.0, 0.3, 2.0}) {
        for (int i = 0; i < 20; ++i) {
            const Vec3 y(u(rng), u(rng), ue(rng));
            Vec3 fd;
            for (int k = 0; k < 3; ++k) {
                const Vec3 e = Vec3::Unit(k) * h;
                fd[k] = (p.F(Vec3(y + e)) - p.F(Vec3(y - e))) / (2 * h);
            }
            fd[2] *= lambda * lambda;
            CHECK(rel_err(grad_F(p, y, lambda), Vec3(-fd)) <= 1e-6);
        }
    }
    // lambda = 0 freezes eta
    CHECK(grad_F(p, Vec3(0.3, 1.2, 0.5), 0.0)[2] == 0.0);
}

TEST_CASE("grad_F vanishes at a critical point of F") {
    const auto p = testing::symmetric_problem();
    const ExtendedPoint c{Vec2(2 * kPi / 3, 0), 0.0};
    for (double lambda : {0.1, 1.0, 8.0}) CHECK(grad_F(p, c, lambda).norm() < 1e-12);
}

TEST_CASE("zeta") {
    auto p = testing::symmetric_problem();
    // grad f . grad mu = 0.5 sin^2 x2 vanishes on x2 = 0
    CHECK(zeta(p, Vec2(1.0, 0.0)) == doctest::Approx(0.0));
    Problem same = p;
    same.f = same.mu;
    CHECK(zeta(same, Vec2(0.7, 1.9)) == doctest::Approx(-1.0));
    const auto d = default_problem();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 2 * kPi);
    for (int i = 0; i < 50; ++i) {
        const Vec2 x(u(rng), u(rng));
        const Vec2 gm = d.mu.gradient(x);
        if (gm.norm() < 1e-3) continue;
        CHECK(std::abs(gm.dot(d.f.gradient(x) + zeta(d, x) * gm)) < 1e-10);
    }
}

TEST_CASE("tolerances json round trip and unknown keys") {
    Tolerances t;
    t.rtol = 3e-9;
    t.angle_samples = 80;
    nlohmann::json j;
    to_json(j, t);
    Tolerances u;
    update_from_json(j, u);
    CHECK(u.rtol == t.rtol);
    CHECK(u.angle_samples == 80);
    CHECK_THROWS(update_from_json(nlohmann::json{{"no_such_tolerance", 1}}, u));
    CHECK_THROWS(update_from_json(nlohmann::json{{"angle_samples", 1.5}}, u));
}
