#pragma once

/**
 * @file ode.hpp
 * @brief Embedded Dormand-Prince 5(4) stepper with PI-free step control and
 *        cubic Hermite dense output between accepted steps.
 *
 * The stepper performs exactly one accepted step per call; event handling and
 * termination live with the callers, which know what a meaningful event is.
 */

#include "msw/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace msw::ode {

struct StepOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 1e-3;
    double h_max = 0.5;
    double h_min = 1e-14;
};

template <int N>
struct Node {
    using State = Eigen::Matrix<double, N, 1>;
    double t = 0.0;
    State y = State::Zero();
    State dy = State::Zero();
};

/// Cubic Hermite interpolation on [a.t, b.t].
template <int N>
typename Node<N>::State hermite(const Node<N>& a, const Node<N>& b, double t) {
    const double h = b.t - a.t;
    if (h == 0.0) return a.y;
    const double s = (t - a.t) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * a.y + h10 * h * a.dy + h01 * b.y + h11 * h * b.dy;
}

template <int N>
class DormandPrince {
public:
    using State = Eigen::Matrix<double, N, 1>;

    explicit DormandPrince(StepOptions opt = {}) : opt_(opt), h_(opt.h_init) {}

    [[nodiscard]] double step_size() const noexcept { return h_; }
    void set_step_size(double h) noexcept { h_ = std::clamp(h, opt_.h_min, opt_.h_max); }
    [[nodiscard]] const StepOptions& options() const noexcept { return opt_; }

    /**
     * Advance node `cur` by one accepted step of signed direction `dir`.
     * `h_cap` limits the step magnitude (used to land on a time limit).
     * Throws Error(StepFailure) when the controller drives h below h_min.
     */
    template <class Rhs>
    Node<N> advance(const Rhs& rhs, const Node<N>& cur, double dir = 1.0, double h_cap = INFINITY) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;

        for (;;) {
            const double hmag = std::min(h_, h_cap);
            const double h = dir * hmag;
            const State& y = cur.y;
            const State& k1 = cur.dy;
            const double t = cur.t;
            const State k2 = rhs(t + c2 * h, State(y + h * a21 * k1));
            const State k3 = rhs(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
            const State k4 = rhs(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
            const State k5 = rhs(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
            const State k6 = rhs(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
            const State y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const State k7 = rhs(t + h, y5);
            const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            double en = 0.0;
            for (int i = 0; i < y.size(); ++i) {
                const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
                en = std::max(en, std::abs(err[i]) / sc);
            }
            if (!std::isfinite(en)) en = 1e10;

            const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            if (en <= 1.0) {
                // keep the controller's own step when the cap shortened this one
                if (hmag >= h_) h_ = std::min(opt_.h_max, hmag * fac);
                else h_ = std::min(opt_.h_max, std::max(h_, hmag * fac));
                return Node<N>{t + h, y5, k7};
            }
            h_ = hmag * std::max(fac, 0.1);
            if (h_ < opt_.h_min) throw Error(ErrorKind::StepFailure, "step size underflow");
        }
    }

private:
    StepOptions opt_;
    double h_;
};

/// Locate the first index i with pred(nodes[i]) true and return it, or nodes.size().
template <int N, class Pred>
std::size_t first_node(const std::vector<Node<N>>& nodes, Pred&& pred) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (pred(nodes[i])) return i;
    return nodes.size();
}

/// Value of a dense trajectory at time t (clamped to its span).
template <int N>
typename Node<N>::State sample(const std::vector<Node<N>>& nodes, double t) {
    if (nodes.empty()) return typename Node<N>::State::Zero();
    if (t <= nodes.front().t) return nodes.front().y;
    if (t >= nodes.back().t) return nodes.back().y;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), t, [](double v, const Node<N>& n) { return v < n.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    return hermite(a, b, t);
}

}  // namespace msw::ode
