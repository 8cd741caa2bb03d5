#include "msw/foldtest.hpp"

#include "msw/errors.hpp"
#include "msw/ode.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace msw {

FoldRun fold_exit(double epsilon, double delta) {
    using Node = ode::Node<2>;
    const auto rhs = [epsilon](double, const Node::State& z) {
        return Node::State(-z[1] + z[0] * z[0], -epsilon);
    };
    ode::StepOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-13;
    opt.h_max = 1.0;
    ode::DormandPrince<2> dp(opt);
    Node cur{0.0, Node::State(-1.0, 1.0), Node::State::Zero()};
    cur.dy = rhs(0.0, cur.y);
    // without drift the start is an equilibrium; with drift z2 reaches 0 by t = 1/eps
    const double t_max = epsilon > 0 ? 10.0 / epsilon + 100.0 : 1e4;
    while (cur.t < t_max) {
        const Node next = dp.advance(rhs, cur);
        if (next.y[0] >= delta) {
            double lo = cur.t, hi = next.t;
            for (int k = 0; k < 100 && hi - lo > 1e-14 * (1 + hi); ++k) {
                const double mid = 0.5 * (lo + hi);
                if (ode::hermite(cur, next, mid)[0] < delta) lo = mid;
                else hi = mid;
            }
            const auto z = ode::hermite(cur, next, hi);
            return {epsilon, delta, std::abs(z[1]), hi};
        }
        if (!std::isfinite(next.y[0])) break;
        cur = next;
    }
    throw Error(ErrorKind::NoExit, "no exit through z1 = " + std::to_string(delta) + " for eps = " + std::to_string(epsilon));
}

FoldScaling fold_scaling(std::span<const double> epsilons, double delta) {
    FoldScaling s;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double e : epsilons) {
        s.runs.push_back(fold_exit(e, delta));
        const double x = std::log(e), y = std::log(s.runs.back().rho);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(s.runs.size());
    s.slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return s;
}

void to_json(nlohmann::json& j, const FoldRun& r) {
    j = {{"epsilon", r.epsilon}, {"delta", r.delta}, {"rho", r.rho}, {"exit_time", r.exit_time}};
}

void to_json(nlohmann::json& j, const FoldScaling& s) { j = {{"runs", s.runs}, {"slope", s.slope}}; }

void write_csv(std::ostream& os, const FoldScaling& s) {
    os << "epsilon,rho\n";
    os.precision(12);
    for (const auto& r : s.runs) os << r.epsilon << ',' << r.rho << '\n';
}

}  // namespace msw
