#include "msw/flow.hpp"

#include "msw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace msw {

const char* to_string(TerminalKind k) noexcept {
    switch (k) {
        case TerminalKind::ConvergedTo: return "ConvergedTo";
        case TerminalKind::EscapePlusEta: return "EscapePlusEta";
        case TerminalKind::EscapeMinusEta: return "EscapeMinusEta";
        case TerminalKind::Undetermined: return "Undetermined";
    }
    return "?";
}

std::vector<std::pair<double, ExtendedPoint>> Trajectory::samples() const {
    std::vector<std::pair<double, ExtendedPoint>> out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.emplace_back(n.t, ExtendedPoint::lifted(n.y.head<3>()));
    return out;
}

Vec3 Trajectory::end_point() const { return nodes.empty() ? Vec3::Zero() : Vec3(nodes.back().y.head<3>()); }

double basin_distance(const Vec3& y, const Basin& b) noexcept {
    const Vec2 d = torus_delta(Vec2(y[0], y[1]), Vec2(b.center[0], b.center[1]));
    const double de = y[2] - b.center[2];
    return std::sqrt(d.squaredNorm() + de * de);
}

std::vector<Basin> crit_basins(const Problem& problem, std::span<const CritPointF> crits) {
    std::vector<Basin> out;
    for (const auto& c : crits) {
        double m = INFINITY;
        for (double e : c.hessian_eigs) m = std::min(m, std::abs(e));
        out.push_back({c.id, Vec3(c.point.x[0], c.point.x[1], c.point.eta), problem.tol.basin_factor * m});
    }
    return out;
}

std::vector<Basin> planar_basins(const Problem& problem, std::span<const PlanarCrit> rests, double eta) {
    std::vector<Basin> out;
    int id = 0;
    for (const auto& r : rests) {
        out.push_back({id++, Vec3(r.x[0], r.x[1], eta), problem.tol.basin_factor * r.eigvals.cwiseAbs().minCoeff()});
    }
    return out;
}

ode::StepOptions step_options(const Tolerances& tol) {
    ode::StepOptions o;
    o.rtol = tol.rtol;
    o.atol = tol.atol;
    o.h_max = tol.max_step;
    return o;
}

FlowState flow_rhs(const Problem& problem, double lambda, double sign, const FlowState& s) {
    const Vec2 x(s[0], s[1]);
    const Vec2 g = problem.f.gradient(x) + s[2] * problem.mu.gradient(x);
    const double m = problem.mu.value(x);
    const double l2 = lambda * lambda;
    FlowState d;
    d << -sign * g[0], -sign * g[1], -sign * l2 * m, g.squaredNorm() + l2 * m * m;
    return d;
}

namespace {

struct Tracker {
    int basin = -1;
    double last = INFINITY;
    double first = INFINITY;
    int run = 0;
};

}  // namespace

Trajectory integrate(const Problem& problem, double lambda, const Vec3& start, const Budget& budget,
                     std::span<const Basin> basins, const FlowOptions& options, double start_energy, double t0) {
    const double sign = options.reverse ? -1.0 : 1.0;
    const auto rhs = [&](double, const FlowState& s) { return flow_rhs(problem, lambda, sign, s); };

    Trajectory traj;
    traj.lambda = lambda;
    FlowState y0;
    y0 << start[0], start[1], start[2], start_energy;
    traj.nodes.push_back({t0, y0, rhs(t0, y0)});
    traj.F_start = problem.F(start);
    traj.F_end = traj.F_start;

    const int K = problem.tol.converge_steps;
    const double eta_max = problem.eta_max;
    ode::DormandPrince<4> dp(step_options(problem.tol));
    Tracker tr;
    double F_prev = traj.F_start;

    const auto check = [&](const FlowNode& n) -> bool {
        const Vec3 p = n.y.head<3>();
        if (options.detect_escape && eta_max > 0.0 && std::abs(p[2]) > eta_max) {
            traj.terminal = {p[2] > 0 ? TerminalKind::EscapePlusEta : TerminalKind::EscapeMinusEta, -1};
            return true;
        }
        int inside = -1;
        double dist = INFINITY;
        for (const auto& b : basins) {
            const double d = basin_distance(p, b);
            if (d < b.radius && d < dist) {
                inside = b.id;
                dist = d;
            }
        }
        if (inside < 0) {
            traj.min_speed_outside = std::min(traj.min_speed_outside, std::sqrt(std::max(0.0, n.dy[3])));
            tr = {};
            return false;
        }
        if (!options.detect_convergence) return false;
        if (dist < 1e-10) {
            traj.terminal = {TerminalKind::ConvergedTo, inside};
            return true;
        }
        if (tr.basin != inside || !(dist < tr.last)) {
            tr = {inside, dist, dist, 0};
            return false;
        }
        tr.last = dist;
        if (++tr.run >= K && dist < 0.5 * tr.first) {
            traj.terminal = {TerminalKind::ConvergedTo, inside};
            return true;
        }
        return false;
    };

    if (check(traj.nodes.back())) return traj;

    long steps = 0;
    while (true) {
        const FlowNode& cur = traj.nodes.back();
        if (steps >= budget.max_steps || cur.t - t0 >= budget.max_time) {
            traj.terminal = {TerminalKind::Undetermined, -1};
            break;
        }
        FlowNode next;
        try {
            next = dp.advance(rhs, cur, 1.0, budget.max_time - (cur.t - t0));
        } catch (const Error&) {
            traj.step_failure = true;
            traj.terminal = {TerminalKind::Undetermined, -1};
            break;
        }
        ++steps;
        traj.nodes.push_back(next);
        const double F_now = problem.F(Vec3(next.y.head<3>()));
        const double inc = sign * (F_now - F_prev);
        traj.max_F_increase = std::max(traj.max_F_increase, inc);
        F_prev = F_now;
        if (check(traj.nodes.back())) break;
    }
    traj.F_end = problem.F(traj.end_point());
    traj.energy_spent = traj.nodes.back().y[3] - start_energy;
    return traj;
}

Trajectory integrate(const Problem& problem, double lambda, const ExtendedPoint& start, const Budget& budget,
                     std::span<const Basin> basins, const FlowOptions& options) {
    return integrate(problem, lambda, Vec3(start.x[0], start.x[1], start.eta), budget, basins, options);
}

Trajectory fast_integrate(const Problem& problem, double eta, const Vec2& x_start, const Budget& budget,
                          std::span<const Basin> basins, const FlowOptions& options) {
    FlowOptions o = options;
    o.detect_escape = false;
    return integrate(problem, 0.0, Vec3(x_start[0], x_start[1], eta), budget, basins, o);
}

Terminal classify_terminal(const Problem& problem, const Trajectory& traj, std::span<const Basin> basins,
                           const Budget& budget) {
    if (traj.nodes.empty()) return {};
    const int K = problem.tol.converge_steps;
    Tracker tr;
    for (const auto& n : traj.nodes) {
        const Vec3 p = n.y.head<3>();
        if (problem.eta_max > 0.0 && traj.lambda > 0.0 && std::abs(p[2]) > problem.eta_max)
            return {p[2] > 0 ? TerminalKind::EscapePlusEta : TerminalKind::EscapeMinusEta, -1};
        int inside = -1;
        double dist = INFINITY;
        for (const auto& b : basins) {
            const double d = basin_distance(p, b);
            if (d < b.radius && d < dist) {
                inside = b.id;
                dist = d;
            }
        }
        if (inside < 0) {
            tr = {};
            continue;
        }
        if (dist < 1e-10) return {TerminalKind::ConvergedTo, inside};
        if (tr.basin != inside || !(dist < tr.last)) {
            tr = {inside, dist, dist, 0};
            continue;
        }
        tr.last = dist;
        if (++tr.run >= K && dist < 0.5 * tr.first) return {TerminalKind::ConvergedTo, inside};
    }
    (void)budget;
    return {TerminalKind::Undetermined, -1};
}

void write_csv(std::ostream& os, const Problem& problem, const Trajectory& traj) {
    const auto old = os.precision(12);
    os << "t,x1,x2,eta,F\n";
    for (const auto& n : traj.nodes) {
        const Vec3 p = n.y.head<3>();
        os << n.t << ',' << wrap_angle(p[0]) << ',' << wrap_angle(p[1]) << ',' << p[2] << ',' << problem.F(p) << '\n';
    }
    os.precision(old);
}

double energy_residual(const Trajectory& traj) {
    return std::abs(traj.energy_spent - std::abs(traj.F_start - traj.F_end));
}

Trajectory reversed(const Trajectory& traj) {
    Trajectory out = traj;
    std::reverse(out.nodes.begin(), out.nodes.end());
    const double t_end = traj.nodes.empty() ? 0.0 : traj.nodes.back().t;
    const double e_end = traj.nodes.empty() ? 0.0 : traj.nodes.back().y[3];
    for (auto& n : out.nodes) {
        n.t = t_end - n.t;
        n.y[3] = e_end - n.y[3];
        n.dy.head<3>() = -n.dy.head<3>();
    }
    // reversing a backward run gives a forward trajectory; terminal refers to the old end
    std::swap(out.F_start, out.F_end);
    return out;
}

}  // namespace msw
