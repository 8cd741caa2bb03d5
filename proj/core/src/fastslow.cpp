#include "msw/orbits.hpp"

#include "msw/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <tuple>

namespace msw {

const char* to_string(CuspDirection d) noexcept { return d == CuspDirection::IntoFold ? "into_fold" : "out_of_fold"; }

const char* to_string(FastKind k) noexcept {
    switch (k) {
        case FastKind::HandleSlide: return "handle_slide";
        case FastKind::Cusp: return "cusp";
        case FastKind::InitialJump: return "initial_jump";
        case FastKind::FinalJump: return "final_jump";
        case FastKind::FoldJump: return "fold_jump";
    }
    return "?";
}

namespace {

constexpr double kSeparatrixOffset = 1e-7;

struct Rest {
    ArcPoint at;
    Vec2 lifted = Vec2::Zero();  ///< continuous along the arc
    int index = 0;
    Vec2 eigvals = Vec2::Zero();
    Mat2 eigvecs = Mat2::Identity();
};

Rest make_rest(const Problem& problem, const ArcPoint& a, int index) {
    Rest r;
    r.at = a;
    r.index = index;
    const Eigen::SelfAdjointEigenSolver<Mat2> es(problem.hess_f_eta(a.x, a.eta));
    r.eigvals = es.eigenvalues();
    r.eigvecs = es.eigenvectors();
    // fixed orientation so separatrix labels stay put as eta moves
    const Vec2 ref(std::cos(0.3), std::sin(0.3));
    for (int k = 0; k < 2; ++k)
        if (r.eigvecs.col(k).dot(ref) < 0) r.eigvecs.col(k) *= -1.0;
    return r;
}

std::vector<Rest> rests_at(const Problem& problem, const SlowManifold& m, double eta) {
    std::vector<Rest> out;
    for (const auto& b : m.branches) {
        if (!b.contains_eta(eta)) continue;
        const auto x = branch_point_at(problem, b, eta);
        if (!x) continue;
        out.push_back(make_rest(problem, {b.id, eta, wrap(*x)}, b.fast_index));
        out.back().lifted = *x;
    }
    return out;
}

std::vector<Basin> basins_of(const Problem& problem, const std::vector<Rest>& rests) {
    std::vector<Basin> out;
    for (std::size_t i = 0; i < rests.size(); ++i) {
        const double r = problem.tol.basin_factor * rests[i].eigvals.cwiseAbs().minCoeff();
        out.push_back({static_cast<int>(i), Vec3(rests[i].at.x[0], rests[i].at.x[1], rests[i].at.eta), r});
    }
    return out;
}

Budget fast_budget() {
    Budget b;
    b.max_time = 1e4;
    b.max_steps = 400'000;
    return b;
}

double planar_distance(const Vec3& y, const Vec2& x) { return torus_distance(Vec2(y[0], y[1]), x); }

// Index of the closest approach of a trajectory to x (planar, torus-aware).
std::size_t closest_node(const Trajectory& t, const Vec2& x) {
    std::size_t best = 0;
    double d = INFINITY;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const double di = planar_distance(t.point(i), x);
        if (di < d) {
            d = di;
            best = i;
        }
    }
    return best;
}

Trajectory truncated(const Trajectory& t, std::size_t last) {
    Trajectory out = t;
    out.nodes.resize(std::min(last + 1, t.nodes.size()));
    return out;
}

void finish_witness(const Problem& problem, Trajectory& t) {
    if (t.nodes.empty()) return;
    t.F_start = problem.F(t.point(0));
    t.F_end = problem.F(t.end_point());
    t.energy_spent = t.nodes.back().y[3] - t.nodes.front().y[3];
}

// ----------------------------------------------------------- handle slides

std::vector<double> ball_radii(const std::vector<Rest>& rests, double cap) {
    std::vector<double> rho(rests.size(), cap);
    for (std::size_t i = 0; i < rests.size(); ++i)
        for (std::size_t j = 0; j < rests.size(); ++j)
            if (i != j) rho[i] = std::min(rho[i], 0.3 * torus_distance(rests[i].at.x, rests[j].at.x));
    return rho;
}

int find_arc(const std::vector<Rest>& rests, int arc) {
    for (std::size_t i = 0; i < rests.size(); ++i)
        if (rests[i].at.arc == arc) return static_cast<int>(i);
    return -1;
}

std::array<int, 2> lift_of(const Vec3& y, const Vec2& base) {
    return {static_cast<int>(std::lround((y[0] - base[0]) / kTwoPi)),
            static_cast<int>(std::lround((y[1] - base[1]) / kTwoPi))};
}

struct FastVisit {
    int arc = -1;
    int sign = 0;  ///< exit side along u_b; 0 = ended inside
    std::array<int, 2> lift{0, 0};
    double min_dist = INFINITY;
    bool operator==(const FastVisit& o) const { return arc == o.arc && sign == o.sign && lift == o.lift; }
};

struct Itinerary {
    std::vector<FastVisit> visits;
    int terminal = -1;
    std::array<int, 2> lift{0, 0};
    Trajectory traj;
    bool operator==(const Itinerary& o) const {
        return visits == o.visits && terminal == o.terminal && lift == o.lift;
    }
};

// Unstable separatrix of the saddle on arc a_arc, recorded as the saddles it
// passes (with exit side and sheet) and where it settles.
std::optional<Itinerary> separatrix_itinerary(const Problem& problem, const SlowManifold& m, double eta, int a_arc,
                                              int sigma) {
    const auto rests = rests_at(problem, m, eta);
    const int a = find_arc(rests, a_arc);
    if (a < 0 || rests[static_cast<std::size_t>(a)].eigvals.cwiseAbs().minCoeff() < 1e-3) return std::nullopt;
    const Rest& A = rests[static_cast<std::size_t>(a)];
    const auto rho = ball_radii(rests, 0.25);
    Itinerary it;
    auto sinks = basins_of(problem, rests);
    std::erase_if(sinks, [&](const Basin& b) { return rests[static_cast<std::size_t>(b.id)].index != 0; });
    it.traj = fast_integrate(problem, eta, A.lifted + sigma * kSeparatrixOffset * Vec2(A.eigvecs.col(0)),
                             fast_budget(), sinks);
    const auto& t = it.traj;
    std::vector<int> open(rests.size(), -1);
    for (std::size_t j = 0; j < rests.size(); ++j)
        if (planar_distance(t.point(0), rests[j].at.x) < rho[j]) open[j] = -2;  // start ball, not a visit
    for (std::size_t i = 1; i < t.nodes.size(); ++i) {
        const Vec3 y = t.point(i);
        for (std::size_t j = 0; j < rests.size(); ++j) {
            if (rests[j].index != 1) continue;
            const double d = planar_distance(y, rests[j].at.x);
            const bool in = d < rho[j];
            if (open[j] == -2) {
                if (!in) open[j] = -1;
                continue;
            }
            if (in && open[j] < 0) {
                open[j] = static_cast<int>(it.visits.size());
                it.visits.push_back({rests[j].at.arc, 0, lift_of(y, rests[j].lifted), d});
            }
            if (open[j] >= 0) {
                auto& v = it.visits[static_cast<std::size_t>(open[j])];
                v.min_dist = std::min(v.min_dist, d);
                if (!in) {
                    const Vec2 delta = torus_delta(Vec2(y[0], y[1]), rests[j].at.x);
                    v.sign = delta.dot(rests[j].eigvecs.col(0)) >= 0 ? 1 : -1;
                    open[j] = -1;
                }
            }
        }
    }
    const Vec3 end = t.end_point();
    std::size_t best = 0;
    for (std::size_t j = 1; j < rests.size(); ++j)
        if (planar_distance(end, rests[j].at.x) < planar_distance(end, rests[best].at.x)) best = j;
    it.terminal = rests[best].at.arc;
    it.lift = lift_of(end, rests[best].lifted);
    return it;
}

// Stable separatrix of rest b on side tau, leaving the ball of radius rho backward.
// Returns the exit point relative to b and the normal of the curve there.
std::pair<Vec2, Vec2> stable_exit(const Problem& problem, const Rest& b, int tau, double rho) {
    const Vec2 w = b.eigvecs.col(1);
    const Vec2 start = b.at.x + tau * kSeparatrixOffset * w;
    const auto rhs = [&](double, const FlowState& s) { return flow_rhs(problem, 0.0, -1.0, s); };
    ode::DormandPrince<4> dp(step_options(problem.tol));
    FlowState y0;
    y0 << start[0], start[1], b.at.eta, 0.0;
    FlowNode cur{0.0, y0, rhs(0.0, y0)};
    for (int i = 0; i < 100000; ++i) {
        FlowNode next = dp.advance(rhs, cur, 1.0);
        if (torus_distance(Vec2(next.y[0], next.y[1]), b.at.x) >= rho) {
            double lo = cur.t, hi = next.t;
            for (int k = 0; k < 60; ++k) {
                const double mid = 0.5 * (lo + hi);
                const auto y = ode::hermite(cur, next, mid);
                if (torus_distance(Vec2(y[0], y[1]), b.at.x) < rho) lo = mid;
                else hi = mid;
            }
            const auto y = ode::hermite(cur, next, hi);
            const Vec2 P = torus_delta(Vec2(y[0], y[1]), b.at.x);
            const Vec2 T = -problem.grad_f_eta(Vec2(y[0], y[1]), b.at.eta);
            Vec2 n(-T[1], T[0]);
            n.normalize();
            if (n.dot(b.eigvecs.col(0)) < 0) n = -n;
            return {P, n};
        }
        cur = next;
    }
    throw Error(ErrorKind::NotFound, "stable separatrix did not leave its ball");
}

// Signed offset of W^u(a, sigma) from W^s(b) where it first enters the ball
// of radius rho around b; nullopt if it never enters.
std::optional<double> local_splitting(const Problem& problem, const SlowManifold& m, double eta, int a_arc, int sigma,
                                      int b_arc, double rho) {
    const auto rests = rests_at(problem, m, eta);
    const int a = find_arc(rests, a_arc), b = find_arc(rests, b_arc);
    if (a < 0 || b < 0) return std::nullopt;
    const Rest& A = rests[static_cast<std::size_t>(a)];
    const Rest& B = rests[static_cast<std::size_t>(b)];
    const Trajectory t = fast_integrate(problem, eta, A.at.x + sigma * kSeparatrixOffset * Vec2(A.eigvecs.col(0)),
                                        fast_budget(), basins_of(problem, rests));
    bool inside = planar_distance(t.point(0), B.at.x) < rho;
    for (std::size_t i = 1; i < t.nodes.size(); ++i) {
        const bool in = planar_distance(t.point(i), B.at.x) < rho;
        if (in && !inside) {
            const auto& n0 = t.nodes[i - 1];
            const auto& n1 = t.nodes[i];
            double lo = n0.t, hi = n1.t;
            for (int k = 0; k < 60; ++k) {
                const double mid = 0.5 * (lo + hi);
                const auto ym = ode::hermite(n0, n1, mid);
                if (torus_distance(Vec2(ym[0], ym[1]), B.at.x) < rho) hi = mid;
                else lo = mid;
            }
            const auto ym = ode::hermite(n0, n1, hi);
            const Vec2 Q = torus_delta(Vec2(ym[0], ym[1]), B.at.x);
            const int tau = Q.dot(B.eigvecs.col(1)) >= 0 ? 1 : -1;
            const auto [P, n] = stable_exit(problem, B, tau, rho);
            return (Q - P).dot(n);
        }
        inside = in;
    }
    return std::nullopt;
}

struct Change {
    double eta;
    Itinerary left, right;
};

// Bisect every itinerary change inside [lo, hi] down to `tol`.
void locate_changes(const Problem& problem, const SlowManifold& m, int a_arc, int sigma, double lo,
                    const Itinerary& L, double hi, const Itinerary& R, double tol, std::vector<Change>& out) {
    if (hi - lo <= tol) {
        out.push_back({0.5 * (lo + hi), L, R});
        return;
    }
    const double mid = 0.5 * (lo + hi);
    const auto M = separatrix_itinerary(problem, m, mid, a_arc, sigma);
    if (!M) return;
    if (!(*M == L)) locate_changes(problem, m, a_arc, sigma, lo, L, mid, *M, tol, out);
    if (!(*M == R)) locate_changes(problem, m, a_arc, sigma, mid, *M, hi, R, tol, out);
}

// A change is a saddle connection when both sides pass the same saddle on
// opposite sides at a distance that shrinks with the bracket.
std::optional<int> connection_target(const Change& c, double approach) {
    const auto& a = c.left.visits;
    const auto& b = c.right.visits;
    std::size_t k = 0;
    while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
    if (k >= a.size() || k >= b.size()) return std::nullopt;
    if (a[k].arc != b[k].arc || a[k].lift != b[k].lift || a[k].sign == b[k].sign) return std::nullopt;
    if (std::max(a[k].min_dist, b[k].min_dist) > approach) return std::nullopt;
    return a[k].arc;
}

// ------------------------------------------------------------ fold landings

struct FoldRun {
    Trajectory traj;
    bool landed = false;
    double exponent = 0.0;
};

// Fast flow toward (or, with reverse, away from) a fold point, run until the
// distance falls below `stop` or the flow settles elsewhere.
FoldRun run_to_fold(const Problem& problem, const Vec2& start, double eta, const Vec2& fold_x,
                    const std::vector<Rest>& others, bool reverse, double stop = 2e-4) {
    FoldRun out;
    const double sign = reverse ? -1.0 : 1.0;
    const auto rhs = [&](double, const FlowState& s) { return flow_rhs(problem, 0.0, sign, s); };
    ode::DormandPrince<4> dp(step_options(problem.tol));
    FlowState y0;
    y0 << start[0], start[1], eta, 0.0;
    out.traj.nodes.push_back({0.0, y0, rhs(0.0, y0)});
    auto basins = basins_of(problem, others);
    const int sink_index = reverse ? 2 : 0;
    std::erase_if(basins, [&](const Basin& b) { return others[static_cast<std::size_t>(b.id)].index != sink_index; });
    for (long i = 0; i < 2'000'000; ++i) {
        const FlowNode next = dp.advance(rhs, out.traj.nodes.back(), 1.0);
        out.traj.nodes.push_back(next);
        const Vec3 y = next.y.head<3>();
        if (planar_distance(y, fold_x) < stop) {
            out.landed = true;
            break;
        }
        bool settled = false;
        for (const auto& b : basins)
            if (basin_distance(y, b) < 0.1 * b.radius) settled = true;
        if (settled || next.t > 1e6) break;
    }
    out.traj.terminal = {out.landed ? TerminalKind::ConvergedTo : TerminalKind::Undetermined, -1};
    if (out.landed) out.exponent = decay_exponent(out.traj, fold_x);
    return out;
}

double classify_decay(const Problem& problem, const Vec2& start, double eta, const Vec2& fold_x,
                      const std::vector<Rest>& others, bool reverse, FoldRun& run) {
    const double a = run.exponent;
    if (a >= 0.7 && a <= 1.3) return a;
    // retry further into the tail before declaring the fit inconclusive
    run = run_to_fold(problem, start, eta, fold_x, others, reverse, 2e-5);
    if (run.landed) {
        const double b = decay_exponent(run.traj, fold_x, 1e-4, 3e-3);
        if (b >= 0.7 && b <= 1.3) {
            run.exponent = b;
            return b;
        }
        throw Error(ErrorKind::AmbiguousDecay, "decay exponent " + std::to_string(b) + " at a fold landing");
    }
    return a;
}

// ------------------------------------------------------------ enumeration

enum class EventKind { StartP, InitialLanding, HandleSlideLanding, CuspLanding, FoldStart,
                       EndQ, FinalSource, HandleSlideSource, CuspSource, FoldEnd };

struct Event {
    EventKind kind;
    int arc = -1;
    double eta = 0.0;
    int ref = -1;  ///< catalog index (jump, slide, cusp) or fold id
};

bool is_landing(EventKind k) {
    return k == EventKind::StartP || k == EventKind::InitialLanding || k == EventKind::HandleSlideLanding ||
           k == EventKind::CuspLanding || k == EventKind::FoldStart;
}

}  // namespace

// ====================================================================== API

std::vector<ArcPoint> rest_points_at(const Problem& problem, const SlowManifold& m, double eta) {
    std::vector<ArcPoint> out;
    for (const auto& b : m.branches) {
        if (!b.contains_eta(eta)) continue;
        const auto x = branch_point_at(problem, b, eta);
        if (!x) continue;
        out.push_back({b.id, eta, wrap(*x)});
    }
    return out;
}

std::vector<HandleSlide> detect_handle_slides(const Problem& problem, const SlowManifold& m, int samples) {
    const double lo = -m.eta_cut + 1e-3, hi = m.eta_cut - 1e-3;
    std::vector<HandleSlide> out;
    for (const auto& arc : m.branches) {
        if (arc.fast_index != 1) continue;
        for (int sigma : {1, -1}) {
            // samples on the global grid, skipping the ends of the arc
            std::vector<std::pair<double, Itinerary>> row;
            for (int i = 0; i < samples; ++i) {
                const double eta = lo + (hi - lo) * i / (samples - 1);
                if (eta < arc.eta_lo + 1e-3 || eta > arc.eta_hi - 1e-3) continue;
                if (auto it = separatrix_itinerary(problem, m, eta, arc.id, sigma)) row.emplace_back(eta, std::move(*it));
            }
            std::vector<Change> changes;
            for (std::size_t i = 0; i + 1 < row.size(); ++i)
                if (!(row[i].second == row[i + 1].second))
                    locate_changes(problem, m, arc.id, sigma, row[i].first, row[i].second, row[i + 1].first,
                                   row[i + 1].second, problem.tol.eta_bisection_tol, changes);
            for (const auto& c : changes) {
                const auto target = connection_target(c, 1e-3);
                if (!target) continue;
                const double eta = c.eta;
                const auto& B = m.branches[static_cast<std::size_t>(*target)];
                const double h = 1e-7, rho = 0.02;
                const auto sp = local_splitting(problem, m, eta + h, arc.id, sigma, B.id, rho);
                const auto sm = local_splitting(problem, m, eta - h, arc.id, sigma, B.id, rho);
                const double slope = sp && sm ? (*sp - *sm) / (2 * h) : 0.0;
                if (std::abs(slope) < problem.tol.transversality_tol)
                    throw Error(ErrorKind::TangentialConnection,
                                "saddle connection with vanishing splitting rate at eta " + std::to_string(eta));

                HandleSlide hs;
                hs.eta = eta;
                hs.from_branch = sigma;
                hs.slope = slope;
                hs.from = {arc.id, eta, wrap(*branch_point_at(problem, arc, eta))};
                hs.to = {B.id, eta, wrap(*branch_point_at(problem, B, eta))};
                Trajectory t = c.left.traj;
                const std::size_t k = closest_node(t, hs.to.x);
                hs.approach = planar_distance(t.point(k), hs.to.x);
                hs.witness = truncated(t, k);
                finish_witness(problem, hs.witness);
                hs.witness.terminal = {TerminalKind::ConvergedTo, B.id};
                out.push_back(std::move(hs));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const HandleSlide& a, const HandleSlide& b) {
        return std::tie(a.eta, a.from.arc, a.to.arc, a.from_branch) < std::tie(b.eta, b.from.arc, b.to.arc, b.from_branch);
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    return out;
}

double decay_exponent(const Trajectory& traj, const Vec2& target, double lo, double hi) {
    // d' = -c d^m; m = 2 for the 1/t approach along a center direction
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& node : traj.nodes) {
        const Vec2 x(node.y[0], node.y[1]);
        const Vec2 delta = torus_delta(x, target);
        const double d = delta.norm();
        if (d < lo || d > hi) continue;
        const double dd = delta.dot(Vec2(node.dy[0], node.dy[1])) / d;
        if (!(dd < 0)) continue;
        const double X = std::log(d), Y = std::log(-dd);
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
        ++n;
    }
    if (n < 5) return INFINITY;
    const double m = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (m <= 1.0 + 1e-6) return INFINITY;
    return 1.0 / (m - 1.0);
}

std::pair<std::vector<CuspOrbit>, FoldJump> detect_cusp_orbits(const Problem& problem, const SlowManifold& m,
                                                               const FoldPoint& fold) {
    const double eta = fold.point.eta;
    const Vec2 xf = fold.point.x;
    std::vector<Rest> others;
    for (const auto& r : rests_at(problem, m, eta))
        if (torus_distance(r.at.x, xf) > 1e-6) others.push_back(r);

    std::vector<CuspOrbit> cusps;
    for (const auto& r : others) {
        if (r.index != 1 || r.at.arc == fold.upper_arc || r.at.arc == fold.lower_arc) continue;
        for (int sigma : {1, -1}) {
            CuspOrbit c;
            c.fold = fold.id;
            c.partner = r.at;
            Vec2 start;
            bool reverse = false;
            if (fold.lower_index == 0) {
                // saddle -> fold: unstable separatrix lands in the parabolic sector
                c.direction = CuspDirection::IntoFold;
                start = r.at.x + sigma * kSeparatrixOffset * Vec2(r.eigvecs.col(0));
            } else if (fold.lower_index == 1) {
                // fold -> saddle: stable separatrix traced backward to the fold
                c.direction = CuspDirection::OutOfFold;
                start = r.at.x + sigma * kSeparatrixOffset * Vec2(r.eigvecs.col(1));
                reverse = true;
            } else {
                continue;
            }
            FoldRun run = run_to_fold(problem, start, eta, xf, others, reverse);
            if (!run.landed) continue;
            c.decay_exponent = classify_decay(problem, start, eta, xf, others, reverse, run);
            c.witness = reverse ? reversed(run.traj) : run.traj;
            finish_witness(problem, c.witness);
            c.witness.terminal = {TerminalKind::ConvergedTo, -1};
            cusps.push_back(std::move(c));
        }
    }

    FoldJump jump;
    jump.fold = fold.id;
    const double side = fold.d >= 0 ? 1.0 : -1.0;
    const Vec2 start = xf + side * problem.tol.fold_offset * fold.center_dir;
    const auto basins = basins_of(problem, others);
    Trajectory t = fast_integrate(problem, eta, start, fast_budget(), basins);
    if (t.terminal.kind == TerminalKind::ConvergedTo) {
        const Rest& land = others[static_cast<std::size_t>(t.terminal.target)];
        jump.landing = land.at;
        jump.landing_index = land.index;
    }
    finish_witness(problem, t);
    jump.witness = std::move(t);
    return {std::move(cusps), std::move(jump)};
}

std::vector<Jump> detect_jumps(const Problem& problem, const SlowManifold& m, std::span<const CritPointF> crits) {
    std::vector<Jump> out;
    for (const auto& c : crits) {
        const double eta = c.point.eta;
        const bool attractor = c.slow_type == SlowType::Attractor;
        std::vector<Rest> rests;
        int self = -1;
        for (const auto& r : rests_at(problem, m, eta)) {
            if (torus_distance(r.at.x, c.point.x) < 1e-6) self = static_cast<int>(rests.size());
            rests.push_back(r);
        }
        if (self < 0) continue;
        const auto basins = basins_of(problem, rests);
        const int k = c.fast_index;
        // initial jumps leave an attractor into fast index k-1; final jumps
        // enter a repeller from fast index k+1
        const int partner_index = attractor ? k - 1 : k + 1;
        for (std::size_t j = 0; j < rests.size(); ++j) {
            if (static_cast<int>(j) == self || rests[j].index != partner_index) continue;
            if (rests[j].eigvals.cwiseAbs().minCoeff() < 1e-3) continue;
            for (int sigma : {1, -1}) {
                // a saddle partner uses its own separatrices; otherwise c's
                const bool partner_is_saddle = rests[j].index == 1;
                const Rest& s = partner_is_saddle ? rests[j] : rests[static_cast<std::size_t>(self)];
                if (!partner_is_saddle && s.index != 1) continue;
                // forward runs go downhill from the higher point
                const bool forward = attractor ? !partner_is_saddle : partner_is_saddle;
                const Vec2 dir = forward ? Vec2(s.eigvecs.col(0)) : Vec2(s.eigvecs.col(1));
                FlowOptions opt;
                opt.reverse = !forward;
                Trajectory t = fast_integrate(problem, eta, s.at.x + sigma * kSeparatrixOffset * dir, fast_budget(),
                                              basins, opt);
                const int goal = partner_is_saddle ? self : static_cast<int>(j);
                if (t.terminal != Terminal{TerminalKind::ConvergedTo, goal}) continue;
                Jump jp;
                jp.crit = c.id;
                jp.initial = attractor;
                jp.point = rests[j].at;
                jp.witness = forward ? std::move(t) : reversed(t);
                finish_witness(problem, jp.witness);
                out.push_back(std::move(jp));
            }
        }
    }
    return out;
}

Catalog build_catalog(const Problem& problem, std::span<const CritPointF> crits, const CatalogOptions& options) {
    Catalog cat;
    cat.crits.assign(crits.begin(), crits.end());
    double eta_cut = problem.eta_max;
    if (!(eta_cut > 0)) {
        for (const auto& c : crits) eta_cut = std::max(eta_cut, std::abs(c.point.eta));
        eta_cut += problem.tol.eta_margin;
    }
    cat.manifold = trace_slow_manifold(problem, crits, eta_cut);
    cat.scan_samples = options.handle_slide_samples > 0 ? options.handle_slide_samples : problem.tol.handle_slide_samples;
    cat.handle_slides = detect_handle_slides(problem, cat.manifold, cat.scan_samples);
    for (const auto& f : cat.manifold.folds) {
        auto [cusps, jump] = detect_cusp_orbits(problem, cat.manifold, f);
        for (auto& c : cusps) {
            c.id = static_cast<int>(cat.cusps.size());
            cat.cusps.push_back(std::move(c));
        }
        cat.fold_jumps.push_back(std::move(jump));
    }
    cat.jumps = detect_jumps(problem, cat.manifold, crits);

    // record every event on its arc
    auto mark = [&](int arc, MarkerKind kind, int ref, double eta) {
        cat.manifold.branches[static_cast<std::size_t>(arc)].markers.push_back({kind, ref, eta});
    };
    for (const auto& h : cat.handle_slides) {
        mark(h.from.arc, MarkerKind::HandleSlide, h.id, h.eta);
        mark(h.to.arc, MarkerKind::FastLanding, h.id, h.eta);
    }
    for (const auto& c : cat.cusps) mark(c.partner.arc, MarkerKind::CuspOrbit, c.id, c.partner.eta);
    for (std::size_t i = 0; i < cat.jumps.size(); ++i)
        mark(cat.jumps[i].point.arc, cat.jumps[i].initial ? MarkerKind::InitialJump : MarkerKind::FinalJump,
             static_cast<int>(i), cat.jumps[i].point.eta);
    for (auto& b : cat.manifold.branches) {
        const bool inc = b.eta_increasing;
        std::stable_sort(b.markers.begin(), b.markers.end(),
                         [inc](const Marker& x, const Marker& y) { return inc ? x.eta < y.eta : x.eta > y.eta; });
    }
    return cat;
}

bool FastSlowOrbitSeq::parity_ok() const {
    const std::size_t n = segments.size();
    if (n == 0) return false;
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (segments[i].kind == segments[i + 1].kind) return false;
    const bool odd_fast = case_number <= 2;
    const bool n_even = case_number == 1 || case_number == 4;
    const bool first_fast = segments.front().kind == SegmentKind::Fast;
    return first_fast == odd_fast && (n % 2 == 0) == n_even;
}

std::vector<FastSlowOrbitSeq> enumerate_fast_slow(const Problem& problem, int p, int q, const Catalog& catalog) {
    const auto& P = catalog.crits.at(static_cast<std::size_t>(p));
    const auto& Q = catalog.crits.at(static_cast<std::size_t>(q));
    if (P.index_F != Q.index_F + 1) throw Error(ErrorKind::Config, "fast-slow orbits need index(p) = index(q) + 1");
    const auto& m = catalog.manifold;
    const int chain_index = Q.index_F;  // fast index of the intermediate rest points
    const bool p_plus = P.slow_type == SlowType::Attractor;
    const bool q_plus = Q.slow_type == SlowType::Attractor;

    const auto arc_of = [&](const CritPointF& c) {
        for (const auto& b : m.branches)
            for (const auto& mk : b.markers)
                if (mk.kind == MarkerKind::CritF && mk.ref == c.id) return b.id;
        return -1;
    };
    const auto point_on = [&](int arc, double eta) -> Vec2 {
        const auto x = branch_point_at(problem, m.branches[static_cast<std::size_t>(arc)], eta);
        if (!x) throw Error(ErrorKind::GraphInconsistency, "event off its arc");
        return wrap(*x);
    };
    const auto F_at = [&](int arc, double eta) { return problem.f_eta(point_on(arc, eta), eta); };

    std::vector<Event> events;
    const int arc_p = arc_of(P), arc_q = arc_of(Q);
    if (!p_plus && arc_p >= 0 && m.branches[static_cast<std::size_t>(arc_p)].fast_index == chain_index)
        events.push_back({EventKind::StartP, arc_p, P.point.eta, p});
    if (q_plus && arc_q >= 0 && m.branches[static_cast<std::size_t>(arc_q)].fast_index == chain_index)
        events.push_back({EventKind::EndQ, arc_q, Q.point.eta, q});
    for (std::size_t i = 0; i < catalog.jumps.size(); ++i) {
        const auto& j = catalog.jumps[i];
        if (j.initial && j.crit == p) events.push_back({EventKind::InitialLanding, j.point.arc, j.point.eta, static_cast<int>(i)});
        if (!j.initial && j.crit == q) events.push_back({EventKind::FinalSource, j.point.arc, j.point.eta, static_cast<int>(i)});
    }
    if (chain_index == 1) {
        for (const auto& h : catalog.handle_slides) {
            events.push_back({EventKind::HandleSlideSource, h.from.arc, h.eta, h.id});
            events.push_back({EventKind::HandleSlideLanding, h.to.arc, h.eta, h.id});
        }
        for (const auto& c : catalog.cusps) {
            const auto& f = m.folds[static_cast<std::size_t>(c.fold)];
            if (c.direction == CuspDirection::IntoFold) events.push_back({EventKind::CuspSource, c.partner.arc, c.partner.eta, c.id});
            else events.push_back({EventKind::CuspLanding, c.partner.arc, c.partner.eta, c.id});
            (void)f;
        }
        for (const auto& f : m.folds) {
            const double flow = -problem.mu.value(f.point.x);  // d eta / d tau at the fold
            const int dir = flow > 0 ? 1 : -1;
            if (f.lower_index == 0 && dir == f.orientation) events.push_back({EventKind::FoldStart, f.upper_arc, f.point.eta, f.id});
            if (f.lower_index == 1 && dir == -f.orientation) events.push_back({EventKind::FoldEnd, f.lower_arc, f.point.eta, f.id});
        }
    }

    // CritF positions per arc block slow segments
    const auto blocked = [&](int arc, double a, double b) {
        const double lo = std::min(a, b), hi = std::max(a, b);
        for (const auto& mk : m.branches[static_cast<std::size_t>(arc)].markers)
            if (mk.kind == MarkerKind::CritF && mk.eta > lo + 1e-12 && mk.eta < hi - 1e-12) return true;
        return false;
    };
    const auto slow_dir = [&](int arc, double eta, double toward) {
        // direction of d eta / d tau leaving eta toward `toward`
        const double probe = eta + 1e-7 * (toward > eta ? 1 : -1);
        const auto& b = m.branches[static_cast<std::size_t>(arc)];
        const double e = std::clamp(probe, b.eta_lo, b.eta_hi);
        return -problem.mu.value(point_on(arc, e));
    };

    std::vector<FastSlowOrbitSeq> out;
    FastSlowOrbitSeq cur;
    cur.p = p;
    cur.q = q;
    cur.case_number = p_plus ? (q_plus ? 1 : 2) : (q_plus ? 3 : 4);

    const auto rest_of = [&](int arc, double eta, const std::string& label) {
        RestPoint r;
        r.point = ExtendedPoint(point_on(arc, eta), eta);
        r.F = problem.F(r.point);
        r.label = label;
        return r;
    };
    const auto crit_rest = [&](const CritPointF& c, const std::string& label) {
        return RestPoint{c.point, c.F, label};
    };

    std::function<void(const Event&)> from_landing;
    const auto after_source = [&](const Event& s) {
        switch (s.kind) {
            case EventKind::EndQ:
                cur.rests.push_back(crit_rest(Q, "q"));
                out.push_back(cur);
                cur.rests.pop_back();
                return;
            case EventKind::FinalSource: {
                cur.segments.push_back({SegmentKind::Fast, -1, s.eta, s.eta, FastKind::FinalJump, s.ref});
                cur.rests.push_back(crit_rest(Q, "q"));
                out.push_back(cur);
                cur.rests.pop_back();
                cur.segments.pop_back();
                return;
            }
            case EventKind::HandleSlideSource: {
                const auto& h = catalog.handle_slides[static_cast<std::size_t>(s.ref)];
                if (F_at(h.to.arc, h.eta) >= F_at(h.from.arc, h.eta))
                    throw Error(ErrorKind::GraphInconsistency, "handle-slide does not descend");
                cur.segments.push_back({SegmentKind::Fast, -1, s.eta, s.eta, FastKind::HandleSlide, s.ref});
                from_landing({EventKind::HandleSlideLanding, h.to.arc, h.eta, h.id});
                cur.segments.pop_back();
                return;
            }
            case EventKind::CuspSource: {
                const auto& c = catalog.cusps[static_cast<std::size_t>(s.ref)];
                const auto& f = m.folds[static_cast<std::size_t>(c.fold)];
                cur.segments.push_back({SegmentKind::Fast, -1, s.eta, s.eta, FastKind::Cusp, s.ref});
                for (const auto& e : events)
                    if (e.kind == EventKind::FoldStart && e.ref == f.id) from_landing(e);
                cur.segments.pop_back();
                return;
            }
            case EventKind::FoldEnd: {
                for (const auto& c : catalog.cusps) {
                    if (c.fold != s.ref || c.direction != CuspDirection::OutOfFold) continue;
                    cur.segments.push_back({SegmentKind::Fast, -1, s.eta, s.eta, FastKind::Cusp, c.id});
                    from_landing({EventKind::CuspLanding, c.partner.arc, c.partner.eta, c.id});
                    cur.segments.pop_back();
                }
                return;
            }
            default: return;
        }
    };

    from_landing = [&](const Event& L) {
        const std::string label = L.kind == EventKind::StartP ? "p" : L.kind == EventKind::FoldStart ? "fold" : "landing";
        if (L.kind == EventKind::StartP) cur.rests.push_back(crit_rest(P, "p"));
        else if (L.kind == EventKind::FoldStart) {
            const auto& f = m.folds[static_cast<std::size_t>(L.ref)];
            cur.rests.push_back({f.point, problem.F(f.point), "fold"});
        } else cur.rests.push_back(rest_of(L.arc, L.eta, label));
        const double FL = cur.rests.back().F;
        for (const auto& S : events) {
            if (is_landing(S.kind) || S.arc != L.arc) continue;
            if (std::abs(S.eta - L.eta) < 1e-9) continue;
            const double dir = slow_dir(L.arc, L.eta, S.eta);
            if ((S.eta - L.eta) * dir <= 0) continue;
            if (blocked(L.arc, L.eta, S.eta)) continue;
            if (S.kind == EventKind::EndQ && S.ref != q) continue;
            const double FS = S.kind == EventKind::EndQ ? Q.F : F_at(S.arc, S.eta);
            if (FS >= FL) throw Error(ErrorKind::GraphInconsistency, "F increases along a slow segment");
            cur.segments.push_back({SegmentKind::Slow, L.arc, L.eta, S.eta, FastKind::HandleSlide, -1});
            if (S.kind == EventKind::FoldEnd) {
                const auto& f = m.folds[static_cast<std::size_t>(S.ref)];
                cur.rests.push_back({f.point, problem.F(f.point), "fold"});
            } else if (S.kind != EventKind::EndQ) {
                cur.rests.push_back(rest_of(S.arc, S.eta, "source"));
            }
            after_source(S);
            if (S.kind != EventKind::EndQ) cur.rests.pop_back();
            cur.segments.pop_back();
        }
        cur.rests.pop_back();
    };

    if (p_plus) {
        for (const auto& e : events) {
            if (e.kind != EventKind::InitialLanding) continue;
            cur.rests.push_back(crit_rest(P, "p"));
            cur.segments.push_back({SegmentKind::Fast, -1, e.eta, e.eta, FastKind::InitialJump, e.ref});
            from_landing(e);
            cur.segments.pop_back();
            cur.rests.pop_back();
        }
    } else {
        for (const auto& e : events)
            if (e.kind == EventKind::StartP) from_landing(e);
    }
    for (const auto& s : out)
        if (!s.parity_ok()) throw Error(ErrorKind::GraphInconsistency, "fast-slow orbit violates case parity");
    return out;
}

std::vector<Vec3> fast_slow_polyline(const Problem& problem, const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                     double spacing) {
    std::vector<Vec3> pts;
    const auto add_traj = [&](const Trajectory& t) {
        for (const auto& v : resample(t, spacing)) pts.push_back(v);
    };
    for (const auto& s : seq.segments) {
        if (s.kind == SegmentKind::Slow) {
            const auto& b = catalog.manifold.branches[static_cast<std::size_t>(s.arc)];
            const int n = std::max(2, static_cast<int>(std::abs(s.eta_to - s.eta_from) / spacing) + 1);
            for (int i = 0; i <= n; ++i) {
                const double eta = s.eta_from + (s.eta_to - s.eta_from) * i / n;
                const double e = std::clamp(eta, b.eta_lo, b.eta_hi);
                if (const auto x = branch_point_at(problem, b, e)) pts.emplace_back((*x)[0], (*x)[1], e);
            }
            continue;
        }
        switch (s.fast) {
            case FastKind::HandleSlide: add_traj(catalog.handle_slides[static_cast<std::size_t>(s.ref)].witness); break;
            case FastKind::Cusp: add_traj(catalog.cusps[static_cast<std::size_t>(s.ref)].witness); break;
            case FastKind::InitialJump:
            case FastKind::FinalJump: add_traj(catalog.jumps[static_cast<std::size_t>(s.ref)].witness); break;
            case FastKind::FoldJump: add_traj(catalog.fold_jumps[static_cast<std::size_t>(s.ref)].witness); break;
        }
    }
    return pts;
}

std::vector<Vec3> resample(const Trajectory& traj, double spacing) {
    std::vector<Vec3> out;
    if (traj.nodes.empty()) return out;
    out.push_back(traj.point(0));
    for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
        const Vec3 a = traj.point(i - 1), b = traj.point(i);
        const int n = static_cast<int>((b - a).norm() / spacing);
        for (int k = 1; k <= n; ++k) {
            const double t = traj.nodes[i - 1].t + (traj.nodes[i].t - traj.nodes[i - 1].t) * k / (n + 1);
            out.push_back(ode::hermite(traj.nodes[i - 1], traj.nodes[i], t).head<3>());
        }
        out.push_back(b);
    }
    return out;
}

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
    const auto d = [](const Vec3& u, const Vec3& v) {
        const Vec2 dx = torus_delta(Vec2(u[0], u[1]), Vec2(v[0], v[1]));
        return std::sqrt(dx.squaredNorm() + (u[2] - v[2]) * (u[2] - v[2]));
    };
    const auto directed = [&](std::span<const Vec3> x, std::span<const Vec3> y) {
        double h = 0.0;
        for (const auto& u : x) {
            double m = INFINITY;
            for (const auto& v : y) {
                m = std::min(m, d(u, v));
                if (m <= h) break;
            }
            h = std::max(h, m);
        }
        return h;
    };
    if (a.empty() || b.empty()) return INFINITY;
    return std::max(directed(a, b), directed(b, a));
}

ConvergenceReport check_convergence(const Problem& problem, const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                    std::span<const double> lambdas,
                                    std::span<const std::vector<const Trajectory*>> witnesses, double proximity) {
    ConvergenceReport r;
    r.p = seq.p;
    r.q = seq.q;
    const auto limit = fast_slow_polyline(problem, seq, catalog);
    double eta_lo = INFINITY, eta_hi = -INFINITY;
    for (const auto& v : limit) {
        eta_lo = std::min(eta_lo, v[2]);
        eta_hi = std::max(eta_hi, v[2]);
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        double best = INFINITY, range_err = INFINITY;
        if (i < witnesses.size())
            for (const Trajectory* w : witnesses[i]) {
                const auto pts = resample(*w);
                const double h = hausdorff(pts, limit);
                if (h < best) {
                    best = h;
                    double lo = INFINITY, hi = -INFINITY;
                    for (const auto& v : pts) {
                        lo = std::min(lo, v[2]);
                        hi = std::max(hi, v[2]);
                    }
                    range_err = std::max(std::abs(lo - eta_lo), std::abs(hi - eta_hi));
                }
            }
        r.lambdas.push_back(lambdas[i]);
        r.distances.push_back(best);
        r.eta_range_error.push_back(range_err);
    }
    r.decreasing = !r.distances.empty();
    for (std::size_t i = 1; i < r.distances.size(); ++i)
        if (!(r.distances[i] < r.distances[i - 1])) r.decreasing = false;
    r.final_below = !r.distances.empty() && r.distances.back() < proximity;
    return r;
}

ConvergenceReport check_convergence(const Problem& problem, std::span<const CritPointF> crits,
                                    const FastSlowOrbitSeq& seq, const Catalog& catalog,
                                    std::span<const double> lambdas, const ShootingOptions& options,
                                    double proximity) {
    std::vector<BoundaryCount> counts;
    std::vector<std::vector<const Trajectory*>> witnesses;
    counts.reserve(lambdas.size());
    for (double lambda : lambdas) counts.push_back(count_boundary_lambda(problem, crits, lambda, seq.p, seq.q, options));
    for (const auto& bc : counts) {
        auto& w = witnesses.emplace_back();
        for (const auto& t : bc.witnesses) w.push_back(&t);
    }
    return check_convergence(problem, seq, catalog, lambdas, witnesses, proximity);
}

// ------------------------------------------------------------------- JSON

namespace {
nlohmann::json arc_point_json(const ArcPoint& a) { return {{"arc", a.arc}, {"eta", a.eta}, {"x", {a.x[0], a.x[1]}}}; }
}  // namespace

void to_json(nlohmann::json& j, const HandleSlide& h) {
    j = {{"id", h.id},         {"eta", h.eta},   {"from", arc_point_json(h.from)}, {"to", arc_point_json(h.to)},
         {"branch", h.from_branch}, {"slope", h.slope}, {"approach", h.approach}};
}

void to_json(nlohmann::json& j, const CuspOrbit& c) {
    j = {{"id", c.id},
         {"fold", c.fold},
         {"partner", arc_point_json(c.partner)},
         {"direction", to_string(c.direction)},
         {"decay_exponent", c.decay_exponent}};
}

void to_json(nlohmann::json& j, const FoldJump& f) {
    j = {{"fold", f.fold}, {"landing", arc_point_json(f.landing)}, {"landing_index", f.landing_index}};
}

void to_json(nlohmann::json& j, const Jump& jp) {
    j = {{"crit", jp.crit}, {"kind", jp.initial ? "initial" : "final"}, {"point", arc_point_json(jp.point)}};
}

void to_json(nlohmann::json& j, const FastSlowOrbitSeq& s) {
    static const char* cases[] = {"I", "II", "III", "IV"};
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& g : s.segments) {
        if (g.kind == SegmentKind::Slow)
            segs.push_back({{"kind", "slow"}, {"arc", g.arc}, {"eta_from", g.eta_from}, {"eta_to", g.eta_to}});
        else
            segs.push_back({{"kind", "fast"}, {"type", to_string(g.fast)}, {"ref", g.ref}, {"eta", g.eta_from}});
    }
    nlohmann::json rests = nlohmann::json::array();
    for (const auto& r : s.rests)
        rests.push_back({{"x", {r.point.x[0], r.point.x[1]}}, {"eta", r.point.eta}, {"F", r.F}, {"label", r.label}});
    j = {{"p", s.p},
         {"q", s.q},
         {"case", cases[std::clamp(s.case_number, 1, 4) - 1]},
         {"n", s.segments.size()},
         {"parity_ok", s.parity_ok()},
         {"rests", rests},
         {"segments", segs}};
}

void to_json(nlohmann::json& j, const ConvergenceReport& r) {
    j = {{"p", r.p},
         {"q", r.q},
         {"lambdas", r.lambdas},
         {"hausdorff", r.distances},
         {"eta_range_error", r.eta_range_error},
         {"decreasing", r.decreasing},
         {"final_below", r.final_below}};
}

nlohmann::json catalog_json(const Catalog& c) {
    nlohmann::json j;
    j["handle_slides"] = c.handle_slides;
    j["cusps"] = c.cusps;
    j["fold_jumps"] = c.fold_jumps;
    j["jumps"] = c.jumps;
    j["scan_samples"] = c.scan_samples;
    return j;
}

}  // namespace msw
