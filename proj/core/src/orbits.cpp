#include "msw/orbits.hpp"

#include "msw/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <exception>
#include <cmath>
#include <memory>
#include <thread>

namespace msw {

int ShootingResult::count(int q) const {
    return static_cast<int>(std::count_if(crossings.begin(), crossings.end(), [q](const Crossing& c) { return c.target == q; }));
}

namespace {

Vec3 lifted(const CritPointF& c) { return {c.point.x[0], c.point.x[1], c.point.eta}; }

double dist_torus(const Vec3& y, const Vec3& c) {
    const Vec2 d = torus_delta(Vec2(y[0], y[1]), Vec2(c[0], c[1]));
    const double de = y[2] - c[2];
    return std::sqrt(d.squaredNorm() + de * de);
}

Vec3 delta_torus(const Vec3& y, const Vec3& c) {
    const Vec2 d = torus_delta(Vec2(y[0], y[1]), Vec2(c[0], c[1]));
    return {d[0], d[1], y[2] - c[2]};
}

}  // namespace

double eta_bound(const Problem& problem, std::span<const CritPointF> crits) {
    if (problem.eta_max > 0.0) return problem.eta_max;
    double m = 0.0;
    for (const auto& c : crits) m = std::max(m, std::abs(c.point.eta));
    return m + problem.tol.eta_margin;
}

namespace {

// Move y onto the level set F = level along the Euclidean gradient.
Vec3 project_to_level(const Problem& problem, Vec3 y, double level) {
    for (int it = 0; it < 6; ++it) {
        const Vec2 x(y[0], y[1]);
        const Vec3 g(problem.grad_f_eta(x, y[2])[0], problem.grad_f_eta(x, y[2])[1], problem.mu.value(x));
        const double r = problem.F(y) - level;
        if (std::abs(r) < 1e-15 || g.squaredNorm() == 0.0) break;
        y -= r * g / g.squaredNorm();
    }
    return y;
}

// ----------------------------------------------------------------- shots

struct Visit {
    int q = -1;
    int sign = 0;  ///< exit side along u_q; 0 = converged, 2 = escape, 3 = undetermined
    double min_dist = INFINITY;
    double F_exit = -INFINITY;
    int k_in = 0;   ///< own node index where the visit began (0 if inherited)
    int k_min = 0;  ///< own node index of the closest approach (-1 if inherited)
    double inherited_min = INFINITY;
    std::array<int, 2> lift{0, 0};  ///< copy of the target in the universal cover

    [[nodiscard]] bool same(const Visit& o) const { return q == o.q && sign == o.sign && lift == o.lift; }
};

// Derivatives are recomputed on demand; shots at small lambda are long.
struct ShotNode {
    double t = 0.0;
    FlowState y = FlowState::Zero();
};

struct Shot {
    std::shared_ptr<const Shot> parent;
    int split = 0;  ///< parent's own node index this shot continues from
    double lambda = 0.0;
    std::vector<ShotNode> nodes;
    std::vector<double> Fv;
    std::vector<Visit> itinerary;
    double angle = 0.0;
    int depth = 0;
};

using ShotPtr = std::shared_ptr<const Shot>;

struct Context {
    const Problem& problem;
    std::span<const CritPointF> crits;
    double lambda;
    int p;
    double eta_max;
    double R;
    double w0;
    Budget budget;
    std::vector<int> saddles;    ///< targets of index(p) - 1 tracked by ball visits
    std::vector<Vec3> exit_dir;  ///< unstable direction of each target (by crit id)
    std::vector<int> sinks;      ///< lower-index crits detected by convergence
    std::vector<Basin> sink_basins;
    Vec2 anchor_plus = Vec2::Zero();   ///< where escapes to +eta settle in x
    Vec2 anchor_minus = Vec2::Zero();
};

std::array<int, 2> lift_of(const Vec3& y, const Vec2& base) {
    return {static_cast<int>(std::lround((y[0] - base[0]) / kTwoPi)),
            static_cast<int>(std::lround((y[1] - base[1]) / kTwoPi))};
}

struct Seed {
    Vec3 y;
    double t0 = 0.0;
    double E0 = 0.0;
    std::vector<Visit> prefix;
    // visit in progress at the start, if any
    int open_q = -1;
    double open_min = INFINITY;
    std::array<int, 2> open_lift{0, 0};
};

ShotPtr shoot(const Context& ctx, Seed seed, ShotPtr parent, int split, double angle, int depth) {
    const Problem& problem = ctx.problem;
    auto shot = std::make_shared<Shot>();
    shot->parent = std::move(parent);
    shot->split = split;
    shot->angle = angle;
    shot->depth = depth;
    shot->itinerary = std::move(seed.prefix);

    const auto rhs = [&](double, const FlowState& s) { return flow_rhs(problem, ctx.lambda, 1.0, s); };
    FlowState y0;
    y0 << seed.y[0], seed.y[1], seed.y[2], seed.E0;
    shot->lambda = ctx.lambda;
    shot->nodes.push_back({seed.t0, y0});
    FlowNode cur{seed.t0, y0, rhs(seed.t0, y0)};
    shot->Fv.push_back(problem.F(seed.y));

    Visit open;
    if (seed.open_q >= 0) {
        open.q = seed.open_q;
        open.min_dist = seed.open_min;
        open.k_in = 0;
        open.k_min = -1;
        open.inherited_min = seed.open_min;
        open.lift = seed.open_lift;
    }
    int sink_run = 0, sink_id = -1;
    double sink_last = INFINITY, sink_first = INFINITY;

    // returns true when terminal
    const auto observe = [&](int k) -> bool {
        const Vec3 y = shot->nodes[static_cast<std::size_t>(k)].y.head<3>();
        // escape once x has settled near the attracting rest point beyond the cutoff
        const Vec2& anchor = y[2] > 0 ? ctx.anchor_plus : ctx.anchor_minus;
        if (std::abs(y[2]) > ctx.eta_max &&
            (torus_distance(Vec2(y[0], y[1]), anchor) < 0.5 || std::abs(y[2]) > 3.0 * ctx.eta_max)) {
            if (open.q >= 0) {
                open.sign = 3;
                shot->itinerary.push_back(open);
            }
            Visit v;
            v.q = y[2] > 0 ? -2 : -3;
            v.sign = 2;
            v.lift = lift_of(y, anchor);
            shot->itinerary.push_back(v);
            return true;
        }
        if (open.q >= 0) {
            const Vec3 c = lifted(ctx.crits[static_cast<std::size_t>(open.q)]);
            const double d = dist_torus(y, c);
            if (d < open.min_dist) {
                open.min_dist = d;
                open.k_min = k;
            }
            if (d < 1e-9) {
                open.sign = 0;
                open.F_exit = shot->Fv[static_cast<std::size_t>(k)];
                shot->itinerary.push_back(open);
                return true;
            }
            if (d >= ctx.R) {
                const double s = delta_torus(y, c).dot(ctx.exit_dir[static_cast<std::size_t>(open.q)]);
                open.sign = s >= 0 ? 1 : -1;
                open.F_exit = shot->Fv[static_cast<std::size_t>(k)];
                shot->itinerary.push_back(open);
                open = Visit{};
            } else {
                return false;
            }
        }
        for (int q : ctx.saddles) {
            const double d = dist_torus(y, lifted(ctx.crits[static_cast<std::size_t>(q)]));
            if (d < ctx.R) {
                open = Visit{};
                open.q = q;
                open.min_dist = d;
                open.k_in = k;
                open.k_min = k;
                open.lift = lift_of(y, ctx.crits[static_cast<std::size_t>(q)].point.x);
                return false;
            }
        }
        int inside = -1;
        double dist = INFINITY;
        for (const auto& b : ctx.sink_basins) {
            const double d = basin_distance(y, b);
            if (d < b.radius && d < dist) {
                inside = b.id;
                dist = d;
            }
        }
        if (inside < 0) {
            sink_run = 0;
            sink_id = -1;
            return false;
        }
        bool done = dist < 1e-10;
        if (!done) {
            if (sink_id != inside || !(dist < sink_last)) {
                sink_id = inside;
                sink_run = 0;
                sink_first = sink_last = dist;
            } else {
                sink_last = dist;
                done = ++sink_run >= problem.tol.converge_steps && dist < 0.5 * sink_first;
            }
        }
        if (done) {
            Visit v;
            v.q = inside;
            v.sign = 0;
            v.min_dist = dist;
            v.F_exit = shot->Fv[static_cast<std::size_t>(k)];
            v.k_in = v.k_min = k;
            v.lift = lift_of(y, ctx.crits[static_cast<std::size_t>(inside)].point.x);
            shot->itinerary.push_back(v);
        }
        return done;
    };

    if (observe(0)) return shot;
    ode::DormandPrince<4> dp(step_options(problem.tol));
    long steps = 0;
    while (true) {
        if (steps >= ctx.budget.max_steps || cur.t - seed.t0 >= ctx.budget.max_time) break;
        FlowNode next;
        try {
            next = dp.advance(rhs, cur, 1.0);
        } catch (const Error&) {
            break;
        }
        ++steps;
        cur = next;
        shot->nodes.push_back({next.t, next.y});
        shot->Fv.push_back(problem.F(Vec3(next.y.head<3>())));
        if (observe(static_cast<int>(shot->nodes.size()) - 1)) return shot;
    }
    if (open.q >= 0) {
        open.sign = 3;
        shot->itinerary.push_back(open);
    }
    Visit v;
    v.q = -4;
    v.sign = 3;
    v.lift = lift_of(shot->nodes.back().y.head<3>(), Vec2::Zero());
    shot->itinerary.push_back(v);
    return shot;
}

FlowNode full_node(const Problem& problem, const Shot& s, std::size_t k) {
    const auto& n = s.nodes[k];
    return {n.t, n.y, flow_rhs(problem, s.lambda, 1.0, n.y)};
}

// Position of a shot on the level F = level (nullopt if its own nodes do not reach it).
std::optional<Vec3> at_level(const Problem& problem, const Shot& s, double level) {
    const auto& F = s.Fv;
    if (F.empty()) return std::nullopt;
    const double slack = 1e-13 * (1.0 + std::abs(level));
    if (level > F.front()) {
        if (level - F.front() > slack) return std::nullopt;
        return Vec3(s.nodes.front().y.head<3>());
    }
    if (level < F.back()) {
        if (F.back() - level > slack) return std::nullopt;
        return Vec3(s.nodes.back().y.head<3>());
    }
    // F is nonincreasing along the shot
    auto it = std::lower_bound(F.begin(), F.end(), level, [](double a, double v) { return a > v; });
    const auto k = static_cast<std::size_t>(it - F.begin());
    if (k == 0 || F[k] == level) return Vec3(s.nodes[k].y.head<3>());
    const FlowNode a = full_node(problem, s, k - 1);
    const FlowNode b = full_node(problem, s, k);
    double ta = a.t, tb = b.t, Fa = F[k - 1], Fb = F[k];
    Vec3 y = a.y.head<3>();
    // Illinois iteration on the Hermite interpolant; F is monotone on the step
    int side = 0;
    for (int i = 0; i < 40 && Fa != Fb; ++i) {
        const double t = ta + (Fa - level) / (Fa - Fb) * (tb - ta);
        y = ode::hermite(a, b, t).head<3>();
        const double Ft = problem.F(y);
        if (std::abs(Ft - level) < 1e-15 || tb - ta < 1e-14) break;
        if (Ft > level) {
            ta = t;
            Fa = Ft;
            if (side == 1) Fb = level + 0.5 * (Fb - level);
            side = 1;
        } else {
            tb = t;
            Fb = Ft;
            if (side == -1) Fa = level + 0.5 * (Fa - level);
            side = -1;
        }
    }
    return y;
}

struct Pair {
    ShotPtr a, b;
    int level = 0;  ///< re-seeds along this bracket
    double start_F = 0.0;
    int rounds = 0;  ///< advances to a lower level
};

int first_difference(const Shot& a, const Shot& b) {
    const std::size_t n = std::min(a.itinerary.size(), b.itinerary.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!a.itinerary[i].same(b.itinerary[i])) return static_cast<int>(i);
    if (a.itinerary.size() == b.itinerary.size()) return -1;
    return static_cast<int>(n);
}

// Composite trajectory along the parent chain, ending at own node `last` of `s`.
Trajectory witness_of(const Problem& problem, const Shot& s, int last, double lambda) {
    std::vector<std::pair<const Shot*, int>> chain;
    const Shot* cur = &s;
    int upto = last;
    while (cur) {
        chain.emplace_back(cur, upto);
        upto = cur->split;
        cur = cur->parent.get();
    }
    Trajectory t;
    t.lambda = lambda;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it)
        for (int k = 0; k <= it->second; ++k) t.nodes.push_back(full_node(problem, *it->first, static_cast<std::size_t>(k)));
    t.F_start = problem.F(t.point(0));
    t.F_end = problem.F(t.end_point());
    t.energy_spent = t.nodes.back().y[3] - t.nodes.front().y[3];
    t.terminal = {TerminalKind::ConvergedTo, -1};
    return t;
}

// Distance between the two shots on the common levels starting at start_F;
// returns {split node in a, separated} where split is the last node within w0.
struct SplitInfo {
    int split = -1;
    bool separated = false;
    bool same_level = false;
};

constexpr double kTightPair = 1e-10;

// Bisect on the start level until the pair is tight, then advance to the
// last node of a within w0 of b.
SplitInfo find_split(const Context& ctx, const Shot& a, const Shot& b, double start_F) {
    SplitInfo info;
    bool first = true;
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
        if (a.Fv[k] > start_F) continue;
        const auto pb = at_level(ctx.problem, b, a.Fv[k]);
        const double d = pb ? (Vec3(a.nodes[k].y.head<3>()) - *pb).norm() : INFINITY;
        if (first) {
            first = false;
            if (d > kTightPair) {
                info.split = static_cast<int>(k);
                info.separated = true;
                info.same_level = true;
                return info;
            }
        }
        if (d > ctx.w0) {
            info.separated = true;
            if (info.split < 0) info.split = static_cast<int>(k);
            return info;
        }
        info.split = static_cast<int>(k);
    }
    return info;
}

struct Worker {
    const Context& ctx;
    std::vector<Crossing> crossings;
    int shots = 0;
    int discarded = 0;
    int max_levels;

    void record(const Shot& s, const Visit& v, int level) {
        Crossing c;
        c.target = v.q;
        c.angle = s.angle;
        c.depth = level;
        c.approach = v.min_dist;
        int last = v.k_min >= 0 ? v.k_min : 0;
        c.witness = witness_of(ctx.problem, s, last, ctx.lambda);
        c.witness.terminal = {TerminalKind::ConvergedTo, v.q};
        const double Fp = ctx.crits[static_cast<std::size_t>(ctx.p)].F;
        const double Fq = ctx.crits[static_cast<std::size_t>(v.q)].F;
        c.energy_residual = std::abs(c.witness.energy_spent - (Fp - Fq));
        crossings.push_back(std::move(c));
    }

    void resolve(Pair root) {
        std::vector<Pair> stack{std::move(root)};
        while (!stack.empty()) {
            Pair pr = std::move(stack.back());
            stack.pop_back();
            const Shot& A = *pr.a;
            const Shot& B = *pr.b;
            const int i = first_difference(A, B);
            if (i < 0) continue;
            const bool has_a = i < static_cast<int>(A.itinerary.size());
            const bool has_b = i < static_cast<int>(B.itinerary.size());
            if (has_a && has_b) {
                const Visit& va = A.itinerary[static_cast<std::size_t>(i)];
                const Visit& vb = B.itinerary[static_cast<std::size_t>(i)];
                const bool target = std::find(ctx.saddles.begin(), ctx.saddles.end(), va.q) != ctx.saddles.end();
                if (target && va.q == vb.q && va.sign != vb.sign && va.sign != 3 && vb.sign != 3) {
                    if (std::min(va.min_dist, vb.min_dist) < ctx.problem.tol.witness_approach) {
                        if (va.min_dist <= vb.min_dist) record(A, va, pr.level);
                        else record(B, vb, pr.level);
                        continue;
                    }
                }
            }
            if (pr.rounds >= max_levels || pr.level >= 64 * max_levels)
                throw Error(ErrorKind::NonRegularLambda, "bracket not resolved after " + std::to_string(pr.rounds) +
                                                             " rounds at lambda " + std::to_string(ctx.lambda));
            const SplitInfo sp = find_split(ctx, A, B, pr.start_F);
            if (!sp.separated || sp.split < 0) {
                ++discarded;
                continue;
            }
            const auto k = static_cast<std::size_t>(sp.split);
            const double level = A.Fv[k];
            const Vec3 ya = A.nodes[k].y.head<3>();
            const auto yb = at_level(ctx.problem, B, level);
            if (!yb) {
                ++discarded;
                continue;
            }
            // past the confinement bound only the escape lift can differ; no crossing lies there
            if (std::abs(ya[2]) > ctx.eta_max || (ya - *yb).norm() < 1e-13) {
                ++discarded;
                continue;
            }
            Seed seed;
            seed.y = project_to_level(ctx.problem, 0.5 * (ya + *yb), level);
            seed.t0 = A.nodes[k].t;
            seed.E0 = A.nodes[k].y[3];
            for (const auto& v : A.itinerary) {
                if (v.F_exit > level) seed.prefix.push_back(v);
                else {
                    // visit in progress at the split
                    if (v.sign != 2 && v.sign != 3 && v.q >= 0 && v.k_in <= static_cast<int>(k) &&
                        std::find(ctx.saddles.begin(), ctx.saddles.end(), v.q) != ctx.saddles.end()) {
                        double m = v.inherited_min;
                        for (int j = std::max(v.k_in, 0); j <= static_cast<int>(k); ++j)
                            m = std::min(m, dist_torus(A.nodes[static_cast<std::size_t>(j)].y.head<3>(),
                                                       lifted(ctx.crits[static_cast<std::size_t>(v.q)])));
                        const double dk = dist_torus(ya, lifted(ctx.crits[static_cast<std::size_t>(v.q)]));
                        if (dk < ctx.R) {
                            seed.open_q = v.q;
                            seed.open_min = m;
                            seed.open_lift = v.lift;
                        }
                    }
                    break;
                }
            }
            ShotPtr M = shoot(ctx, std::move(seed), pr.a, sp.split, 0.5 * (A.angle + B.angle), pr.level + 1);
            ++shots;
            const int rounds = pr.rounds + (sp.same_level ? 0 : 1);
            // pairs with equal itineraries hold no crossing; dropping them early frees their shots
            if (first_difference(*M, B) >= 0) stack.push_back({M, pr.b, pr.level + 1, level, rounds});
            if (first_difference(A, *M) >= 0) stack.push_back({pr.a, M, pr.level + 1, level, rounds});
        }
    }
};

}  // namespace

double attribution_radius(std::span<const CritPointF> crits) {
    double m = INFINITY;
    for (std::size_t i = 0; i < crits.size(); ++i)
        for (std::size_t j = i + 1; j < crits.size(); ++j) m = std::min(m, dist_torus(lifted(crits[i]), lifted(crits[j])));
    return std::isfinite(m) ? 0.5 * m : 1.0;
}

Eigen::MatrixXd unstable_directions(const Problem& problem, const CritPointF& p, double lambda) {
    // J = -S^-2 H with S = diag(1, 1, 1/lambda) is similar to the symmetric -S^-1 H S^-1
    const Mat3 H = hess_F(problem, p.point);
    const Vec3 sinv(1.0, 1.0, lambda);
    const Mat3 M = sinv.asDiagonal() * H * sinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat3> es(M);
    std::vector<Vec3> cols;
    for (int i = 0; i < 3; ++i) {
        if (es.eigenvalues()[i] >= 0.0) continue;
        Vec3 v = sinv.asDiagonal() * es.eigenvectors().col(i);
        v.normalize();
        // deterministic orientation: largest component positive
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0) v = -v;
        cols.push_back(v);
    }
    Eigen::MatrixXd out(3, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = cols[i];
    return out;
}

ShootingResult shoot_unstable_manifold(const Problem& problem, std::span<const CritPointF> crits, double lambda,
                                       int p, const ShootingOptions& options) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::Config, "shooting needs lambda > 0");
    const auto& P = crits[static_cast<std::size_t>(p)];
    const int k = P.index_F;

    Context ctx{problem, crits, lambda, p, eta_bound(problem, crits), 0.0, 0.0, {}, {}, {}, {}, {}};
    ctx.R = std::min(problem.tol.attribution_fraction * 2.0 * attribution_radius(crits), 0.25);
    ctx.w0 = options.pair_separation > 0 ? options.pair_separation : problem.tol.pair_separation;
    ctx.budget.max_time = 50.0 / (lambda * lambda) + 500.0;
    ctx.exit_dir.assign(crits.size(), Vec3::Zero());
    std::vector<CritPointF> sink_crits;
    for (const auto& c : crits) {
        if (c.id == p) continue;
        if (c.index_F == k - 1 && k - 1 > 0) {
            ctx.saddles.push_back(c.id);
            const auto U = unstable_directions(problem, c, lambda);
            ctx.exit_dir[static_cast<std::size_t>(c.id)] = U.col(0);
        } else if (c.index_F < k) {
            ctx.sinks.push_back(c.id);
            sink_crits.push_back(c);
        }
    }
    ctx.sink_basins = crit_basins(problem, sink_crits);
    for (int s : {1, -1}) {
        // the attracting rest point of f_eta at the escape level
        const auto rests = crit_points_f_eta(problem, s * ctx.eta_max);
        Vec2 a = Vec2::Zero();
        for (const auto& r : rests)
            if (r.index == 0) a = r.x;
        (s > 0 ? ctx.anchor_plus : ctx.anchor_minus) = a;
    }

    ShootingResult res;
    res.source = p;
    res.lambda = lambda;
    const double r0 = options.radius > 0 ? options.radius : problem.tol.shoot_radius;
    const Vec3 c0 = lifted(P);
    const auto U = unstable_directions(problem, P, lambda);

    if (U.cols() == 1) {
        // W^u(p) is two orbits
        for (int s : {1, -1}) {
            Seed seed;
            seed.y = c0 + s * r0 * Vec3(U.col(0));
            ShotPtr shot = shoot(ctx, std::move(seed), nullptr, 0, s > 0 ? 0.0 : std::numbers::pi, 0);
            ++res.shots;
            const Visit& v = shot->itinerary.back();
            if (v.sign == 0 && v.q >= 0 && crits[static_cast<std::size_t>(v.q)].index_F == k - 1) {
                Crossing c;
                c.target = v.q;
                c.angle = shot->angle;
                c.approach = v.min_dist;
                c.witness = witness_of(problem, *shot, static_cast<int>(shot->nodes.size()) - 1, lambda);
                c.witness.terminal = {TerminalKind::ConvergedTo, v.q};
                c.energy_residual = std::abs(c.witness.energy_spent - (P.F - crits[static_cast<std::size_t>(v.q)].F));
                res.crossings.push_back(std::move(c));
            }
        }
        return res;
    }
    if (U.cols() != 2)
        throw Error(ErrorKind::Config, "shooting supports unstable dimension 1 or 2, got " + std::to_string(U.cols()));

    Vec3 e1 = U.col(0), e2 = U.col(1);
    e2 -= e2.dot(e1) * e1;
    e2.normalize();
    const int n = options.angle_samples > 0 ? options.angle_samples : problem.tol.angle_samples;
    const int W = std::clamp(options.workers, 1, n);
    const auto seed_at = [&](int i) {
        const double th = kTwoPi * i / n;
        Seed s;
        s.y = c0 + r0 * (std::cos(th) * e1 + std::sin(th) * e2);
        return std::make_pair(s, th);
    };

    std::vector<Worker> workers;
    workers.reserve(static_cast<std::size_t>(W));
    for (int w = 0; w < W; ++w) workers.push_back(Worker{ctx, {}, 0, 0, problem.tol.max_bisection_levels});
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(W));

    const auto run = [&](int w) {
        Worker& wk = workers[static_cast<std::size_t>(w)];
        try {
            const int lo = w * n / W, hi = (w + 1) * n / W;
            auto [s0, th0] = seed_at(lo);
            ShotPtr prev = shoot(ctx, s0, nullptr, 0, th0, 0);
            ++wk.shots;
            for (int i = lo + 1; i <= hi; ++i) {
                auto [s, th] = seed_at(i % n);
                ShotPtr cur = shoot(ctx, s, nullptr, 0, i == n ? kTwoPi : th, 0);
                ++wk.shots;
                wk.resolve({prev, cur, 0, std::min(prev->Fv.front(), cur->Fv.front()), 0});
                prev = std::move(cur);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (W == 1) {
        run(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < W; ++w) threads.emplace_back(run, w);
        for (auto& t : threads) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& wk : workers) {
        res.shots += wk.shots;
        res.discarded_pairs += wk.discarded;
        for (auto& c : wk.crossings) res.crossings.push_back(std::move(c));
    }
    std::stable_sort(res.crossings.begin(), res.crossings.end(),
                     [](const Crossing& a, const Crossing& b) { return a.angle < b.angle; });
    // two attributions of the same orbit mean the bracket was not isolated
    for (std::size_t i = 0; i < res.crossings.size(); ++i) {
        double gap = INFINITY;
        for (std::size_t j = 0; j < res.crossings.size(); ++j) {
            if (i == j || res.crossings[i].target != res.crossings[j].target) continue;
            const auto& a = res.crossings[i].witness;
            const auto& b = res.crossings[j].witness;
            gap = std::min(gap, (a.end_point() - b.end_point()).norm() + std::abs(a.F_end - b.F_end));
        }
        res.crossings[i].margin = gap;
        if (gap < 1e-10)
            throw Error(ErrorKind::NonRegularLambda,
                        "two crossings share a witness at lambda " + std::to_string(lambda));
    }
    return res;
}

BoundaryCount count_boundary_lambda(const Problem& problem, std::span<const CritPointF> crits, double lambda, int p,
                                    int q, const ShootingOptions& options) {
    const auto res = shoot_unstable_manifold(problem, crits, lambda, p, options);
    BoundaryCount bc;
    for (const auto& c : res.crossings)
        if (c.target == q) {
            ++bc.raw_count;
            bc.witnesses.push_back(c.witness);
        }
    bc.count_mod2 = bc.raw_count % 2;
    return bc;
}

}  // namespace msw
