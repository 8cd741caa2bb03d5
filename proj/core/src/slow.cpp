#include "msw/slow.hpp"

#include "msw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace msw {

const char* to_string(EndKind k) noexcept {
    switch (k) {
        case EndKind::Fold: return "Fold";
        case EndKind::EtaCutoff: return "EtaCutoff";
        case EndKind::Loop: return "ClosedLoop";
    }
    return "?";
}

const char* to_string(MarkerKind k) noexcept {
    switch (k) {
        case MarkerKind::CritF: return "CritF";
        case MarkerKind::HandleSlide: return "HandleSlideEndpoint";
        case MarkerKind::CuspOrbit: return "CuspEndpoint";
        case MarkerKind::InitialJump: return "InitialJump";
        case MarkerKind::FinalJump: return "FinalJump";
        case MarkerKind::FastLanding: return "FastLanding";
    }
    return "?";
}

namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;

struct CurveEval {
    Vec2 G;
    Mat23 J;
};

CurveEval curve_eval(const Problem& problem, const Vec3& y) {
    const Vec2 x(y[0], y[1]);
    CurveEval e;
    e.G = problem.grad_f_eta(x, y[2]);
    e.J.leftCols<2>() = problem.hess_f_eta(x, y[2]);
    e.J.col(2) = problem.mu.gradient(x);
    return e;
}

// The eta component of this cross product is det Hess f_eta.
Vec3 curve_tangent(const Mat23& J) {
    const Vec3 r0 = J.row(0).transpose(), r1 = J.row(1).transpose();
    return r0.cross(r1).normalized();
}

double det_hess(const Problem& problem, const Vec3& y) {
    return problem.hess_f_eta(Vec2(y[0], y[1]), y[2]).determinant();
}

Vec3 grad_det_hess(const Problem& problem, const Vec3& y) {
    const Vec2 x(y[0], y[1]);
    const Mat2 h = problem.hess_f_eta(x, y[2]);
    const Tensor3 tf = problem.f.third(x), tm = problem.mu.third(x);
    const Mat2 hm = problem.mu.hessian(x);
    Vec3 g;
    for (int k = 0; k < 2; ++k) {
        Mat2 dh;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) dh(i, j) = tf[k][i][j] + y[2] * tm[k][i][j];
        g[k] = dh(0, 0) * h(1, 1) + h(0, 0) * dh(1, 1) - 2.0 * h(0, 1) * dh(0, 1);
    }
    g[2] = hm(0, 0) * h(1, 1) + h(0, 0) * hm(1, 1) - 2.0 * h(0, 1) * hm(0, 1);
    return g;
}

// Newton for {G = 0, <t, y - anchor> = 0}.
bool correct(const Problem& problem, Vec3& y, const Vec3& t, const Vec3& anchor, double max_move) {
    const double tol = problem.tol.continuation_tol;
    const Vec3 y0 = y;
    for (int it = 0; it < 15; ++it) {
        const CurveEval e = curve_eval(problem, y);
        const double plane = t.dot(y - anchor);
        if (e.G.cwiseAbs().maxCoeff() <= 1e-2 * tol && std::abs(plane) <= 1e-13) return true;
        Mat3 M;
        M.topRows<2>() = e.J;
        M.row(2) = t.transpose();
        const Vec3 rhs(-e.G[0], -e.G[1], -plane);
        const Vec3 dy = M.partialPivLu().solve(rhs);
        if (!dy.allFinite()) return false;
        y += dy;
        if ((y - y0).norm() > max_move) return false;
        if (dy.norm() < 1e-15) break;
    }
    return curve_eval(problem, y).G.cwiseAbs().maxCoeff() <= tol;
}

// Newton at fixed eta for the point of C_F with a given eta.
bool correct_at_eta(const Problem& problem, Vec2& x, double eta) {
    for (int it = 0; it < 40; ++it) {
        const Vec2 g = problem.grad_f_eta(x, eta);
        if (g.cwiseAbs().maxCoeff() <= 1e-2 * problem.tol.continuation_tol) return true;
        Vec2 dx = problem.hess_f_eta(x, eta).fullPivLu().solve(-g);
        if (!dx.allFinite()) return false;
        const double n = dx.norm();
        if (n > 0.2) dx *= 0.2 / n;
        x += dx;
    }
    return problem.grad_f_eta(x, eta).cwiseAbs().maxCoeff() <= problem.tol.continuation_tol;
}

// Newton for the bordered fold system {G = 0, det H = 0}.
bool locate_fold(const Problem& problem, Vec3& y) {
    for (int it = 0; it < 40; ++it) {
        const CurveEval e = curve_eval(problem, y);
        const double dc = det_hess(problem, y);
        if (e.G.cwiseAbs().maxCoeff() <= 1e-13 && std::abs(dc) <= 1e-13) return true;
        Mat3 M;
        M.topRows<2>() = e.J;
        M.row(2) = grad_det_hess(problem, y).transpose();
        Vec3 dy = M.fullPivLu().solve(Vec3(-e.G[0], -e.G[1], -dc));
        if (!dy.allFinite()) return false;
        const double n = dy.norm();
        if (n > 0.05) dy *= 0.05 / n;
        y += dy;
    }
    const CurveEval e = curve_eval(problem, y);
    return e.G.cwiseAbs().maxCoeff() <= problem.tol.continuation_tol && std::abs(det_hess(problem, y)) <= 1e-10;
}

struct Component {
    std::vector<BranchNode> nodes;
    bool closed = false;
};

// Points on a component compare on the torus in x and directly in eta.
double point_distance(const Vec3& a, const Vec3& b) {
    const Vec2 d = torus_delta(Vec2(a[0], a[1]), Vec2(b[0], b[1]));
    return std::sqrt(d.squaredNorm() + (a[2] - b[2]) * (a[2] - b[2]));
}

struct HalfTrace {
    std::vector<Vec3> pts;
    bool closed = false;
};

HalfTrace trace_half(const Problem& problem, const Vec3& seed, Vec3 t, double eta_cut, bool detect_loop) {
    const double h0 = problem.tol.continuation_step;
    const double hmin = problem.tol.min_continuation_step;
    HalfTrace out;
    out.pts.push_back(seed);
    Vec3 y = seed;
    double h = h0;
    double travelled = 0.0;
    constexpr double kMaxLength = 5000.0;
    while (true) {
        if (travelled > kMaxLength) throw Error(ErrorKind::ContinuationStall, "branch does not terminate");
        Vec3 yn = y + h * t;
        if (!correct(problem, yn, t, y + h * t, 2.0 * h)) {
            h *= 0.5;
            if (h < hmin) throw Error(ErrorKind::ContinuationStall, "continuation step below minimum");
            continue;
        }
        Vec3 tn = curve_tangent(curve_eval(problem, yn).J);
        if (tn.dot(t) < 0.0) tn = -tn;
        if (tn.dot(t) < std::cos(0.35)) {
            h *= 0.5;
            if (h < hmin) throw Error(ErrorKind::ContinuationStall, "continuation step below minimum");
            continue;
        }
        if (std::abs(yn[2]) >= eta_cut) {
            // land exactly on the cut
            const double target = std::copysign(eta_cut, yn[2]);
            const double w = (target - y[2]) / (yn[2] - y[2]);
            Vec2 x = Vec2(y[0], y[1]) + w * (Vec2(yn[0], yn[1]) - Vec2(y[0], y[1]));
            if (!correct_at_eta(problem, x, target))
                throw Error(ErrorKind::ContinuationStall, "could not land branch on the eta cutoff");
            out.pts.emplace_back(x[0], x[1], target);
            return out;
        }
        travelled += (yn - y).norm();
        if (detect_loop && travelled > 4.0 * h0) {
            const double dist = point_distance(yn, seed);
            if (dist < 0.75 * h0 || (dist < 1.5 * h && point_distance(y, seed) > dist)) {
                // closest approach to the seed reached: the curve closed
                out.closed = true;
                return out;
            }
        }
        out.pts.push_back(yn);
        y = yn;
        t = tn;
        h = std::min(h0, 1.5 * h);
    }
}

Component trace_component(const Problem& problem, const Vec3& seed, double eta_cut) {
    const CurveEval e = curve_eval(problem, seed);
    const Vec3 t = curve_tangent(e.J);
    if (!t.allFinite()) throw Error(ErrorKind::ContinuationStall, "rank-deficient curve Jacobian at seed");
    HalfTrace fwd = trace_half(problem, seed, t, eta_cut, true);
    Component c;
    std::vector<Vec3> pts;
    if (fwd.closed) {
        pts = std::move(fwd.pts);
        c.closed = true;
    } else {
        HalfTrace bwd = trace_half(problem, seed, -t, eta_cut, false);
        pts.assign(bwd.pts.rbegin(), bwd.pts.rend());
        pts.insert(pts.end(), fwd.pts.begin() + 1, fwd.pts.end());
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) s += (pts[i] - pts[i - 1]).norm();
        c.nodes.push_back({pts[i], s});
    }
    return c;
}

bool covered(const std::vector<Component>& comps, const Vec3& p, double radius) {
    for (const auto& c : comps)
        for (const auto& n : c.nodes)
            if (point_distance(n.y, p) < radius) return true;
    return false;
}

}  // namespace

std::optional<Vec2> polish_at_eta(const Problem& problem, const Vec2& guess, double eta) {
    Vec2 x = guess;
    if (!correct_at_eta(problem, x, eta)) return std::nullopt;
    return x;
}

FoldModel fold_local_model(const Problem& problem, const ExtendedPoint& p) {
    const Mat2 h = problem.hess_f_eta(p.x, p.eta);
    const Eigen::SelfAdjointEigenSolver<Mat2> es(h);
    const int k = std::abs(es.eigenvalues()[0]) < std::abs(es.eigenvalues()[1]) ? 0 : 1;
    FoldModel m;
    m.center_dir = es.eigenvectors().col(k).normalized();
    const Vec2 gm = problem.mu.gradient(p.x);
    // frame sign: choose the kernel direction so that c > 0
    if (m.center_dir.dot(gm) > 0.0) m.center_dir = -m.center_dir;
    const Vec2& v = m.center_dir;
    m.c = -v.dot(gm);
    const Tensor3 tf = problem.f.third(p.x), tm = problem.mu.third(p.x);
    double cubic = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int l = 0; l < 2; ++l) cubic += (tf[i][j][l] + p.eta * tm[i][j][l]) * v[i] * v[j] * v[l];
    m.d = -0.5 * cubic;
    m.predicted_curvature = m.c != 0.0 ? -m.d / m.c : INFINITY;
    return m;
}

double fit_fold_curvature(const Problem& problem, const FoldPoint& fold, double radius) {
    // points of C_F with prescribed center coordinate a = <v, x - x_p>; eta - eta_p ~ k a^2 + k3 a^3
    const Vec2& v = fold.center_dir;
    const Vec2 w(-v[1], v[0]);
    std::vector<double> as, es;
    const int n = 8;
    for (int i = -n; i <= n; ++i) {
        if (i == 0) continue;
        const double a = radius * i / n;
        // unknowns: transverse offset b and eta
        double b = 0.0, eta = fold.point.eta + fold.fitted_curvature * a * a;
        if (fold.fitted_curvature == 0.0) eta = fold.point.eta - fold.d / fold.c * a * a;
        bool ok = false;
        for (int it = 0; it < 50; ++it) {
            const Vec2 x = fold.point.x + a * v + b * w;
            const Vec2 g = problem.grad_f_eta(x, eta);
            if (g.cwiseAbs().maxCoeff() < 1e-14) {
                ok = true;
                break;
            }
            Mat2 J;
            J.col(0) = problem.hess_f_eta(x, eta) * w;
            J.col(1) = problem.mu.gradient(x);
            const Vec2 d = J.fullPivLu().solve(-g);
            if (!d.allFinite()) break;
            b += d[0];
            eta += d[1];
        }
        if (!ok) continue;
        as.push_back(a);
        es.push_back(eta - fold.point.eta);
    }
    if (as.size() < 4) return NAN;
    Eigen::MatrixXd A(as.size(), 2);
    Eigen::VectorXd rhs(as.size());
    for (std::size_t i = 0; i < as.size(); ++i) {
        A(i, 0) = as[i] * as[i];
        A(i, 1) = as[i] * as[i] * as[i];
        rhs[i] = es[i];
    }
    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(rhs);
    return coef[0];
}

SlowManifold trace_slow_manifold(const Problem& problem, std::span<const CritPointF> crits, double eta_cut) {
    const double h0 = problem.tol.continuation_step;
    std::vector<Vec3> seeds;
    for (const auto& c : crits) seeds.emplace_back(c.point.x[0], c.point.x[1], c.point.eta);
    const int levels = 41;
    for (int i = 0; i < levels; ++i) {
        const double eta = -eta_cut + (2.0 * eta_cut) * (i + 0.5) / levels;
        for (const auto& r : crit_points_f_eta(problem, eta)) {
            if (r.eigvals.cwiseAbs().minCoeff() < 1e-3) continue;
            seeds.emplace_back(r.x[0], r.x[1], eta);
        }
    }

    std::vector<Component> comps;
    for (const auto& s : seeds) {
        if (covered(comps, s, 2.0 * h0)) continue;
        comps.push_back(trace_component(problem, s, eta_cut));
    }

    SlowManifold m;
    m.eta_cut = eta_cut;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
        auto& comp = comps[ci];
        auto& nodes = comp.nodes;
        // locate folds between consecutive nodes and splice them in
        std::vector<BranchNode> spliced;
        std::vector<std::size_t> fold_pos;
        const std::size_t N = nodes.size();
        const std::size_t pairs = comp.closed ? N : N - 1;
        for (std::size_t i = 0; i < N; ++i) {
            spliced.push_back(nodes[i]);
            if (i >= pairs) continue;
            const BranchNode& a = nodes[i];
            const BranchNode& b = nodes[(i + 1) % N];
            // the closing pair of a loop may be offset by a lattice vector in x
            Vec3 yb = b.y;
            const Vec2 dx = torus_delta(Vec2(yb[0], yb[1]), Vec2(a.y[0], a.y[1]));
            yb.head<2>() = a.y.head<2>() + dx;
            const double da = det_hess(problem, a.y), db = det_hess(problem, yb);
            if (da == 0.0 || (da > 0) == (db > 0)) continue;
            Vec3 y = a.y + (da / (da - db)) * (yb - a.y);
            if (!locate_fold(problem, y))
                throw Error(ErrorKind::FoldDegenerate, "bordered Newton failed to converge at a fold");
            FoldPoint f;
            f.id = static_cast<int>(m.folds.size());
            f.point = ExtendedPoint::lifted(y);
            const FoldModel fm = fold_local_model(problem, f.point);
            f.center_dir = fm.center_dir;
            f.c = fm.c;
            f.d = fm.d;
            if (std::abs(f.c) < problem.tol.assumption_margin || std::abs(f.d) < problem.tol.assumption_margin)
                throw Error(ErrorKind::FoldDegenerate, "fold normal form coefficient below tolerance");
            m.folds.push_back(f);
            spliced.push_back({y, 0.0});
            fold_pos.push_back(spliced.size() - 1);
        }
        // recompute arclength
        for (std::size_t i = 0; i < spliced.size(); ++i)
            spliced[i].s = i == 0 ? 0.0 : spliced[i - 1].s + point_distance(spliced[i].y, spliced[i - 1].y);
        m.components.push_back(spliced);
        m.closed.push_back(comp.closed);

        const int first_fold = static_cast<int>(m.folds.size() - fold_pos.size());
        auto make_arc = [&](std::vector<BranchNode> arc_nodes, ArcEnd start, ArcEnd end) {
            SlowBranch b;
            b.id = static_cast<int>(m.branches.size());
            b.component = static_cast<int>(ci);
            // unwrap x so the polyline is continuous
            for (std::size_t i = 1; i < arc_nodes.size(); ++i) {
                const Vec2 prev(arc_nodes[i - 1].y[0], arc_nodes[i - 1].y[1]);
                const Vec2 d = torus_delta(Vec2(arc_nodes[i].y[0], arc_nodes[i].y[1]), prev);
                arc_nodes[i].y.head<2>() = prev + d;
            }
            for (std::size_t i = 0; i < arc_nodes.size(); ++i)
                arc_nodes[i].s = i == 0 ? 0.0 : arc_nodes[i - 1].s + (arc_nodes[i].y - arc_nodes[i - 1].y).norm();
            b.nodes = std::move(arc_nodes);
            b.start = start;
            b.end = end;
            // fast index at the node farthest from singular
            std::size_t best = b.nodes.size() / 2;
            double best_det = -1.0;
            for (std::size_t i = 0; i < b.nodes.size(); ++i) {
                const double dd = std::abs(det_hess(problem, b.nodes[i].y));
                if (dd > best_det) {
                    best_det = dd;
                    best = i;
                }
            }
            if (b.nodes.size() == 2) {
                Vec3 mid = 0.5 * (b.nodes[0].y + b.nodes[1].y);
                b.fast_index = fast_index(problem, Vec2(mid[0], mid[1]), mid[2]).index;
            } else {
                const Vec3& y = b.nodes[best].y;
                b.fast_index = fast_index(problem, Vec2(y[0], y[1]), y[2]).index;
            }
            const double e0 = b.nodes.front().y[2], e1 = b.nodes.back().y[2];
            b.eta_increasing = e1 > e0;
            b.eta_lo = std::min(e0, e1);
            b.eta_hi = std::max(e0, e1);
            for (std::size_t i = 1; i < b.nodes.size(); ++i) {
                const double de = b.nodes[i].y[2] - b.nodes[i - 1].y[2];
                if ((de > 0) != b.eta_increasing || de == 0.0) b.monotone = false;
            }
            m.branches.push_back(std::move(b));
        };

        if (fold_pos.empty()) {
            if (comp.closed) make_arc(spliced, {EndKind::Loop, -1}, {EndKind::Loop, -1});
            else make_arc(spliced, {EndKind::EtaCutoff, -1}, {EndKind::EtaCutoff, -1});
            continue;
        }
        if (!comp.closed) {
            std::size_t prev = 0;
            ArcEnd prev_end{EndKind::EtaCutoff, -1};
            for (std::size_t k = 0; k < fold_pos.size(); ++k) {
                make_arc({spliced.begin() + prev, spliced.begin() + fold_pos[k] + 1}, prev_end,
                         {EndKind::Fold, first_fold + static_cast<int>(k)});
                prev = fold_pos[k];
                prev_end = {EndKind::Fold, first_fold + static_cast<int>(k)};
            }
            make_arc({spliced.begin() + prev, spliced.end()}, prev_end, {EndKind::EtaCutoff, -1});
        } else {
            const std::size_t F = fold_pos.size();
            for (std::size_t k = 0; k < F; ++k) {
                const std::size_t a = fold_pos[k], b = fold_pos[(k + 1) % F];
                std::vector<BranchNode> arc;
                if (b > a) {
                    arc.assign(spliced.begin() + a, spliced.begin() + b + 1);
                } else {
                    arc.assign(spliced.begin() + a, spliced.end());
                    arc.insert(arc.end(), spliced.begin(), spliced.begin() + b + 1);
                }
                make_arc(std::move(arc), {EndKind::Fold, first_fold + static_cast<int>(k)},
                         {EndKind::Fold, first_fold + static_cast<int>((k + 1) % F)});
            }
        }
    }

    // fold bookkeeping from the two arcs that meet there
    for (auto& f : m.folds) {
        std::vector<int> arcs;
        for (const auto& b : m.branches)
            if ((b.start.kind == EndKind::Fold && b.start.fold == f.id) || (b.end.kind == EndKind::Fold && b.end.fold == f.id))
                arcs.push_back(b.id);
        if (arcs.size() != 2) throw Error(ErrorKind::FoldDegenerate, "fold is not shared by exactly two arcs");
        const SlowBranch& A = m.branches[arcs[0]];
        const SlowBranch& B = m.branches[arcs[1]];
        f.lower_index = std::min(A.fast_index, B.fast_index);
        f.upper_arc = A.fast_index > B.fast_index ? A.id : B.id;
        f.lower_arc = A.fast_index > B.fast_index ? B.id : A.id;
        const SlowBranch& L = m.branches[f.lower_arc];
        const bool at_start = L.start.kind == EndKind::Fold && L.start.fold == f.id;
        const double next = at_start ? L.nodes[1].y[2] : L.nodes[L.nodes.size() - 2].y[2];
        f.orientation = next > f.point.eta ? 1 : -1;
        f.fitted_curvature = fit_fold_curvature(problem, f);
    }

    // mu = 0 crossings: match to critical point ids
    for (const auto& c : crits) {
        int best = -1;
        double best_d = INFINITY;
        for (const auto& b : m.branches) {
            if (!b.contains_eta(c.point.eta)) continue;
            const auto x = branch_point_at(problem, b, c.point.eta);
            if (!x) continue;
            const double d = torus_distance(*x, c.point.x);
            if (d < best_d) {
                best_d = d;
                best = b.id;
            }
        }
        if (best >= 0 && best_d < 1e-6) m.branches[best].markers.push_back({MarkerKind::CritF, c.id, c.point.eta});
    }
    for (auto& b : m.branches) {
        std::sort(b.markers.begin(), b.markers.end(), [&](const Marker& x, const Marker& y) {
            return b.eta_increasing ? x.eta < y.eta : x.eta > y.eta;
        });
    }
    return m;
}

std::optional<Vec2> branch_point_at(const Problem& problem, const SlowBranch& arc, double eta) {
    if (!arc.contains_eta(eta) || arc.nodes.empty()) return std::nullopt;
    const auto& n = arc.nodes;
    std::size_t i = 0;
    // eta is monotone along the arc: binary search on the oriented sequence
    std::size_t lo = 0, hi = n.size() - 1;
    const auto key = [&](std::size_t k) { return arc.eta_increasing ? n[k].y[2] : -n[k].y[2]; };
    const double target = arc.eta_increasing ? eta : -eta;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (key(mid) <= target) lo = mid;
        else hi = mid;
    }
    i = lo;
    const double e0 = n[i].y[2], e1 = n[i + 1].y[2];
    const double w = e1 != e0 ? std::clamp((eta - e0) / (e1 - e0), 0.0, 1.0) : 0.0;
    Vec2 x = Vec2(n[i].y[0], n[i].y[1]) + w * (Vec2(n[i + 1].y[0], n[i + 1].y[1]) - Vec2(n[i].y[0], n[i].y[1]));
    if (w == 0.0 && eta == e0) return x;
    if (w == 1.0 && eta == e1) return Vec2(n[i + 1].y[0], n[i + 1].y[1]);
    if (!correct_at_eta(problem, x, eta)) return std::nullopt;
    return x;
}

Vec3 slow_velocity(const Problem& problem, const Vec2& x, double eta) {
    const double m = problem.mu.value(x);
    const Vec2 dxde = -problem.hess_f_eta(x, eta).fullPivLu().solve(problem.mu.gradient(x));
    const Vec2 vx = dxde * (-m);
    return {vx[0], vx[1], -m};
}

ShortOrbit short_orbit(const Problem& problem, const SlowManifold& manifold, const FoldPoint& fold, double s) {
    ShortOrbit out;
    out.s = s;
    out.eta = fold.point.eta + fold.orientation * s * s;
    const SlowBranch& up = manifold.branches.at(fold.upper_arc);
    const SlowBranch& lo = manifold.branches.at(fold.lower_arc);
    const auto a = branch_point_at(problem, up, out.eta);
    const auto b = branch_point_at(problem, lo, out.eta);
    if (!a || !b) throw Error(ErrorKind::NotFound, "short orbit endpoints not on the fold arcs");
    out.from = *a;
    out.to = *b;

    const Vec2 gap = torus_delta(*b, *a);
    const double r0 = std::min(problem.tol.shoot_radius, 1e-3 * gap.norm());
    Budget budget;
    budget.max_time = 1e7;

    const auto basin_at = [&](const Vec2& x, int id) {
        const Eigen::SelfAdjointEigenSolver<Mat2> es(problem.hess_f_eta(x, out.eta));
        return Basin{id, Vec3(x[0], x[1], out.eta), problem.tol.basin_factor * es.eigenvalues().cwiseAbs().minCoeff()};
    };
    const Basin basins[] = {basin_at(*a, 0), basin_at(*b, 1)};

    if (fold.lower_index == 0) {
        // saddle -> minimum along the saddle's unstable direction
        const Eigen::SelfAdjointEigenSolver<Mat2> es(problem.hess_f_eta(*a, out.eta));
        Vec2 u = es.eigenvectors().col(0);
        if (u.dot(gap) < 0) u = -u;
        out.trajectory = fast_integrate(problem, out.eta, *a + r0 * u, budget, basins);
        const Trajectory other = fast_integrate(problem, out.eta, *a - r0 * u, budget, basins);
        if (out.trajectory.terminal != Terminal{TerminalKind::ConvergedTo, 1})
            throw Error(ErrorKind::NotFound, "short orbit separatrix missed the lower branch point");
        out.unique = other.terminal != Terminal{TerminalKind::ConvergedTo, 1};
        // prepend the saddle itself
        FlowNode head = out.trajectory.nodes.front();
        head.y.head<2>() = *a;
        head.y[3] = 0.0;
        out.trajectory.nodes.insert(out.trajectory.nodes.begin(), head);
    } else {
        // maximum -> saddle: the saddle's stable direction, integrated backward
        const Eigen::SelfAdjointEigenSolver<Mat2> es(problem.hess_f_eta(*b, out.eta));
        Vec2 w = es.eigenvectors().col(1);
        if (w.dot(-gap) < 0) w = -w;
        FlowOptions back;
        back.reverse = true;
        const Trajectory t1 = fast_integrate(problem, out.eta, *b + r0 * w, budget, basins, back);
        const Trajectory t2 = fast_integrate(problem, out.eta, *b - r0 * w, budget, basins, back);
        if (t1.terminal != Terminal{TerminalKind::ConvergedTo, 0})
            throw Error(ErrorKind::NotFound, "short orbit separatrix missed the upper branch point");
        out.unique = t2.terminal != Terminal{TerminalKind::ConvergedTo, 0};
        out.trajectory = reversed(t1);
        out.trajectory.terminal = {TerminalKind::ConvergedTo, 1};
        FlowNode tail = out.trajectory.nodes.back();
        tail.y.head<2>() = *b;
        out.trajectory.nodes.push_back(tail);
    }
    out.trajectory.F_start = problem.f_eta(*a, out.eta);
    out.trajectory.F_end = problem.f_eta(*b, out.eta);
    for (std::size_t i = 1; i < out.trajectory.nodes.size(); ++i)
        out.length += (out.trajectory.nodes[i].y.head<2>() - out.trajectory.nodes[i - 1].y.head<2>()).norm();
    return out;
}

void to_json(nlohmann::json& j, const FoldPoint& f) {
    j = {{"id", f.id},
         {"x", {f.point.x[0], f.point.x[1]}},
         {"eta", f.point.eta},
         {"c", f.c},
         {"d", f.d},
         {"lower_index", f.lower_index},
         {"orientation", f.orientation},
         {"center_dir", {f.center_dir[0], f.center_dir[1]}},
         {"upper_arc", f.upper_arc},
         {"lower_arc", f.lower_arc},
         {"fitted_curvature", f.fitted_curvature},
         {"predicted_curvature", -f.d / f.c}};
}

void to_json(nlohmann::json& j, const SlowBranch& b) {
    nlohmann::json markers = nlohmann::json::array();
    for (const auto& mk : b.markers) markers.push_back({{"kind", to_string(mk.kind)}, {"ref", mk.ref}, {"eta", mk.eta}});
    const auto end_json = [](const ArcEnd& e) {
        nlohmann::json o = {{"kind", to_string(e.kind)}};
        if (e.kind == EndKind::Fold) o["fold"] = e.fold;
        return o;
    };
    j = {{"id", b.id},
         {"component", b.component},
         {"fast_index", b.fast_index},
         {"eta_range", {b.eta_lo, b.eta_hi}},
         {"eta_increasing", b.eta_increasing},
         {"monotone", b.monotone},
         {"nodes", b.nodes.size()},
         {"start", end_json(b.start)},
         {"end", end_json(b.end)},
         {"markers", markers}};
}

void write_branches_csv(std::ostream& os, const Problem& problem, const SlowManifold& m) {
    const auto old = os.precision(12);
    os << "branch,fast_index,s,x1,x2,eta,d_C,mu\n";
    for (const auto& b : m.branches) {
        for (const auto& n : b.nodes) {
            const Vec2 x(n.y[0], n.y[1]);
            os << b.id << ',' << b.fast_index << ',' << n.s << ',' << wrap_angle(x[0]) << ',' << wrap_angle(x[1]) << ','
               << n.y[2] << ',' << problem.hess_f_eta(x, n.y[2]).determinant() << ',' << problem.mu.value(x) << '\n';
        }
    }
    os.precision(old);
}

}  // namespace msw
