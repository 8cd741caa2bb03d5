#include "msw/homology.hpp"

#include "msw/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

namespace msw {

Z2Matrix::Z2Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), words_((cols + 63) / 64), bits_(static_cast<std::size_t>(rows) * ((cols + 63) / 64), 0) {}

bool Z2Matrix::get(int r, int c) const { return (row(r)[c / 64] >> (c % 64)) & 1u; }

void Z2Matrix::set(int r, int c, bool v) {
    std::uint64_t& w = bits_[static_cast<std::size_t>(r) * words_ + c / 64];
    const std::uint64_t mask = std::uint64_t{1} << (c % 64);
    w = v ? (w | mask) : (w & ~mask);
}

void Z2Matrix::flip(int r, int c) { bits_[static_cast<std::size_t>(r) * words_ + c / 64] ^= std::uint64_t{1} << (c % 64); }

bool Z2Matrix::is_zero() const {
    return std::all_of(bits_.begin(), bits_.end(), [](std::uint64_t w) { return w == 0; });
}

Z2Matrix operator*(const Z2Matrix& a, const Z2Matrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorKind::GraphInconsistency, "GF(2) product shape mismatch");
    Z2Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        std::uint64_t* dst = out.bits_.data() + static_cast<std::size_t>(i) * out.words_;
        for (int k = 0; k < a.cols(); ++k) {
            if (!a.get(i, k)) continue;
            const std::uint64_t* src = b.row(k);
            for (int w = 0; w < out.words_; ++w) dst[w] ^= src[w];
        }
    }
    return out;
}

bool operator==(const Z2Matrix& a, const Z2Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bits_ == b.bits_;
}

std::vector<std::vector<int>> Z2Matrix::to_rows() const {
    std::vector<std::vector<int>> out(rows_, std::vector<int>(cols_, 0));
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) out[r][c] = get(r, c) ? 1 : 0;
    return out;
}

Z2Reduction z2_reduce(const Z2Matrix& m) {
    const int R = m.rows(), C = m.cols(), W = m.words();
    std::vector<std::vector<std::uint64_t>> rows(R);
    for (int r = 0; r < R; ++r) rows[r].assign(m.row(r), m.row(r) + W);
    const auto bit = [](const std::vector<std::uint64_t>& v, int c) { return (v[c / 64] >> (c % 64)) & 1u; };

    Z2Reduction out;
    int pr = 0;
    for (int c = 0; c < C && pr < R; ++c) {
        int piv = -1;
        for (int r = pr; r < R; ++r)
            if (bit(rows[r], c)) {
                piv = r;
                break;
            }
        if (piv < 0) continue;
        std::swap(rows[pr], rows[piv]);
        for (int r = 0; r < R; ++r) {
            if (r == pr || !bit(rows[r], c)) continue;
            for (int w = 0; w < W; ++w) rows[r][w] ^= rows[pr][w];
        }
        out.pivot_cols.push_back(c);
        ++pr;
    }
    out.rank = pr;
    std::vector<bool> is_pivot(C, false);
    for (int c : out.pivot_cols) is_pivot[c] = true;
    for (int f = 0; f < C; ++f) {
        if (is_pivot[f]) continue;
        std::vector<int> v(C, 0);
        v[f] = 1;
        for (int i = 0; i < out.rank; ++i)
            if (bit(rows[i], f)) v[out.pivot_cols[i]] = 1;
        out.kernel.push_back(std::move(v));
    }
    return out;
}

const char* to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::Lambda: return "Lambda";
        case Provenance::Zero: return "Zero";
        case Provenance::Restricted: return "Restricted";
    }
    return "?";
}

Z2Matrix Z2ChainComplex::d(int k) const {
    if (auto it = boundary.find(k); it != boundary.end()) return it->second;
    const auto size = [&](int deg) {
        auto g = generators.find(deg);
        return g == generators.end() ? 0 : static_cast<int>(g->second.size());
    };
    return Z2Matrix(size(k - 1), size(k));
}

int Z2ChainComplex::rank_of(int k) const { return z2_reduce(d(k)).rank; }

std::pair<int, int> Z2ChainComplex::degree_range() const {
    int lo = 0, hi = -1;
    bool first = true;
    for (const auto& [k, g] : generators) {
        if (g.empty()) continue;
        if (first) {
            lo = hi = k;
            first = false;
        }
        lo = std::min(lo, k);
        hi = std::max(hi, k);
    }
    return {lo, hi};
}

bool Z2ChainComplex::boundary_squared_zero() const {
    const auto [lo, hi] = degree_range();
    for (int k = lo; k < hi; ++k) {
        const Z2Matrix a = d(k), b = d(k + 1);
        if (a.cols() == 0 || b.cols() == 0 || a.rows() == 0) continue;
        if (!(a * b).is_zero()) return false;
    }
    return true;
}

std::map<int, int> Z2ChainComplex::betti() const {
    std::map<int, int> out;
    for (const auto& [k, g] : generators) {
        const int dim = static_cast<int>(g.size());
        out[k] = dim - rank_of(k) - rank_of(k + 1);
    }
    return out;
}

std::vector<RestrictedCrit> LevelSetGeometry::all_crits() const {
    std::vector<RestrictedCrit> out;
    for (const auto& c : components) out.insert(out.end(), c.crits.begin(), c.crits.end());
    std::sort(out.begin(), out.end(), [](const RestrictedCrit& a, const RestrictedCrit& b) { return a.id < b.id; });
    return out;
}

namespace {

bool project_to_level(const Problem& problem, Vec2& x, double tol) {
    for (int it = 0; it < 30; ++it) {
        const double m = problem.mu.value(x);
        if (std::abs(m) <= tol) return true;
        const Vec2 g = problem.mu.gradient(x);
        const double n2 = g.squaredNorm();
        if (n2 < 1e-24) return false;
        x -= (m / n2) * g;
    }
    return std::abs(problem.mu.value(x)) <= tol;
}

Vec2 level_tangent(const Problem& problem, const Vec2& x) {
    const Vec2 g = problem.mu.gradient(x);
    return Vec2(-g[1], g[0]).normalized();
}

// Seeds: one polished zero of mu on every grid edge with a sign change.
std::vector<Vec2> marching_seeds(const Problem& problem, int n) {
    std::vector<Vec2> seeds;
    const double h = kTwoPi / n;
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(i) * n + j] = problem.mu.value(Vec2(i * h, j * h));
    const auto at = [&](int i, int j) { return v[static_cast<std::size_t>((i + n) % n) * n + (j + n) % n]; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double a = at(i, j);
            for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
                const double b = at(i + di, j + dj);
                if ((a > 0) == (b > 0)) continue;
                const double w = a / (a - b);
                seeds.emplace_back((i + w * di) * h, (j + w * dj) * h);
            }
        }
    }
    return seeds;
}

LevelCircle trace_circle(const Problem& problem, Vec2 start) {
    const double h = 0.01;
    const double tol = problem.tol.trace_tol;
    LevelCircle c;
    if (!project_to_level(problem, start, tol)) throw Error(ErrorKind::TraceFailure, "seed does not project onto mu = 0");
    c.polyline.push_back(start);
    Vec2 x = start;
    Vec2 t = level_tangent(problem, x);
    double travelled = 0.0;
    const double max_len = 200.0;
    while (travelled < max_len) {
        Vec2 y = x + h * t;
        if (!project_to_level(problem, y, tol)) throw Error(ErrorKind::TraceFailure, "projection onto mu = 0 failed");
        Vec2 tn = level_tangent(problem, y);
        if (tn.dot(t) < 0) throw Error(ErrorKind::TraceFailure, "level curve tangent reversed");
        travelled += (y - x).norm();
        if (travelled > 4 * h && torus_distance(y, start) < 0.75 * h) {
            c.closed = true;
            // close with the lifted copy of the start point
            c.polyline.push_back(y + torus_delta(start, y));
            c.length = travelled + torus_distance(y, start);
            return c;
        }
        c.polyline.push_back(y);
        x = y;
        t = tn;
    }
    throw Error(ErrorKind::TraceFailure, "level set component does not close");
}

bool near_polyline(const LevelCircle& c, const Vec2& p, double r) {
    return std::any_of(c.polyline.begin(), c.polyline.end(), [&](const Vec2& q) { return torus_distance(p, q) < r; });
}

// g = <grad f, tau~> with tau~ = (-mu_2, mu_1); zero at restricted critical points.
double tangential(const Problem& problem, const Vec2& x) {
    const Vec2 gf = problem.f.gradient(x), gm = problem.mu.gradient(x);
    return -gf[0] * gm[1] + gf[1] * gm[0];
}

Vec2 tangential_grad(const Problem& problem, const Vec2& x) {
    const Vec2 gf = problem.f.gradient(x), gm = problem.mu.gradient(x);
    const Mat2 hf = problem.f.hessian(x), hm = problem.mu.hessian(x);
    Vec2 out;
    for (int k = 0; k < 2; ++k) out[k] = -hf(0, k) * gm[1] - gf[0] * hm(1, k) + hf(1, k) * gm[0] + gf[1] * hm(0, k);
    return out;
}

bool polish_restricted(const Problem& problem, Vec2& x) {
    for (int it = 0; it < 40; ++it) {
        const Vec2 r(problem.mu.value(x), tangential(problem, x));
        if (r.cwiseAbs().maxCoeff() < 1e-14) return true;
        Mat2 J;
        J.row(0) = problem.mu.gradient(x).transpose();
        J.row(1) = tangential_grad(problem, x).transpose();
        const Vec2 dx = J.fullPivLu().solve(-r);
        if (!dx.allFinite()) return false;
        x += dx;
    }
    return std::abs(problem.mu.value(x)) < 1e-12 && std::abs(tangential(problem, x)) < 1e-12;
}

}  // namespace

LevelSetGeometry trace_level_set(const Problem& problem, int grid) {
    if (grid <= 0) grid = problem.tol.level_grid;
    LevelSetGeometry geo;
    for (const Vec2& s : marching_seeds(problem, grid)) {
        const bool seen = std::any_of(geo.components.begin(), geo.components.end(),
                                      [&](const LevelCircle& c) { return near_polyline(c, s, 0.05); });
        if (seen) continue;
        geo.components.push_back(trace_circle(problem, s));
    }
    // deterministic order: by the lowest (x1, x2) point of each circle
    const auto key = [](const LevelCircle& c) {
        Vec2 best = wrap(c.polyline.front());
        for (const auto& p : c.polyline) {
            const Vec2 q = wrap(p);
            if (std::tie(q[0], q[1]) < std::tie(best[0], best[1])) best = q;
        }
        return std::pair{best[0], best[1]};
    };
    std::sort(geo.components.begin(), geo.components.end(),
              [&](const LevelCircle& a, const LevelCircle& b) { return key(a) < key(b); });
    return geo;
}

LevelSetTopology level_set_topology(const Problem& problem, int grid) {
    const LevelSetGeometry geo = trace_level_set(problem, grid);
    LevelSetTopology t;
    t.components = static_cast<int>(geo.components.size());
    for (const auto& c : geo.components) t.lengths.push_back(c.length);
    return t;
}

std::pair<Z2ChainComplex, LevelSetGeometry> build_restricted_complex(const Problem& problem) {
    LevelSetGeometry geo = trace_level_set(problem);
    int next_id = 0;
    for (auto& c : geo.components) {
        const auto& P = c.polyline;
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < P.size(); ++i) {
            const double a = tangential(problem, P[i]), b = tangential(problem, P[i + 1]);
            const double seg = (P[i + 1] - P[i]).norm();
            if (a != 0.0 && (a > 0) != (b > 0)) {
                Vec2 x = P[i] + (a / (a - b)) * (P[i + 1] - P[i]);
                if (!polish_restricted(problem, x))
                    throw Error(ErrorKind::TraceFailure, "restricted critical point did not converge");
                RestrictedCrit rc;
                rc.x = wrap(x);
                // f increases along the traversal direction after a minimum
                rc.index = b > 0 ? 0 : 1;
                rc.value = problem.f.value(x);
                rc.s = s + seg * (a / (a - b));
                c.crits.push_back(rc);
            }
            s += seg;
        }
        for (std::size_t i = 0; i < c.crits.size(); ++i) {
            if (c.crits[i].index == c.crits[(i + 1) % c.crits.size()].index)
                throw Error(ErrorKind::TraceFailure, "restricted critical points do not alternate on a circle");
        }
    }
    // ids: sorted by position so the labelling does not depend on trace seeds
    std::vector<RestrictedCrit*> all;
    for (auto& c : geo.components)
        for (auto& rc : c.crits) all.push_back(&rc);
    std::sort(all.begin(), all.end(), [](const RestrictedCrit* a, const RestrictedCrit* b) {
        return std::tie(a->x[0], a->x[1]) < std::tie(b->x[0], b->x[1]);
    });
    for (auto* rc : all) rc->id = next_id++;

    std::map<int, std::vector<int>> gens;
    std::map<std::pair<int, int>, int> entries;
    for (const auto& c : geo.components) {
        const std::size_t n = c.crits.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rc = c.crits[i];
            gens[rc.index].push_back(rc.id);
            if (rc.index != 1) continue;
            // one gradient arc to each cyclic neighbour
            for (const std::size_t j : {(i + n - 1) % n, (i + 1) % n}) entries[{rc.id, c.crits[j].id}] ^= 1;
        }
    }
    gens.try_emplace(0);
    gens.try_emplace(1);
    for (auto& [k, g] : gens) std::sort(g.begin(), g.end());
    Z2ChainComplex cx = make_complex(
        gens,
        [&](int p, int q) {
            auto it = entries.find({p, q});
            return it != entries.end() && it->second == 1;
        },
        Provenance::Restricted);
    return {std::move(cx), std::move(geo)};
}

namespace {

bool entry_of(const Z2ChainComplex& c, int k, int p, int q) {
    const auto& gk = c.generators.at(k);
    const auto& gl = c.generators.at(k - 1);
    const auto col = std::find(gk.begin(), gk.end(), p) - gk.begin();
    const auto row = std::find(gl.begin(), gl.end(), q) - gl.begin();
    return c.d(k).get(static_cast<int>(row), static_cast<int>(col));
}

}  // namespace

ComparisonReport compare_shifted(const Z2ChainComplex& a, const Z2ChainComplex& b, const std::map<int, int>& bijection,
                                 int shift) {
    ComparisonReport r;
    r.betti_a = a.betti();
    r.betti_b = b.betti();
    const auto count = [](const Z2ChainComplex& c, int k) {
        auto it = c.generators.find(k);
        return it == c.generators.end() ? std::size_t{0} : it->second.size();
    };
    std::set<int> degrees;
    for (const auto& [k, _] : a.generators) degrees.insert(k);
    for (const auto& [k, _] : b.generators) degrees.insert(k + shift);
    for (int k : degrees) {
        if (count(a, k) != count(b, k - shift))
            throw Error(ErrorKind::BijectionMismatch, "generator counts differ in degree " + std::to_string(k));
    }
    r.generators_match = true;
    for (const auto& [k, gens] : a.generators) {
        const auto bk = b.generators.find(k - shift);
        for (int g : gens) {
            auto it = bijection.find(g);
            if (it == bijection.end() || bk == b.generators.end() ||
                std::find(bk->second.begin(), bk->second.end(), it->second) == bk->second.end()) {
                r.generators_match = false;
                r.mismatches.push_back("generator " + std::to_string(g) + " has no image in degree " +
                                       std::to_string(k - shift));
            }
        }
    }
    r.boundary_equal = r.generators_match;
    if (r.generators_match) {
        for (const auto& [k, gens] : a.generators) {
            auto lower = a.generators.find(k - 1);
            if (lower == a.generators.end()) continue;
            for (int p : gens) {
                for (int q : lower->second) {
                    const bool ea = entry_of(a, k, p, q);
                    const bool eb = entry_of(b, k - shift, bijection.at(p), bijection.at(q));
                    if (ea != eb) {
                        r.boundary_equal = false;
                        r.mismatches.push_back("entry <d " + std::to_string(p) + ", " + std::to_string(q) + ">: " +
                                               std::to_string(ea) + " vs " + std::to_string(eb));
                    }
                }
            }
        }
    }
    r.betti_equal = true;
    for (int k : degrees) {
        const int ba = r.betti_a.count(k) ? r.betti_a.at(k) : 0;
        const int bb = r.betti_b.count(k - shift) ? r.betti_b.at(k - shift) : 0;
        if (ba != bb) r.betti_equal = false;
    }
    return r;
}

std::map<int, int> projection_bijection(std::span<const CritPointF> crits, const LevelSetGeometry& geo, double tol) {
    std::map<int, int> out;
    const auto all = geo.all_crits();
    for (const auto& c : crits) {
        for (const auto& rc : all) {
            if (torus_distance(c.point.x, rc.x) < tol) {
                out[c.id] = rc.id;
                break;
            }
        }
    }
    return out;
}

void to_json(nlohmann::json& j, const Z2ChainComplex& c) {
    nlohmann::json gens = nlohmann::json::object(), bd = nlohmann::json::object();
    for (const auto& [k, g] : c.generators) gens[std::to_string(k)] = g;
    for (const auto& [k, m] : c.boundary) bd[std::to_string(k)] = m.to_rows();
    nlohmann::json betti = nlohmann::json::object();
    for (const auto& [k, b] : c.betti()) betti[std::to_string(k)] = b;
    j = {{"provenance", to_string(c.provenance)},
         {"generators", gens},
         {"boundary", bd},
         {"betti", betti},
         {"boundary_squared_zero", c.boundary_squared_zero()}};
    if (c.provenance == Provenance::Lambda) j["lambda"] = c.lambda;
}

void to_json(nlohmann::json& j, const ComparisonReport& r) {
    const auto bm = [](const std::map<int, int>& m) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [k, v] : m) o[std::to_string(k)] = v;
        return o;
    };
    j = {{"generators_match", r.generators_match},
         {"boundary_equal", r.boundary_equal},
         {"betti_equal", r.betti_equal},
         {"betti_a", bm(r.betti_a)},
         {"betti_b", bm(r.betti_b)},
         {"mismatches", r.mismatches}};
}

}  // namespace msw
