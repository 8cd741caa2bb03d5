// Acceptance run on the default configuration: one PASS/FAIL line per criterion.

#include "msw/pipeline.hpp"
#include "msw/slow.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace msw;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int n, bool ok, const std::string& what, const std::vector<std::string>& details = {}) {
    std::printf("criterion %2d %s  %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
    for (const auto& d : details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

using Counts = std::map<double, std::map<std::pair<int, int>, int>>;

Counts sweep_counts(Pipeline& pl) {
    Counts out;
    for (double l : pl.config().lambdas) {
        const auto& lc = pl.at(l);
        if (lc.regular) out[l] = counts_mod2(lc.complex);
    }
    out[0.0] = counts_mod2(pl.zero().complex);
    return out;
}

std::vector<std::string> count_diffs(const Counts& a, const Counts& b) {
    std::vector<std::string> d;
    for (const auto& [l, ca] : a) {
        auto it = b.find(l);
        if (it == b.end()) {
            d.push_back(fmt("lambda %g missing or irregular", l));
            continue;
        }
        if (ca != it->second) d.push_back(fmt("lambda %g: counts differ", l));
    }
    if (a.size() != b.size()) d.push_back("different set of regular lambdas");
    return d;
}

/// Independent slow-type oracle: along C_F, d eta / d eta-dot at a zero of mu.
double slow_rate(const Problem& p, const CritPointF& c) {
    const Vec2 gm = p.mu.gradient(c.point.x);
    return gm.dot(p.hess_f_eta(c.point.x, c.point.eta).fullPivLu().solve(gm));
}

int negatives(const Eigen::VectorXd& ev) {
    int n = 0;
    for (int i = 0; i < ev.size(); ++i) n += ev[i] < 0;
    return n;
}

}  // namespace

int main() {
    const auto out_dir = std::filesystem::temp_directory_path() / "msw_acceptance";
    std::filesystem::remove_all(out_dir);
    RunConfig cfg;
    cfg.output = out_dir.string();

    const auto t_pipeline = Clock::now();
    auto owner = std::make_unique<Pipeline>(cfg);
    Pipeline& pl = *owner;
    const Problem prob0 = pl.config().problem;

    // 1. assumption gate
    {
        std::ostringstream log;
        const auto t0 = Clock::now();
        const int code = cmd_check(pl, log);
        const double secs = seconds_since(t0);
        bool all = code == kExitOk;
        std::vector<std::string> d{fmt("check runtime %.2f s", secs)};
        for (const char* id : {"A2", "A3", "A6", "A7", "A8", "A9", "A12"}) {
            const auto* c = pl.assumptions().find(id);
            const bool pass = c && c->status == CheckStatus::Pass;
            all = all && pass;
            if (c) d.push_back(fmt("%s %s margin %.3g", id, to_string(c->status), c->margin));
        }
        verdict(1, all && secs < 30.0, "assumption gate", d);
    }

    // sweep
    for (double l : cfg.lambdas) pl.at(l);
    const auto& zero = pl.zero();

    // 2. d^2 = 0
    {
        bool ok = zero.complex.boundary_squared_zero();
        std::vector<std::string> d{fmt("C0: d^2 = 0 %s", ok ? "yes" : "no")};
        for (double l : cfg.lambdas) {
            const auto& lc = pl.at(l);
            if (!lc.regular) {
                d.push_back(fmt("lambda %g not regular: %s", l, lc.reason.c_str()));
                continue;
            }
            const bool z = lc.complex.boundary_squared_zero();
            ok = ok && z;
            d.push_back(fmt("lambda %g: d^2 = 0 %s", l, z ? "yes" : "no"));
        }
        verdict(2, ok, "d^2 = 0 over GF(2)", d);
    }

    // 3. lambda invariance against the level-set oracle
    {
        const int comps = level_set_topology(prob0).components;
        std::map<int, int> expect{{0, 0}, {1, comps}, {2, comps}, {3, 0}};
        bool ok = comps > 0;
        int regular = 0;
        std::vector<std::string> d{fmt("mu^{-1}(0) components: %d", comps)};
        for (double l : cfg.lambdas) {
            const auto& lc = pl.at(l);
            if (!lc.regular) continue;
            ++regular;
            auto b = lc.complex.betti();
            std::map<int, int> row;
            for (int k = 0; k <= 3; ++k) row[k] = b.count(k) ? b.at(k) : 0;
            for (const auto& [k, v] : b)
                if (k < 0 || k > 3) row[k] = v;
            ok = ok && row == expect;
            d.push_back(fmt("lambda %g: b = (%d, %d, %d, %d)", l, row[0], row[1], row[2], row[3]));
        }
        verdict(3, ok && regular > 0, "Betti numbers invariant in lambda", d);
    }

    // 4. large lambda
    {
        const double lmax = cfg.lambdas.back();
        bool ok = pl.at(lmax).regular;
        std::vector<std::string> d;
        if (ok) {
            const auto r = pl.compare_large(lmax);
            ok = r.generators_match && r.boundary_equal;
            d.push_back(fmt("lambda %g vs restricted complex, shift 1: %s", lmax, ok ? "equal" : "differ"));
            for (const auto& m : r.mismatches) d.push_back(m);
        }
        verdict(4, ok, "large-lambda complex equals the restricted complex", d);
    }

    // 5. small lambda and convergence
    {
        const double lmin = cfg.lambdas.front();
        bool eq = pl.at(lmin).regular;
        std::vector<std::string> d;
        if (eq) {
            const auto r = pl.compare_small(lmin);
            eq = r.generators_match && r.boundary_equal;
            d.push_back(fmt("lambda %g vs fast-slow complex: %s", lmin, eq ? "equal" : "differ"));
            for (const auto& m : r.mismatches) d.push_back(m);
        }
        bool conv = true;
        for (const auto& pc : pl.convergence()) {
            std::string line = fmt("%d -> %d:", pc.p, pc.q);
            for (std::size_t i = 0; i < pc.best.lambdas.size(); ++i)
                line += fmt(" %g@%g", pc.best.distances[i], pc.best.lambdas[i]);
            line += pc.ok() ? "  ok" : "  not monotone below 0.1";
            d.push_back(line);
            conv = conv && pc.ok();
        }
        verdict(5, eq && conv, "small-lambda complex equals the fast-slow complex, witnesses converge", d);
    }

    // 6. energy identity
    {
        double worst = 0.0;
        int n = 0;
        for (double l : cfg.lambdas)
            for (const auto& s : pl.at(l).shooting)
                for (const auto& c : s.crossings) {
                    worst = std::max(worst, c.energy_residual);
                    ++n;
                }
        verdict(6, n > 0 && worst <= 1e-4, "energy identity on counted witnesses",
                {fmt("%d witnesses, max residual %.3g", n, worst)});
    }

    // 7. index relations
    {
        const auto& crits = pl.crits();
        const auto& geo = pl.restricted().second;
        const auto bij = projection_bijection(crits, geo);
        const auto restricted = geo.all_crits();
        bool ok = bij.size() == crits.size();
        std::vector<std::string> d;
        for (const auto& c : crits) {
            Mat3 h = Mat3::Zero();
            h.topLeftCorner<2, 2>() = prob0.hess_f_eta(c.point.x, c.point.eta);
            const Vec2 gm = prob0.mu.gradient(c.point.x);
            h(0, 2) = h(2, 0) = gm[0];
            h(1, 2) = h(2, 1) = gm[1];
            const Eigen::VectorXd evF = Eigen::SelfAdjointEigenSolver<Mat3>(h).eigenvalues();
            const Eigen::VectorXd evf =
                Eigen::SelfAdjointEigenSolver<Mat2>(prob0.hess_f_eta(c.point.x, c.point.eta)).eigenvalues();
            const int iF = negatives(evF), ifast = negatives(evf);
            const bool repeller = slow_rate(prob0, c) > 0;
            const int ir = bij.count(c.id) ? restricted[static_cast<std::size_t>(bij.at(c.id))].index : -9;
            const bool morse = evF.cwiseAbs().minCoeff() > prob0.tol.degenerate_eig;
            const bool lemma = morse && iF == ir + 1 && iF == c.index_F;
            const bool slow = iF == ifast + (repeller ? 1 : 0);
            ok = ok && lemma && slow;
            d.push_back(fmt("crit %d: index_F %d, restricted %d, fast %d, %s%s", c.id, iF, ir, ifast,
                            repeller ? "repeller" : "attractor", lemma && slow ? "" : "  MISMATCH"));
        }
        verdict(7, ok, "index relations", d);
    }

    // 8. fast-slow structure rules
    {
        const auto& cat = pl.catalog();
        bool ok = true;
        int n = 0;
        std::vector<std::string> d;
        for (const auto& [pq, seqs] : zero.orbits)
            for (const auto& s : seqs) {
                ++n;
                bool good = s.parity_ok();
                for (const auto& seg : s.segments) {
                    if (seg.kind != SegmentKind::Slow) continue;
                    const auto& arc = cat.manifold.branches.at(static_cast<std::size_t>(seg.arc));
                    const double lo = std::min(seg.eta_from, seg.eta_to), hi = std::max(seg.eta_from, seg.eta_to);
                    const double span = hi - lo;
                    good = good && span > 0 && arc.contains_eta(lo) && arc.contains_eta(hi);
                    const double dir = seg.eta_to > seg.eta_from ? 1.0 : -1.0;
                    // interior samples: mu keeps one sign and drives eta the right way
                    for (int k = 1; k < 40 && good; ++k) {
                        const double eta = lo + span * k / 40.0;
                        const auto x = branch_point_at(prob0, arc, eta);
                        good = x && -prob0.mu.value(*x) * dir > 0;
                    }
                }
                if (!good) d.push_back(fmt("orbit %d -> %d violates parity or slow regularity", s.p, s.q));
                ok = ok && good;
            }
        d.insert(d.begin(), fmt("%d fast-slow orbits checked", n));
        verdict(8, ok && n > 0, "fast-slow case parity and slow regularity", d);
    }

    // 9. fold scaling
    {
        const auto t0 = Clock::now();
        const auto fs = fold_scaling(cfg.fold_epsilons, cfg.fold_delta);
        const double secs = seconds_since(t0);
        std::vector<std::string> d{fmt("delta %g, slope %.4f (target 0.6667 +- 0.05), %.3f s", cfg.fold_delta,
                                       fs.slope, secs)};
        for (const auto& r : fs.runs) d.push_back(fmt("eps %g: rho %.6g", r.epsilon, r.rho));
        verdict(9, std::abs(fs.slope - 2.0 / 3.0) <= 0.05 && secs < 10.0, "fold exit exponent", d);
    }

    // 10. numerical hygiene
    {
        pl.convergence();
        const double pipeline_secs = seconds_since(t_pipeline);
        const Counts base = sweep_counts(pl);
        // witnesses of one pipeline take most of the memory; keep one alive at a time
        owner.reset();
        std::vector<std::string> d{fmt("default pipeline %.1f s", pipeline_secs)};

        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi), ue(-3, 3);
        double worst = 0.0;
        const double h = 1e-5;
        for (int i = 0; i < 100; ++i) {
            const Vec2 x(u(rng), u(rng));
            const double eta = ue(rng);
            Vec2 fdf, fdm;
            Vec3 fdF;
            for (int k = 0; k < 2; ++k) {
                const Vec2 e = Vec2::Unit(k) * h;
                fdf[k] = (prob0.f.value(x + e) - prob0.f.value(x - e)) / (2 * h);
                fdm[k] = (prob0.mu.value(x + e) - prob0.mu.value(x - e)) / (2 * h);
            }
            const Vec3 y(x[0], x[1], eta);
            for (int k = 0; k < 3; ++k) {
                const Vec3 e = Vec3::Unit(k) * h;
                fdF[k] = (prob0.F(Vec3(y + e)) - prob0.F(Vec3(y - e))) / (2 * h);
            }
            const Vec3 aF = -grad_F(prob0, y, 1.0);
            worst = std::max({worst, (prob0.f.gradient(x) - fdf).norm() / std::max(1.0, fdf.norm()),
                              (prob0.mu.gradient(x) - fdm).norm() / std::max(1.0, fdm.norm()),
                              (aF - fdF).norm() / std::max(1.0, fdF.norm())});
        }
        d.push_back(fmt("max gradient rel. error %.3g over 100 points", worst));

        bool invariant = true;
        {
            RunConfig half = cfg;
            half.problem = halved_tolerances(cfg.problem);
            Pipeline ph(half);
            const auto diffs = count_diffs(base, sweep_counts(ph));
            invariant = invariant && diffs.empty();
            d.push_back(fmt("halved tolerances: %s", diffs.empty() ? "counts unchanged" : "counts changed"));
            for (const auto& s : diffs) d.push_back("  " + s);
        }
        {
            RunConfig pert = cfg;
            pert.problem = perturbed(cfg.problem, cfg.seed);
            Pipeline pp(pert);
            const auto diffs = count_diffs(base, sweep_counts(pp));
            invariant = invariant && diffs.empty();
            d.push_back(fmt("perturbed shooting (seed %llu, radius %.3g, samples %d): %s",
                            static_cast<unsigned long long>(cfg.seed), pert.problem.tol.shoot_radius,
                            pert.problem.tol.angle_samples, diffs.empty() ? "counts unchanged" : "counts changed"));
            for (const auto& s : diffs) d.push_back("  " + s);
        }
        verdict(10, worst <= 1e-6 && invariant && pipeline_secs < 600.0, "numerical hygiene", d);
    }

    std::filesystem::remove_all(out_dir);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
