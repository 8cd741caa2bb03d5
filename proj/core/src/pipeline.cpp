#include "msw/pipeline.hpp"

#include "msw/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace msw {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ config

namespace {

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "bad value for '" + key + "': " + e.what());
    }
}

std::vector<double> positive_list(const nlohmann::json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) throw Error(ErrorKind::Config, "'" + key + "' must be a non-empty list");
    auto out = get_as<std::vector<double>>(v, key);
    for (double x : out)
        if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorKind::Config, "'" + key + "' entries must be positive");
    return out;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "problem") {
            if (!v.is_object()) throw Error(ErrorKind::Config, "'problem' must be an object");
            for (const auto& [pk, pv] : v.items()) {
                if (pk == "f") c.problem.f = get_as<TorusField>(pv, "problem.f");
                else if (pk == "mu") c.problem.mu = get_as<TorusField>(pv, "problem.mu");
                else if (pk == "eta_max") c.problem.eta_max = get_as<double>(pv, "problem.eta_max");
                else throw Error(ErrorKind::Config, "unknown key 'problem." + pk + "'");
            }
        } else if (key == "tolerances") {
            update_from_json(v, c.problem.tol);
        } else if (key == "lambdas") {
            c.lambdas = positive_list(v, key);
        } else if (key == "lambda") {
            c.lambda = get_as<double>(v, key);
            if (!(c.lambda > 0.0)) throw Error(ErrorKind::Config, "'lambda' must be positive");
        } else if (key == "convergence_lambdas") {
            c.convergence_lambdas = positive_list(v, key);
        } else if (key == "proximity") {
            c.proximity = get_as<double>(v, key);
        } else if (key == "fold_epsilons") {
            c.fold_epsilons = positive_list(v, key);
        } else if (key == "fold_delta") {
            c.fold_delta = get_as<double>(v, key);
        } else if (key == "output") {
            c.output = get_as<std::string>(v, key);
        } else if (key == "workers") {
            c.workers = get_as<int>(v, key);
            if (c.workers < 1) throw Error(ErrorKind::Config, "'workers' must be at least 1");
        } else if (key == "seed") {
            c.seed = get_as<std::uint64_t>(v, key);
        } else {
            throw Error(ErrorKind::Config, "unknown key '" + key + "'");
        }
    }
    if (c.problem.f.empty() || c.problem.mu.empty()) throw Error(ErrorKind::Config, "f and mu need at least one term");
    if (c.fold_delta < 0.05 || c.fold_delta > 0.5) throw Error(ErrorKind::Config, "'fold_delta' must lie in [0.05, 0.5]");
    if (!std::is_sorted(c.fold_epsilons.rbegin(), c.fold_epsilons.rend()))
        throw Error(ErrorKind::Config, "'fold_epsilons' must be decreasing");
    return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json tol;
    to_json(tol, c.problem.tol);
    return {{"problem", {{"f", c.problem.f}, {"mu", c.problem.mu}, {"eta_max", c.problem.eta_max}}},
            {"tolerances", tol},
            {"lambdas", c.lambdas},
            {"lambda", c.lambda},
            {"convergence_lambdas", c.convergence_lambdas},
            {"proximity", c.proximity},
            {"fold_epsilons", c.fold_epsilons},
            {"fold_delta", c.fold_delta},
            {"output", c.output},
            {"workers", c.workers},
            {"seed", c.seed}};
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

Problem perturbed(const Problem& problem, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.7, 1.4);
    std::uniform_int_distribution<int> extra(-8, 16);
    Problem out = problem;
    out.tol.shoot_radius *= scale(rng);
    out.tol.pair_separation *= scale(rng);
    out.tol.angle_samples = std::max(16, out.tol.angle_samples + extra(rng));
    return out;
}

Problem halved_tolerances(const Problem& problem) {
    Problem out = problem;
    auto& t = out.tol;
    t.rtol *= 0.5;
    t.atol *= 0.5;
    t.max_step *= 0.5;
    t.newton_tol *= 0.5;
    t.continuation_tol *= 0.5;
    t.continuation_step *= 0.5;
    t.eta_bisection_tol *= 0.5;
    t.trace_step *= 0.5;
    t.trace_tol *= 0.5;
    return out;
}

nlohmann::json rounded(const nlohmann::json& j, int digits) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (!std::isfinite(v)) return nullptr;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        return std::strtod(buf, nullptr);
    }
    if (j.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& v : j) out.push_back(rounded(v, digits));
        return out;
    }
    if (j.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : j.items()) out[k] = rounded(v, digits);
        return out;
    }
    return j;
}

std::map<std::pair<int, int>, int> counts_mod2(const Z2ChainComplex& c) {
    std::map<std::pair<int, int>, int> out;
    for (const auto& [k, gens] : c.generators) {
        auto lower = c.generators.find(k - 1);
        if (lower == c.generators.end()) continue;
        const Z2Matrix d = c.d(k);
        for (std::size_t j = 0; j < gens.size(); ++j)
            for (std::size_t i = 0; i < lower->second.size(); ++i)
                out[{gens[j], lower->second[i]}] = d.get(static_cast<int>(i), static_cast<int>(j)) ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {}

const Problem& Pipeline::problem() {
    crits();
    return config_.problem;
}

const std::vector<CritPointF>& Pipeline::crits() {
    if (!crits_) {
        crits_ = find_crit_F(config_.problem, config_.problem.tol.seed_grid);
        if (config_.problem.eta_max <= 0.0) {
            auto& pr = config_.problem;
            pr.eta_max = eta_bound(pr, *crits_);
            // folds count toward the bound too; retrace until it covers them
            try {
                for (int round = 0; round < 4; ++round) {
                    catalog_ = build_catalog(pr, *crits_);
                    double m = pr.eta_max - pr.tol.eta_margin;
                    for (const auto& f : catalog_->manifold.folds) m = std::max(m, std::abs(f.point.eta));
                    if (m + pr.tol.eta_margin <= pr.eta_max) break;
                    pr.eta_max = m + pr.tol.eta_margin;
                    catalog_.reset();
                }
            } catch (const Error&) {
                catalog_.reset();  // catalog() raises it again for the caller
            }
        }
    }
    return *crits_;
}

const Catalog& Pipeline::catalog() {
    if (!catalog_) {
        const auto& c = crits();
        catalog_ = build_catalog(config_.problem, c);
    }
    return *catalog_;
}

const AssumptionReport& Pipeline::assumptions() {
    if (!assumptions_) {
        const auto& c = crits();
        const Catalog* cat = nullptr;
        try {
            cat = &catalog();
        } catch (const Error&) {
            // the checker rebuilds it and reports what failed
        }
        assumptions_ = check_assumptions(config_.problem, c, cat);
    }
    return *assumptions_;
}

const LambdaComplex& Pipeline::at(double lambda) {
    auto it = complexes_.find(lambda);
    if (it == complexes_.end()) {
        const auto& c = crits();
        ShootingOptions opt;
        opt.workers = config_.workers;
        it = complexes_.emplace(lambda, build_complex_lambda(config_.problem, c, lambda, opt)).first;
    }
    return it->second;
}

const ZeroComplex& Pipeline::zero() {
    if (!zero_) {
        const auto& c = crits();
        const auto& cat = catalog();
        zero_ = build_complex_zero(config_.problem, c, cat);
    }
    return *zero_;
}

const std::pair<Z2ChainComplex, LevelSetGeometry>& Pipeline::restricted() {
    if (!restricted_) restricted_ = build_restricted_complex(config_.problem);
    return *restricted_;
}

const std::vector<PairConvergence>& Pipeline::convergence() {
    if (convergence_) return *convergence_;
    std::vector<PairConvergence> out;
    const auto& z = zero();
    const auto& lambdas = config_.convergence_lambdas;
    for (const auto& [pq, seqs] : z.orbits) {
        if (seqs.size() % 2 == 0) continue;
        std::vector<std::vector<const Trajectory*>> witnesses;
        for (double lambda : lambdas) {
            auto& w = witnesses.emplace_back();
            const auto* s = at(lambda).from(pq.first);
            if (!s) continue;
            for (const auto& x : s->crossings)
                if (x.target == pq.second) w.push_back(&x.witness);
        }
        PairConvergence pc;
        pc.p = pq.first;
        pc.q = pq.second;
        pc.orbits = static_cast<int>(seqs.size());
        bool first = true;
        for (const auto& seq : seqs) {
            auto r = check_convergence(config_.problem, seq, catalog(), lambdas, witnesses, config_.proximity);
            if (first || r.distances.back() < pc.best.distances.back()) pc.best = std::move(r);
            first = false;
        }
        out.push_back(std::move(pc));
    }
    convergence_ = std::move(out);
    return *convergence_;
}

const FoldScaling& Pipeline::foldtest() {
    if (!foldtest_) foldtest_ = fold_scaling(config_.fold_epsilons, config_.fold_delta);
    return *foldtest_;
}

ComparisonReport Pipeline::compare_large(double lambda) {
    const auto& c = crits();
    const auto& [rc, geo] = restricted();
    return compare_shifted(at(lambda).complex, rc, projection_bijection(c, geo), 1);
}

ComparisonReport Pipeline::compare_small(double lambda) {
    std::map<int, int> identity;
    for (const auto& c : crits()) identity[c.id] = c.id;
    return compare_shifted(at(lambda).complex, zero().complex, identity, 0);
}

namespace {

// Betti row over the degrees present in any complex of the sweep, zeros filled in.
std::vector<int> betti_row(const Z2ChainComplex& c, int lo, int hi) {
    const auto b = c.betti();
    std::vector<int> row;
    for (int k = lo; k <= hi; ++k) {
        auto it = b.find(k);
        row.push_back(it == b.end() ? 0 : it->second);
    }
    return row;
}

}  // namespace

Verdict Pipeline::verdict() {
    Verdict v;
    const auto& lambdas = config_.lambdas;
    const double lo = *std::min_element(lambdas.begin(), lambdas.end());
    const double hi = *std::max_element(lambdas.begin(), lambdas.end());

    const int components = static_cast<int>(restricted().second.components.size());
    std::optional<std::vector<int>> first;
    v.invariance = true;
    int regular = 0;
    for (double lambda : lambdas) {
        const auto& lc = at(lambda);
        if (!lc.regular) {
            v.notes.push_back("lambda " + std::to_string(lambda) + " not regular: " + lc.reason);
            continue;
        }
        ++regular;
        const auto row = betti_row(lc.complex, 0, 3);
        if (!first) first = row;
        else if (row != *first) v.invariance = false;
    }
    if (!first || regular < 2) {
        v.invariance = false;
        v.notes.push_back("fewer than two regular lambdas in the sweep");
    } else {
        const std::vector<int> expected{0, components, components, 0};
        if (*first != expected) {
            v.invariance = false;
            v.notes.push_back("Betti row differs from (0, c, c, 0) with c = " + std::to_string(components));
        }
    }

    if (at(hi).regular) {
        const auto cmp = compare_large(hi);
        v.large_lambda = cmp.generators_match && cmp.boundary_equal;
        for (const auto& m : cmp.mismatches) v.notes.push_back("large lambda: " + m);
    } else {
        v.notes.push_back("largest lambda not regular");
    }
    if (at(lo).regular) {
        const auto cmp = compare_small(lo);
        v.small_lambda = cmp.generators_match && cmp.boundary_equal;
        for (const auto& m : cmp.mismatches) v.notes.push_back("small lambda: " + m);
    } else {
        v.notes.push_back("smallest lambda not regular");
    }
    return v;
}

nlohmann::json Pipeline::sweep_json() {
    nlohmann::json rows = nlohmann::json::array();
    for (double lambda : config_.lambdas) rows.push_back(at(lambda));
    return rows;
}

// ---------------------------------------------------------------- commands

namespace {

std::string lambda_tag(double lambda) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", lambda);
    return buf;
}

struct Out {
    fs::path root;

    explicit Out(const std::string& dir) : root(dir) {
        fs::create_directories(root / "tables");
        fs::create_directories(root / "witnesses");
    }

    std::ofstream open(const fs::path& rel) const {
        std::ofstream os(root / rel);
        if (!os) throw Error(ErrorKind::Config, "cannot write " + (root / rel).string());
        os << std::setprecision(12);
        return os;
    }

    void report(const std::string& command, nlohmann::json body) const {
        body["command"] = command;
        open("report.json") << rounded(body).dump(2) << "\n";
    }
};

void write_crit_table(const Out& out, std::span<const CritPointF> crits) {
    auto os = out.open("tables/critical_points.csv");
    os << "id,x1,x2,eta,F,index_F,fast_index,slow_type\n";
    for (const auto& c : crits)
        os << c.id << ',' << c.point.x[0] << ',' << c.point.x[1] << ',' << c.point.eta << ',' << c.F << ','
           << c.index_F << ',' << c.fast_index << ',' << to_string(c.slow_type) << '\n';
}

void write_complex_tables(const Out& out, const Problem& problem, const LambdaComplex& lc) {
    const std::string tag = lambda_tag(lc.lambda);
    auto os = out.open("tables/boundary_lambda_" + tag + ".csv");
    os << "p,q,raw,mod2\n";
    for (const auto& [pq, m] : counts_mod2(lc.complex)) {
        const auto* s = lc.from(pq.first);
        os << pq.first << ',' << pq.second << ',' << (s ? s->count(pq.second) : 0) << ',' << m << '\n';
    }
    for (const auto& s : lc.shooting) {
        std::map<int, int> seen;
        for (const auto& x : s.crossings) {
            const int k = seen[x.target]++;
            auto w = out.open("witnesses/lambda_" + tag + "_p" + std::to_string(s.source) + "_q" +
                              std::to_string(x.target) + "_" + std::to_string(k) + ".csv");
            write_csv(w, problem, x.witness);
        }
    }
}

void write_sweep_table(const Out& out, Pipeline& pl) {
    auto os = out.open("tables/sweep.csv");
    os << "lambda,regular,b0,b1,b2,b3,boundary_squared_zero,max_energy_residual\n";
    for (double lambda : pl.config().lambdas) {
        const auto& lc = pl.at(lambda);
        const auto row = betti_row(lc.complex, 0, 3);
        os << lambda << ',' << lc.regular;
        for (int b : row) os << ',' << b;
        os << ',' << lc.complex.boundary_squared_zero() << ',' << lc.max_energy_residual << '\n';
    }
}

nlohmann::json crit_json(std::span<const CritPointF> crits) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : crits) a.push_back(c);
    return a;
}

nlohmann::json manifold_json(const SlowManifold& m) {
    nlohmann::json branches = nlohmann::json::array(), folds = nlohmann::json::array();
    for (const auto& b : m.branches) branches.push_back(b);
    for (const auto& f : m.folds) folds.push_back(f);
    return {{"eta_cut", m.eta_cut}, {"branches", branches}, {"folds", folds}};
}

int gate(Pipeline& pl, std::ostream& log) {
    const auto& rep = pl.assumptions();
    if (rep.ok()) return kExitOk;
    for (const auto& c : rep.checks)
        if (c.status == CheckStatus::Fail) log << "assumption " << c.id << " fails: " << c.note << "\n";
    return kExitAssumptions;
}

}  // namespace

int cmd_check(Pipeline& pl, std::ostream& log) {
    const Out out(pl.config().output);
    const auto t0 = std::chrono::steady_clock::now();
    const auto& rep = pl.assumptions();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& c : rep.checks) {
        log << std::left << std::setw(5) << c.id << std::setw(13) << to_string(c.status);
        if (c.status != CheckStatus::Unverifiable) log << "margin " << c.margin << " (threshold " << c.threshold << ")";
        log << "  " << c.note << "\n";
    }
    log << (rep.ok() ? "assumptions hold" : "assumptions FAIL") << " (" << secs << " s)\n";
    out.report("check", {{"config", config_to_json(pl.config())}, {"assumptions", rep}});
    return rep.ok() ? kExitOk : kExitAssumptions;
}

int cmd_crit(Pipeline& pl, std::ostream& log) {
    const Out out(pl.config().output);
    const auto& crits = pl.crits();
    write_crit_table(out, crits);
    log << "id        x1        x2       eta         F  index_F  fast  slow\n";
    for (const auto& c : crits) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%2d %9.5f %9.5f %9.5f %9.5f %8d %5d  %s\n", c.id, c.point.x[0], c.point.x[1],
                      c.point.eta, c.F, c.index_F, c.fast_index, to_string(c.slow_type));
        log << buf;
    }
    out.report("crit", {{"config", config_to_json(pl.config())},
                        {"eta_max", pl.problem().eta_max},
                        {"critical_points", crit_json(crits)}});
    return kExitOk;
}

int cmd_trace(Pipeline& pl, std::ostream& log) {
    const Out out(pl.config().output);
    const auto& cat = pl.catalog();
    {
        auto os = out.open("tables/branches.csv");
        write_branches_csv(os, pl.problem(), cat.manifold);
    }
    log << cat.manifold.branches.size() << " arcs, " << cat.manifold.folds.size() << " folds, "
        << cat.handle_slides.size() << " handle-slides, " << cat.cusps.size() << " cusp orbits, " << cat.jumps.size()
        << " jumps\n";
    for (const auto& b : cat.manifold.branches)
        log << "  arc " << b.id << " fast index " << b.fast_index << " eta [" << b.eta_lo << ", " << b.eta_hi << "], "
            << b.markers.size() << " markers\n";
    out.report("trace", {{"config", config_to_json(pl.config())},
                         {"manifold", manifold_json(cat.manifold)},
                         {"catalog", catalog_json(cat)}});
    return kExitOk;
}

int cmd_count(Pipeline& pl, std::ostream& log) {
    if (const int g = gate(pl, log)) return g;
    const Out out(pl.config().output);
    const double lambda = pl.config().lambda;
    const auto& lc = pl.at(lambda);
    write_crit_table(out, pl.crits());
    write_complex_tables(out, pl.problem(), lc);
    log << "lambda " << lambda << (lc.regular ? "" : " (not regular: " + lc.reason + ")") << "\n";
    for (const auto& [pq, m] : counts_mod2(lc.complex)) {
        const auto* s = lc.from(pq.first);
        log << "  <d " << pq.first << ", " << pq.second << "> = " << m << "  (" << (s ? s->count(pq.second) : 0)
            << " orbits)\n";
    }
    out.report("count", {{"config", config_to_json(pl.config())}, {"complex", lc}});
    return lc.regular ? kExitOk : kExitNumeric;
}

int cmd_sweep(Pipeline& pl, std::ostream& log) {
    if (const int g = gate(pl, log)) return g;
    const Out out(pl.config().output);
    for (double lambda : pl.config().lambdas) {
        const auto& lc = pl.at(lambda);
        write_complex_tables(out, pl.problem(), lc);
        const auto row = betti_row(lc.complex, 0, 3);
        log << "lambda " << std::setw(6) << lambda << "  betti";
        for (int b : row) log << ' ' << b;
        log << (lc.regular ? "" : "  not regular") << "\n";
    }
    write_sweep_table(out, pl);
    const auto v = pl.verdict();
    log << "Betti rows " << (v.invariance ? "agree" : "DIFFER") << " across regular lambdas\n";
    out.report("sweep", {{"config", config_to_json(pl.config())},
                         {"sweep", pl.sweep_json()},
                         {"betti_invariant", v.invariance},
                         {"notes", v.notes}});
    return kExitOk;
}

int cmd_fastslow(Pipeline& pl, std::ostream& log) {
    if (const int g = gate(pl, log)) return g;
    const Out out(pl.config().output);
    const auto& z = pl.zero();
    const double lo = *std::min_element(pl.config().lambdas.begin(), pl.config().lambdas.end());
    {
        auto os = out.open("tables/fastslow.csv");
        os << "p,q,orbits,mod2\n";
        for (const auto& [pq, seqs] : z.orbits)
            os << pq.first << ',' << pq.second << ',' << seqs.size() << ',' << seqs.size() % 2 << '\n';
    }
    for (const auto& [pq, seqs] : z.orbits)
        for (std::size_t k = 0; k < seqs.size(); ++k) {
            auto os = out.open("witnesses/fastslow_p" + std::to_string(pq.first) + "_q" + std::to_string(pq.second) +
                               "_" + std::to_string(k) + ".csv");
            os << "x1,x2,eta\n";
            for (const auto& v : fast_slow_polyline(pl.problem(), seqs[k], pl.catalog()))
                os << v[0] << ',' << v[1] << ',' << v[2] << '\n';
        }
    for (const auto& [pq, seqs] : z.orbits) log << "  " << pq.first << " -> " << pq.second << ": " << seqs.size() << " fast-slow orbits\n";
    const auto cmp = pl.compare_small(lo);
    log << "d0 vs C^" << lo << ": " << (cmp.boundary_equal ? "equal" : "DIFFERENT") << "\n";
    out.report("fastslow", {{"config", config_to_json(pl.config())},
                            {"catalog", catalog_json(pl.catalog())},
                            {"zero", z},
                            {"smallest_lambda", lo},
                            {"comparison", cmp}});
    return kExitOk;
}

int cmd_foldtest(Pipeline& pl, std::ostream& log) {
    const Out out(pl.config().output);
    const auto& fs = pl.foldtest();
    {
        auto os = out.open("tables/foldtest.csv");
        write_csv(os, fs);
    }
    for (const auto& r : fs.runs) log << "  eps " << r.epsilon << "  rho " << r.rho << "\n";
    log << "fitted exponent " << fs.slope << " (2/3 = " << 2.0 / 3.0 << ")\n";
    out.report("foldtest", {{"config", config_to_json(pl.config())}, {"foldtest", fs}});
    return kExitOk;
}

int cmd_report(Pipeline& pl, std::ostream& log) {
    if (const int g = gate(pl, log)) return g;
    const Out out(pl.config().output);
    const auto& cfg = pl.config();
    write_crit_table(out, pl.crits());
    for (double lambda : cfg.lambdas) write_complex_tables(out, pl.problem(), pl.at(lambda));
    write_sweep_table(out, pl);
    const auto v = pl.verdict();
    const double lo = *std::min_element(cfg.lambdas.begin(), cfg.lambdas.end());
    const double hi = *std::max_element(cfg.lambdas.begin(), cfg.lambdas.end());

    const auto& conv = pl.convergence();
    {
        auto os = out.open("tables/convergence.csv");
        os << "p,q,lambda,distance,eta_range_error\n";
        for (const auto& c : conv)
            for (std::size_t i = 0; i < c.best.lambdas.size(); ++i)
                os << c.p << ',' << c.q << ',' << c.best.lambdas[i] << ',' << c.best.distances[i] << ','
                   << c.best.eta_range_error[i] << '\n';
    }
    nlohmann::json conv_json = nlohmann::json::array();
    for (const auto& c : conv) {
        nlohmann::json r = c.best;
        r["orbits"] = c.orbits;
        r["ok"] = c.ok();
        conv_json.push_back(r);
    }
    const auto& fs = pl.foldtest();
    {
        auto os = out.open("tables/foldtest.csv");
        write_csv(os, fs);
    }

    const auto& rc = pl.restricted().first;
    const auto verdict_str = [](bool b) { return b ? "PASS" : "FAIL"; };
    nlohmann::json body = {{"config", config_to_json(cfg)},
                           {"eta_max", pl.problem().eta_max},
                           {"critical_points", crit_json(pl.crits())},
                           {"assumptions", pl.assumptions()},
                           {"sweep", pl.sweep_json()},
                           {"restricted", rc},
                           {"large_lambda", {{"lambda", hi}, {"comparison", pl.compare_large(hi)}}},
                           {"fastslow", pl.zero()},
                           {"small_lambda", {{"lambda", lo}, {"comparison", pl.compare_small(lo)}}},
                           {"convergence", conv_json},
                           {"foldtest", fs},
                           {"verdict",
                            {{"lambda_invariance", verdict_str(v.invariance)},
                             {"large_lambda", verdict_str(v.large_lambda)},
                             {"small_lambda", verdict_str(v.small_lambda)},
                             {"notes", v.notes}}}};
    out.report("report", body);

    log << "lambda invariance of Betti numbers: " << verdict_str(v.invariance) << "\n";
    log << "large lambda, C^" << hi << " = restricted complex shifted by one: " << verdict_str(v.large_lambda) << "\n";
    log << "small lambda, C^" << lo << " = fast-slow complex: " << verdict_str(v.small_lambda) << "\n";
    for (const auto& c : conv)
        log << "  convergence " << c.p << " -> " << c.q << ": " << (c.ok() ? "ok" : "not monotone / not close") << "\n";
    log << "fold exponent " << fs.slope << "\n";
    for (const auto& n : v.notes) log << "  note: " << n << "\n";
    return kExitOk;
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& log) {
    try {
        Pipeline pl(config);
        if (name == "check") return cmd_check(pl, log);
        if (name == "crit") return cmd_crit(pl, log);
        if (name == "trace") return cmd_trace(pl, log);
        if (name == "count") return cmd_count(pl, log);
        if (name == "sweep") return cmd_sweep(pl, log);
        if (name == "fastslow") return cmd_fastslow(pl, log);
        if (name == "foldtest") return cmd_foldtest(pl, log);
        if (name == "report") return cmd_report(pl, log);
        throw Error(ErrorKind::Config, "unknown command '" + name + "'");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Config ? kExitConfig : kExitNumeric;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace msw
