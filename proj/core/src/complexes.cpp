#include "msw/complexes.hpp"

#include "msw/errors.hpp"

#include <algorithm>

namespace msw {

std::map<int, std::vector<int>> graded_generators(std::span<const CritPointF> crits) {
    std::map<int, std::vector<int>> g;
    for (const auto& c : crits) g[c.index_F].push_back(c.id);
    return g;
}

const ShootingResult* LambdaComplex::from(int p) const {
    for (const auto& s : shooting)
        if (s.source == p) return &s;
    return nullptr;
}

LambdaComplex build_complex_lambda(const Problem& problem, std::span<const CritPointF> crits, double lambda,
                                   const ShootingOptions& options) {
    LambdaComplex out;
    out.lambda = lambda;
    for (const auto& c : crits) {
        if (c.index_F < 1) continue;
        try {
            out.shooting.push_back(shoot_unstable_manifold(problem, crits, lambda, c.id, options));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonRegularLambda) throw;
            out.regular = false;
            out.reason = e.what();
            break;
        }
    }
    for (const auto& s : out.shooting)
        for (const auto& x : s.crossings) out.max_energy_residual = std::max(out.max_energy_residual, x.energy_residual);
    out.complex = make_complex(
        graded_generators(crits),
        [&](int p, int q) {
            const auto* s = out.from(p);
            return s && s->count(q) % 2 == 1;
        },
        Provenance::Lambda, lambda);
    return out;
}

ZeroComplex build_complex_zero(const Problem& problem, std::span<const CritPointF> crits, const Catalog& catalog) {
    ZeroComplex out;
    for (const auto& p : crits)
        for (const auto& q : crits)
            if (p.index_F == q.index_F + 1) out.orbits[{p.id, q.id}] = enumerate_fast_slow(problem, p.id, q.id, catalog);
    out.complex = make_complex(
        graded_generators(crits),
        [&](int p, int q) {
            auto it = out.orbits.find({p, q});
            return it != out.orbits.end() && it->second.size() % 2 == 1;
        },
        Provenance::Zero);
    return out;
}

void to_json(nlohmann::json& j, const LambdaComplex& c) {
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& s : c.shooting) {
        std::map<int, int> raw;
        for (const auto& x : s.crossings) ++raw[x.target];
        nlohmann::json row = {{"source", s.source}, {"shots", s.shots}, {"discarded_pairs", s.discarded_pairs}};
        nlohmann::json t = nlohmann::json::object();
        for (const auto& [q, n] : raw) t[std::to_string(q)] = n;
        row["raw_counts"] = t;
        counts.push_back(row);
    }
    j = {{"lambda", c.lambda},
         {"regular", c.regular},
         {"complex", c.complex},
         {"betti", c.complex.betti()},
         {"boundary_squared_zero", c.complex.boundary_squared_zero()},
         {"max_energy_residual", c.max_energy_residual},
         {"shooting", counts}};
    if (!c.regular) j["reason"] = c.reason;
}

void to_json(nlohmann::json& j, const ZeroComplex& c) {
    nlohmann::json orbits = nlohmann::json::array();
    for (const auto& [pq, seqs] : c.orbits)
        for (const auto& s : seqs) orbits.push_back(s);
    j = {{"complex", c.complex},
         {"betti", c.complex.betti()},
         {"boundary_squared_zero", c.complex.boundary_squared_zero()},
         {"orbits", orbits}};
}

}  // namespace msw
