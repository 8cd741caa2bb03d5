#pragma once

/**
 * @file homology.hpp
 * @brief GF(2) chain complexes, the zero level set of mu and the Morse complex
 *        of f restricted to it.
 */

#include "msw/critical.hpp"
#include "msw/field.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace msw {

/// Dense GF(2) matrix, rows stored as 64-bit words.
class Z2Matrix {
public:
    Z2Matrix() = default;
    Z2Matrix(int rows, int cols);

    [[nodiscard]] int rows() const noexcept { return rows_; }
    [[nodiscard]] int cols() const noexcept { return cols_; }
    [[nodiscard]] bool get(int r, int c) const;
    void set(int r, int c, bool v);
    void flip(int r, int c);
    [[nodiscard]] bool is_zero() const;

    friend Z2Matrix operator*(const Z2Matrix& a, const Z2Matrix& b);
    friend bool operator==(const Z2Matrix& a, const Z2Matrix& b);

    /// Row-major 0/1 nested list.
    [[nodiscard]] std::vector<std::vector<int>> to_rows() const;

    /// Packed row words (bit c of row r is word c / 64, bit c % 64).
    [[nodiscard]] const std::uint64_t* row(int r) const { return bits_.data() + static_cast<std::size_t>(r) * words_; }
    [[nodiscard]] int words() const noexcept { return words_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    int words_ = 0;
    std::vector<std::uint64_t> bits_;
};

struct Z2Reduction {
    int rank = 0;
    std::vector<int> pivot_cols;
    /// Basis of the null space, each vector of length cols as 0/1 entries.
    std::vector<std::vector<int>> kernel;
};

/// Gauss-Jordan elimination over GF(2); pivot = first nonzero row in each column.
Z2Reduction z2_reduce(const Z2Matrix& m);

enum class Provenance { Lambda, Zero, Restricted };
const char* to_string(Provenance p) noexcept;

/**
 * Generators per degree and boundary maps d_k : C_k -> C_{k-1}, stored as a
 * matrix with rows indexed by C_{k-1} and columns by C_k.
 */
struct Z2ChainComplex {
    std::map<int, std::vector<int>> generators;
    std::map<int, Z2Matrix> boundary;
    Provenance provenance = Provenance::Lambda;
    double lambda = 0.0;

    /// Matrix of d_k with the right shape, zero if absent.
    [[nodiscard]] Z2Matrix d(int k) const;
    [[nodiscard]] int rank_of(int k) const;
    /// d_{k} d_{k+1} = 0 for every k.
    [[nodiscard]] bool boundary_squared_zero() const;
    [[nodiscard]] std::map<int, int> betti() const;
    /// Degree range covered by the generators (empty complex gives {0, -1}).
    [[nodiscard]] std::pair<int, int> degree_range() const;
};

/**
 * Complex on a graded generator set from a boundary callback:
 * entry(p, q) gives <d p, q> for deg q = deg p - 1.
 */
template <class Entry>
Z2ChainComplex make_complex(const std::map<int, std::vector<int>>& generators, Entry&& entry, Provenance prov,
                            double lambda = 0.0) {
    Z2ChainComplex c;
    c.generators = generators;
    c.provenance = prov;
    c.lambda = lambda;
    for (const auto& [k, gens] : generators) {
        auto it = generators.find(k - 1);
        if (it == generators.end()) continue;
        Z2Matrix m(static_cast<int>(it->second.size()), static_cast<int>(gens.size()));
        for (std::size_t j = 0; j < gens.size(); ++j)
            for (std::size_t i = 0; i < it->second.size(); ++i)
                if (entry(gens[j], it->second[i])) m.set(static_cast<int>(i), static_cast<int>(j), true);
        c.boundary[k] = std::move(m);
    }
    return c;
}

struct RestrictedCrit {
    Vec2 x = Vec2::Zero();
    int index = 0;      ///< 0 = local min of f on the circle, 1 = local max
    double value = 0.0;
    double s = 0.0;     ///< arclength position on its circle
    int id = -1;        ///< position in the global list
};

struct LevelCircle {
    std::vector<Vec2> polyline;  ///< lifted, consecutive points continuous
    double length = 0.0;
    bool closed = false;
    std::vector<RestrictedCrit> crits;  ///< in cyclic order along the polyline
};

struct LevelSetGeometry {
    std::vector<LevelCircle> components;
    [[nodiscard]] std::vector<RestrictedCrit> all_crits() const;
};

/// Trace mu^{-1}(0): marching squares on an n x n grid for seeds, then
/// predictor-corrector refinement. Throws Error(TraceFailure) if a component
/// does not close.
LevelSetGeometry trace_level_set(const Problem& problem, int grid = 0);

struct LevelSetTopology {
    int components = 0;
    std::vector<double> lengths;
};
LevelSetTopology level_set_topology(const Problem& problem, int grid = 0);

/// Restricted critical points located on each circle and the circle complex.
std::pair<Z2ChainComplex, LevelSetGeometry> build_restricted_complex(const Problem& problem);

struct ComparisonReport {
    bool generators_match = false;
    bool boundary_equal = false;
    bool betti_equal = false;
    std::map<int, int> betti_a, betti_b;
    std::vector<std::string> mismatches;
};

/**
 * Compare complexes A and B where generator a of A corresponds to
 * bijection.at(a) in B and deg_A = deg_B + shift. Throws
 * Error(BijectionMismatch) if the generator counts differ in some degree.
 */
ComparisonReport compare_shifted(const Z2ChainComplex& a, const Z2ChainComplex& b, const std::map<int, int>& bijection,
                                 int shift);

/// Canonical bijection (x, eta) -> x between Crit(F) and the restricted critical set.
std::map<int, int> projection_bijection(std::span<const CritPointF> crits, const LevelSetGeometry& geo, double tol = 1e-6);

void to_json(nlohmann::json& j, const Z2ChainComplex& c);
void to_json(nlohmann::json& j, const ComparisonReport& r);

}  // namespace msw
