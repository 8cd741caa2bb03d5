#pragma once

#include "msw/field.hpp"

#include <numbers>

namespace testing {

inline msw::TorusField field(std::initializer_list<msw::FourierTerm> terms) { return msw::TorusField(terms); }

/// cos(k . x) with amplitude a.
inline msw::FourierTerm cos_term(int k1, int k2, double a) { return {{k1, k2}, a, 0.0}; }

/// f = cos x2, mu = cos x1 + 0.5 cos x2: four critical points of F at eta = 0.
inline msw::Problem symmetric_problem() {
    msw::Problem p;
    p.f = field({cos_term(0, 1, 1.0)});
    p.mu = field({cos_term(1, 0, 1.0), cos_term(0, 1, 0.5)});
    return p;
}

inline constexpr double kPi = std::numbers::pi;

}  // namespace testing
