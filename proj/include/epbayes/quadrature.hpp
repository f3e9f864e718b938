// Copyright 2026 The epbayes Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "epbayes/errors.hpp"

namespace epb {

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <typename F>
std::pair<double, double> gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double result_k = 0.0;
    double result_g = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double x = h * kKronrodNodes[i];
        double fv;
        if (i == 7) {
            fv = f(c);
            result_k += kKronrodWeights[i] * fv;
            result_g += kGaussWeights[3] * fv;
        } else {
            const double f1 = f(c - x);
            const double f2 = f(c + x);
            fv = f1 + f2;
            result_k += kKronrodWeights[i] * fv;
            if (i % 2 == 1) result_g += kGaussWeights[i / 2] * fv;
        }
    }
    result_k *= h;
    result_g *= h;
    return {result_k, std::fabs(result_k - result_g)};
}

template <typename F>
double adaptive_rec(const F& f, double a, double b, double tol, int depth) {
    const auto [value, err] = gk15(f, a, b);
    if (err <= tol || !(std::isfinite(value)))
        return value;
    if (depth >= 48)
        throw numeric_error("quadrature: adaptive refinement did not converge");
    const double c = 0.5 * (a + b);
    return adaptive_rec(f, a, c, 0.5 * tol, depth + 1) +
           adaptive_rec(f, c, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a, b] to absolute tolerance.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol) {
    if (a == b) return 0.0;
    return detail::adaptive_rec(f, a, b, abs_tol, 0);
}

/// Integral of f over [a, infinity) for integrands with (at least)
/// exponentially decaying tails. `scale` sets the initial segment length;
/// segments then grow geometrically until their contribution is negligible.
template <typename F>
double integrate_to_infinity(const F& f, double a, double scale, double abs_tol) {
    if (!(scale > 0.0)) throw std::domain_error("integrate_to_infinity: scale must be positive");
    double total = 0.0;
    double x0 = a;
    double len = scale;
    for (int k = 0; k < 64; ++k) {
        const double part = integrate(f, x0, x0 + len, 0.25 * abs_tol);
        total += part;
        if (k >= 1 && std::fabs(part) < 0.25 * abs_tol)
            return total;
        x0 += len;
        len *= 2.0;
    }
    throw numeric_error("integrate_to_infinity: tail did not decay");
}

}  // namespace epb
