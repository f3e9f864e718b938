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
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "epbayes/errors.hpp"

namespace epb {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

/// Phi(x). NaN passes through.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

/// 2 * (1 - Phi(|x|)), with full relative accuracy in the tail.
inline double two_sided_normal_pvalue(double x) {
    return std::erfc(std::fabs(x) * 0.7071067811865475244);
}

inline double normal_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

namespace detail {

// Rational initial guess for the normal quantile (Acklam), ~1e-9 relative.
inline double normal_quantile_guess(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of Phi. Requires p in (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0,1)");
    // Solve in the lower tail so that erfc keeps relative accuracy, then flip.
    const bool upper = p > 0.5;
    const double q = upper ? 1.0 - p : p;
    double x = detail::normal_quantile_guess(q);
    if (x > 0.0) x = -x;
    const double logq = std::log(q);
    for (int it = 0; it < 4; ++it) {
        const double cdf = 0.5 * std::erfc(-x * 0.7071067811865475244);
        const double pdf = normal_pdf(x);
        if (pdf <= 0.0 || cdf <= 0.0) break;
        // Newton on log Phi(x) = log q; stable far into the tail.
        const double step = (std::log(cdf) - logq) * cdf / pdf;
        x -= step;
        if (std::fabs(step) < 1e-14 * (1.0 + std::fabs(x))) break;
    }
    return upper ? -x : x;
}

// ---------------------------------------------------------------------------
// Incomplete beta / gamma (Lentz continued fractions, NR style)
// ---------------------------------------------------------------------------

namespace detail {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 4000;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw numeric_error("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0))
        throw std::domain_error("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0))
        return bt * detail::betacf(a, b, x) / a;
    return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

/// Survival function of Student's t with df degrees of freedom, P(T > t).
/// Supports non-integer df.
inline double t_survival(double t, double df) {
    if (!(df > 0.0))
        throw std::domain_error("t_survival: df must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? tail : 1.0 - tail;
}

namespace detail {

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 2000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw numeric_error("incomplete gamma: series did not converge");
}

inline double gamma_q_cf(double a, double x) {
    constexpr double kFpMin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kFpMin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 2000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw numeric_error("incomplete gamma: continued fraction did not converge");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0)
        throw std::domain_error("gamma_p: require a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

/// Quantile of the chi-square distribution with df degrees of freedom.
inline double chisq_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("chisq_quantile: p must lie in (0,1)");
    if (!(df > 0.0))
        throw std::domain_error("chisq_quantile: df must be positive");
    // Wilson-Hilferty start, then Newton on the regularized gamma.
    const double z = normal_quantile(p);
    const double f = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
    double x = df * f * f * f;
    if (!(x > 0.0)) x = df * std::exp((z - 1.0));
    const double a = 0.5 * df;
    for (int it = 0; it < 60; ++it) {
        const double err = gamma_p(a, 0.5 * x) - p;
        const double pdf = 0.5 * std::exp((a - 1.0) * std::log(0.5 * x) - 0.5 * x - std::lgamma(a));
        if (pdf <= 0.0) break;
        double step = err / pdf;
        if (step > 0.5 * x) step = 0.5 * x;  // keep the iterate positive
        x -= step;
        if (std::fabs(step) < 1e-12 * (1.0 + x)) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Polygamma family
// ---------------------------------------------------------------------------

inline double digamma(double x) {
    if (!(x > 0.0))
        throw std::domain_error("digamma: x must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double w = 1.0 / (x * x);
    double s = std::log(x) - 0.5 / x;
    s -= w * (1.0 / 12.0 -
              w * (1.0 / 120.0 -
                   w * (1.0 / 252.0 - w * (1.0 / 240.0 - w * (1.0 / 132.0 - w * 691.0 / 32760.0)))));
    return s + acc;
}

inline double trigamma(double x) {
    if (!(x > 0.0))
        throw std::domain_error("trigamma: x must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double w = 1.0 / (x * x);
    double s = 1.0 / x + 0.5 * w;
    s += w / x *
         (1.0 / 6.0 -
          w * (1.0 / 30.0 - w * (1.0 / 42.0 - w * (1.0 / 30.0 - w * 5.0 / 66.0))));
    return s + acc;
}

inline double tetragamma(double x) {
    if (!(x > 0.0))
        throw std::domain_error("tetragamma: x must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    const double w = 1.0 / (x * x);
    double s = -1.0 / (x * x) - 1.0 / (x * x * x);
    s -= w * w * (0.5 - w * (1.0 / 6.0 - w * (1.0 / 6.0 - w * 3.0 / 10.0)));
    return s + acc;
}

/// Solves trigamma(x) = y for x > 0. trigamma is strictly decreasing, so the
/// Newton iteration below (on 1/trigamma, which is nearly linear) is safe.
inline double trigamma_inverse(double y) {
    if (!(y > 0.0))
        throw std::domain_error("trigamma_inverse: y must be positive");
    double x = 0.5 + 1.0 / y;
    for (int it = 0; it < 80; ++it) {
        const double t = trigamma(x);
        const double step = (1.0 / t - 1.0 / y) * t * t / tetragamma(x);
        x += step;
        if (x <= 0.0) x = 1e-8;
        if (std::fabs(step) < 1e-10 * x) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Scaled chi-square likelihood and helpers
// ---------------------------------------------------------------------------

/// log p(s^2 | sigma^2, nu) for S^2 | sigma^2 ~ (sigma^2/nu) chi^2_nu.
inline double scaled_chisq_logpdf(double s2, double sigma2, double nu) {
    if (!(s2 > 0.0))
        throw std::domain_error("scaled_chisq_logpdf: s2 must be positive");
    if (!(sigma2 > 0.0))
        throw std::domain_error("scaled_chisq_logpdf: sigma2 must be positive");
    const double h = 0.5 * nu;
    return h * std::log(nu / (2.0 * sigma2)) - std::lgamma(h) +
           (h - 1.0) * std::log(s2) - nu * s2 / (2.0 * sigma2);
}

inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    double m = v[0];
    for (double x : v)
        if (x > m) m = x;
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace epb
