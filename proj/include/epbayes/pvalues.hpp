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

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "epbayes/errors.hpp"
#include "epbayes/npmle.hpp"
#include "epbayes/prior.hpp"
#include "epbayes/quadrature.hpp"
#include "epbayes/special.hpp"

namespace epb {

namespace detail {

// Posterior weights of the prior atoms given S^2 = s2, in log space with
// max-subtraction; sample variances in applications span several decades and
// the raw chi-square densities under- and overflow long before that.
inline std::vector<double> posterior_weights(const DiscretePrior& prior, double s2, double nu) {
    const std::size_t k = prior.size();
    std::vector<double> lw(k);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        lw[j] = std::log(prior.weights[j]) + scaled_chisq_logpdf(s2, prior.support[j], nu);
        if (lw[j] > m) m = lw[j];
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        lw[j] = std::exp(lw[j] - m);
        total += lw[j];
    }
    for (double& x : lw) x /= total;
    return lw;
}

}  // namespace detail

/// Conditional two-sided p-value for testing mu = 0 given S^2 = s2 under a
/// discrete variance prior: the posterior-weighted average of z-test
/// p-values 2(1 - Phi(|z|/sigma_j)).
inline double conditional_pvalue(const DiscretePrior& prior, double z, double s2, double nu) {
    if (!(s2 > 0.0)) throw std::domain_error("conditional_pvalue: s2 must be positive");
    if (z == 0.0) return 1.0;
    const auto pw = detail::posterior_weights(prior, s2, nu);
    double p = 0.0;
    for (std::size_t j = 0; j < prior.size(); ++j)
        p += pw[j] * two_sided_normal_pvalue(z / std::sqrt(prior.support[j]));
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

/// The same p-value through its integral representation in terms of the
/// mixture marginals f_G(.; nu) and f_G(.; nu+1):
///
///   P(z, s2) = C(nu) (s2)^{nu/2-1} / f_G(s2; nu)
///              * int 1{t^2 >= (nu s2 + z^2)/(nu+1)}
///                    (t^2)^{-(nu-1)/2} / sqrt((nu+1) t^2 - nu s2)
///                    f_G(t^2; nu+1) d(t^2),
///   C(nu) = (1+1/nu)^{-nu/2} Gamma((nu+1)/2) / (sqrt(pi) (nu+1)^{-1/2} Gamma(nu/2)).
///
/// The substitution u = sqrt((nu+1) t^2 - nu s2) removes the inverse-
/// square-root edge singularity; the lower limit becomes u = |z|. Used as an
/// independent cross-check of conditional_pvalue.
inline double conditional_pvalue_integral(const DiscretePrior& prior, double z, double s2,
                                          double nu) {
    if (!(s2 > 0.0))
        throw std::domain_error("conditional_pvalue_integral: s2 must be positive");
    if (z == 0.0) return 1.0;
    const double az = std::fabs(z);
    const double log_c = -0.5 * nu * std::log1p(1.0 / nu) + std::lgamma(0.5 * (nu + 1.0)) -
                         0.5 * std::log(kPi) + 0.5 * std::log(nu + 1.0) - std::lgamma(0.5 * nu);
    const double log_pref = log_c + (0.5 * nu - 1.0) * std::log(s2) -
                            log_marginal_density(prior, s2, nu) + std::log(2.0 / (nu + 1.0));

    const auto log_integrand = [&](double u) {
        const double t2 = (u * u + nu * s2) / (nu + 1.0);
        return -0.5 * (nu - 1.0) * std::log(t2) + log_marginal_density(prior, t2, nu + 1.0);
    };
    // Rescale so the integrand is O(1) at the lower limit; the prefactor and
    // the marginal in the denominator can individually be astronomically
    // small or large.
    const double l0 = log_integrand(az);
    const double sigma_max = std::sqrt(prior.support.back());
    const double scale = std::max({sigma_max, std::sqrt(s2), 1e-3});
    const double integral = integrate_to_infinity(
        [&](double u) { return std::exp(log_integrand(u) - l0); }, az, scale, 1e-10);
    if (!(integral >= 0.0))
        throw numeric_error("conditional_pvalue_integral: quadrature failed");
    if (integral == 0.0) return std::numeric_limits<double>::min();
    const double p = std::exp(log_pref + l0 + std::log(integral));
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

// ---------------------------------------------------------------------------
// Parametric (limma) route
// ---------------------------------------------------------------------------

/// Moment fit of the conjugate variance prior on log sample variances.
/// With e_i = log s_i^2:
///   trigamma(nu0/2) = var(e) - trigamma(nu/2)
///   log s0^2 = mean(e) - digamma(nu/2) + log(nu/2) + digamma(nu0/2) - log(nu0/2),
/// falling back to the point-mass limit nu0 = +infinity (with
/// log s0^2 = mean(e) - digamma(nu/2) + log(nu/2)) when the observed
/// log-variance spread is no larger than the sampling noise trigamma(nu/2).
inline LimmaPrior fit_limma(const std::vector<double>& s2_values, double nu) {
    if (s2_values.size() < 2)
        throw std::invalid_argument("fit_limma: need at least 2 observations");
    const double n = static_cast<double>(s2_values.size());
    double mean = 0.0;
    for (double v : s2_values) {
        if (!(v > 0.0)) throw std::domain_error("fit_limma: values must be positive");
        mean += std::log(v);
    }
    mean /= n;
    double var = 0.0;
    for (double v : s2_values) {
        const double d = std::log(v) - mean;
        var += d * d;
    }
    var /= (n - 1.0);

    const double noise = trigamma(0.5 * nu);
    const double base = mean - digamma(0.5 * nu) + std::log(0.5 * nu);
    LimmaPrior prior;
    if (var <= noise) {
        prior.nu0 = std::numeric_limits<double>::infinity();
        prior.s0sq = std::exp(base);
        return prior;
    }
    prior.nu0 = 2.0 * trigamma_inverse(var - noise);
    prior.s0sq = std::exp(base + digamma(0.5 * prior.nu0) - std::log(0.5 * prior.nu0));
    return prior;
}

/// Moderated-t p-value: p = 2 F-bar_{t, nu0+nu}(|z| / s-tilde) with
/// s-tilde^2 = (nu0 s0^2 + nu s2) / (nu0 + nu). The nu0 = +infinity limit is
/// the z-test against s0.
inline double limma_pvalue(const LimmaPrior& prior, double z, double s2, double nu) {
    prior.validate();
    if (!(s2 > 0.0)) throw std::domain_error("limma_pvalue: s2 must be positive");
    if (prior.infinite())
        return two_sided_normal_pvalue(z / std::sqrt(prior.s0sq));
    const double stilde2 = (prior.nu0 * prior.s0sq + nu * s2) / (prior.nu0 + nu);
    return 2.0 * t_survival(std::fabs(z) / std::sqrt(stilde2), prior.nu0 + nu);
}

inline double ttest_pvalue(double z, double s2, double nu) {
    if (!(s2 > 0.0)) throw std::domain_error("ttest_pvalue: s2 must be positive");
    return 2.0 * t_survival(std::fabs(z) / std::sqrt(s2), nu);
}

// ---------------------------------------------------------------------------
// Tweedie posterior precision
// ---------------------------------------------------------------------------

enum class TweedieRoute {
    direct,           // posterior-weighted mixture mean of 1/sigma^2
    marginal_formula  // (nu-2)/nu * 1/s2 - (2/nu) f'(s2)/f(s2), analytic f'
};

/// E[1/sigma^2 | S^2 = s2]. Both routes are algebraically identical for a
/// finite mixture; the marginal_formula route goes through the derivative of
/// the marginal density.
inline double tweedie_precision(const DiscretePrior& prior, double s2, double nu,
                                TweedieRoute route = TweedieRoute::direct) {
    if (!(s2 > 0.0)) throw std::domain_error("tweedie_precision: s2 must be positive");
    if (!(nu >= 2.0)) throw std::domain_error("tweedie_precision: requires nu >= 2");
    if (route == TweedieRoute::direct) {
        const auto pw = detail::posterior_weights(prior, s2, nu);
        double acc = 0.0;
        for (std::size_t j = 0; j < prior.size(); ++j) acc += pw[j] / prior.support[j];
        return acc;
    }
    // f and f' as scaled mixture sums sharing one offset.
    const std::size_t k = prior.size();
    std::vector<double> lp(k);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        lp[j] = std::log(prior.weights[j]) + scaled_chisq_logpdf(s2, prior.support[j], nu);
        if (lp[j] > m) m = lp[j];
    }
    double f = 0.0, fprime = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double term = std::exp(lp[j] - m);
        f += term;
        fprime += term * ((0.5 * nu - 1.0) / s2 - nu / (2.0 * prior.support[j]));
    }
    return (nu - 2.0) / (nu * s2) - (2.0 / nu) * (fprime / f);
}

// ---------------------------------------------------------------------------
// Method dispatch and rejection-threshold curves
// ---------------------------------------------------------------------------

/// A p-value method: partially Bayes with a discrete prior (NPMLE or oracle),
/// parametric limma, or the plain t-test.
struct PvalueMethod {
    enum class Kind { npmle, limma, ttest, oracle };

    Kind kind = Kind::ttest;
    std::optional<DiscretePrior> prior;   // npmle, oracle
    std::optional<LimmaPrior> limma;      // limma, oracle

    static PvalueMethod make_npmle(DiscretePrior p) {
        return {Kind::npmle, std::move(p), std::nullopt};
    }
    static PvalueMethod make_limma(LimmaPrior p) { return {Kind::limma, std::nullopt, p}; }
    static PvalueMethod make_ttest() { return {Kind::ttest, std::nullopt, std::nullopt}; }
    static PvalueMethod make_oracle(DiscretePrior p) {
        return {Kind::oracle, std::move(p), std::nullopt};
    }
    static PvalueMethod make_oracle(LimmaPrior p) { return {Kind::oracle, std::nullopt, p}; }

    double operator()(double z, double s2, double nu) const {
        switch (kind) {
            case Kind::npmle:
                return conditional_pvalue(*prior, z, s2, nu);
            case Kind::limma:
                return limma_pvalue(*limma, z, s2, nu);
            case Kind::ttest:
                return ttest_pvalue(z, s2, nu);
            case Kind::oracle:
                if (prior) return conditional_pvalue(*prior, z, s2, nu);
                return limma_pvalue(*limma, z, s2, nu);
        }
        throw std::logic_error("PvalueMethod: bad kind");
    }

    // Scale used to cap the threshold search bracket.
    double z_scale(double s2) const {
        double scale = std::sqrt(s2);
        if (prior) scale = std::max(scale, std::sqrt(prior->support.back()));
        if (limma && !limma->infinite()) scale = std::max(scale, std::sqrt(limma->s0sq));
        if (limma && limma->infinite()) scale = std::max(scale, std::sqrt(limma->s0sq));
        return scale;
    }
};

/// For each s2 in the grid, the smallest z >= 0 whose p-value is at most
/// p_threshold (p-values are non-increasing in |z|), by bisection to 1e-8.
/// Reports +infinity where the hypothesis is unrejectable at that s2.
inline std::vector<double> rejection_threshold_curve(const PvalueMethod& method,
                                                     double p_threshold,
                                                     const std::vector<double>& s2_grid,
                                                     double nu) {
    if (!(p_threshold > 0.0 && p_threshold < 1.0))
        throw std::domain_error("rejection_threshold_curve: p_threshold must lie in (0,1)");
    std::vector<double> out;
    out.reserve(s2_grid.size());
    for (double s2 : s2_grid) {
        const double cap = 1e3 * method.z_scale(s2);
        double lo = 0.0, hi = 1.0;
        while (method(hi, s2, nu) > p_threshold) {
            lo = hi;
            hi *= 2.0;
            if (hi > cap) break;
        }
        if (hi > cap) {
            out.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        while (hi - lo > 1e-8) {
            const double mid = 0.5 * (lo + hi);
            if (method(mid, s2, nu) <= p_threshold)
                hi = mid;
            else
                lo = mid;
        }
        out.push_back(hi);
    }
    return out;
}

}  // namespace epb
