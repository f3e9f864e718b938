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
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace epb {

/// A discrete distribution over variances sigma^2. Invariants: support is
/// strictly increasing and positive, weights are nonnegative and sum to one.
struct DiscretePrior {
    std::vector<double> support;
    std::vector<double> weights;

    std::size_t size() const { return support.size(); }

    static DiscretePrior point_mass(double sigma2) {
        if (!(sigma2 > 0.0))
            throw std::domain_error("DiscretePrior: atom must be positive");
        return DiscretePrior{{sigma2}, {1.0}};
    }

    /// Builds a prior from (atom, weight) pairs: sorts atoms, merges exact
    /// duplicates, drops zero-weight atoms, and normalizes the weights.
    static DiscretePrior make(std::vector<double> atoms, std::vector<double> w) {
        if (atoms.empty() || atoms.size() != w.size())
            throw std::invalid_argument("DiscretePrior: atoms/weights size mismatch or empty");
        std::vector<std::size_t> order(atoms.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
        DiscretePrior out;
        double total = 0.0;
        for (std::size_t k : order) {
            const double a = atoms[k], wk = w[k];
            if (!(a > 0.0) || !std::isfinite(a))
                throw std::domain_error("DiscretePrior: atoms must be positive and finite");
            if (wk < 0.0 || !std::isfinite(wk))
                throw std::domain_error("DiscretePrior: weights must be nonnegative and finite");
            total += wk;
            if (wk == 0.0) continue;
            if (!out.support.empty() && out.support.back() == a)
                out.weights.back() += wk;
            else {
                out.support.push_back(a);
                out.weights.push_back(wk);
            }
        }
        if (!(total > 0.0))
            throw std::domain_error("DiscretePrior: total weight must be positive");
        for (double& x : out.weights) x /= total;
        return out;
    }

    void validate() const {
        if (support.empty() || support.size() != weights.size())
            throw std::domain_error("DiscretePrior: invalid sizes");
        double total = 0.0;
        for (std::size_t j = 0; j < support.size(); ++j) {
            if (!(support[j] > 0.0) || !std::isfinite(support[j]))
                throw std::domain_error("DiscretePrior: atoms must be positive and finite");
            if (j > 0 && !(support[j] > support[j - 1]))
                throw std::domain_error("DiscretePrior: support must be strictly increasing");
            if (weights[j] < 0.0) throw std::domain_error("DiscretePrior: negative weight");
            total += weights[j];
        }
        if (std::fabs(total - 1.0) > 1e-12)
            throw std::domain_error("DiscretePrior: weights must sum to one");
    }
};

/// Parameters of the conjugate variance prior 1/sigma^2 ~ chi^2_{nu0}/(nu0 s0^2).
/// nu0 = +infinity encodes the point-mass limit at s0^2.
struct LimmaPrior {
    double nu0 = 1.0;
    double s0sq = 1.0;

    bool infinite() const { return std::isinf(nu0); }

    void validate() const {
        if (!(nu0 > 0.0)) throw std::domain_error("LimmaPrior: nu0 must be positive");
        if (!(s0sq > 0.0) || !std::isfinite(s0sq))
            throw std::domain_error("LimmaPrior: s0sq must be positive and finite");
    }
};

/// Lebesgue log-density of sigma^2 under the LimmaPrior (an inverse gamma
/// with shape nu0/2 and scale nu0 s0^2 / 2). Undefined for the infinite case.
inline double limma_prior_logpdf(const LimmaPrior& prior, double sigma2) {
    prior.validate();
    if (prior.infinite())
        throw std::domain_error("limma_prior_logpdf: point-mass limit has no density");
    if (!(sigma2 > 0.0))
        throw std::domain_error("limma_prior_logpdf: sigma2 must be positive");
    const double a = 0.5 * prior.nu0;
    const double b = 0.5 * prior.nu0 * prior.s0sq;
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(sigma2) - b / sigma2;
}

}  // namespace epb
