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
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace epb {

struct RejectionResult {
    std::vector<std::uint8_t> rejected;  // aligned with the input order
    double threshold = 0.0;              // data-driven p-value cutoff, 0 if none
    std::size_t k_star = 0;

    std::size_t num_rejected() const {
        std::size_t r = 0;
        for (auto b : rejected) r += b;
        return r;
    }
};

namespace detail {

inline void check_pvalues(const std::vector<double>& p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::domain_error("p-values must lie in [0,1]");
}

// Indices sorting p ascending; ties broken by input index for reproducible traces.
inline std::vector<std::size_t> sorted_order(const std::vector<double>& p) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    return order;
}

}  // namespace detail

/// Benjamini-Hochberg step-up at level alpha:
///   k* = max{l : P_(l) <= alpha l / n} (with P_(0) = 0),
/// rejecting exactly {i : p_i <= P_(k*)}. Ties at the threshold are all
/// rejected.
inline RejectionResult bh_reject(const std::vector<double>& pvalues, double alpha) {
    detail::check_pvalues(pvalues);
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("bh_reject: alpha must lie in (0,1)");
    const std::size_t n = pvalues.size();
    RejectionResult res;
    res.rejected.assign(n, 0);
    if (n == 0) return res;
    const auto order = detail::sorted_order(pvalues);
    std::size_t k_star = 0;
    for (std::size_t l = n; l >= 1; --l) {
        if (pvalues[order[l - 1]] <= alpha * static_cast<double>(l) / static_cast<double>(n)) {
            k_star = l;
            break;
        }
    }
    res.k_star = k_star;
    // k* = 0 implies every p exceeds alpha/n > 0, so threshold 0 rejects nothing.
    res.threshold = k_star == 0 ? 0.0 : pvalues[order[k_star - 1]];
    for (std::size_t i = 0; i < n; ++i) res.rejected[i] = pvalues[i] <= res.threshold ? 1 : 0;
    return res;
}

/// BH-adjusted p-values: adj_(i) = min(1, min_{j >= i} n p_(j) / j), mapped
/// back to input order. bh_reject(p, alpha) rejects exactly {i : adj_i <= alpha}.
inline std::vector<double> bh_adjust(const std::vector<double>& pvalues) {
    detail::check_pvalues(pvalues);
    const std::size_t n = pvalues.size();
    std::vector<double> adj(n);
    if (n == 0) return adj;
    const auto order = detail::sorted_order(pvalues);
    double running = 1.0;
    for (std::size_t l = n; l >= 1; --l) {
        const double cand =
            pvalues[order[l - 1]] * static_cast<double>(n) / static_cast<double>(l);
        running = std::min(running, cand);
        adj[order[l - 1]] = running;
    }
    return adj;
}

/// Storey's null-proportion estimate (1 + #{p_i > lambda}) / (n (1-lambda)),
/// capped at 1.
inline double storey_pi0(const std::vector<double>& pvalues, double lambda = 0.5) {
    detail::check_pvalues(pvalues);
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::domain_error("storey_pi0: lambda must lie in (0,1)");
    if (pvalues.empty()) throw std::invalid_argument("storey_pi0: empty input");
    std::size_t count = 0;
    for (double p : pvalues) count += p > lambda ? 1 : 0;
    const double pi0 = (1.0 + static_cast<double>(count)) /
                       (static_cast<double>(pvalues.size()) * (1.0 - lambda));
    return std::min(pi0, 1.0);
}

/// Null-proportion-adaptive BH: the BH procedure at level alpha / pi0_hat.
/// alpha / pi0_hat >= 1 degenerates gracefully to level just below 1.
inline RejectionResult storey_reject(const std::vector<double>& pvalues, double alpha,
                                     double lambda = 0.5) {
    const double pi0 = storey_pi0(pvalues, lambda);
    const double level = std::min(alpha / pi0, 1.0 - 1e-12);
    return bh_reject(pvalues, level);
}

}  // namespace epb
