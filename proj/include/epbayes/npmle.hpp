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
#include <numeric>
#include <vector>

#include "epbayes/errors.hpp"
#include "epbayes/prior.hpp"
#include "epbayes/quadrature.hpp"
#include "epbayes/special.hpp"
#include "epbayes/summarize.hpp"

namespace epb {

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct GridConfig {
    std::size_t grid_size = 300;
    double lower_quantile = 0.01;
    bool has_explicit_bounds = false;
    double lower_bound = 0.0;
    double upper_bound = 0.0;

    void validate() const {
        if (grid_size < 2) throw std::domain_error("GridConfig: grid_size must be >= 2");
        if (!(lower_quantile >= 0.0 && lower_quantile < 1.0))
            throw std::domain_error("GridConfig: lower_quantile must lie in [0,1)");
        if (has_explicit_bounds && (!(lower_bound > 0.0) || !(upper_bound >= lower_bound)))
            throw std::domain_error("GridConfig: invalid explicit bounds");
    }
};

/// Nearest-rank empirical quantile of a sorted vector.
inline double nearest_rank_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
    if (q <= 0.0) return sorted.front();
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(sorted.size())));
    const std::size_t idx = std::min(std::max<std::size_t>(rank, 1), sorted.size()) - 1;
    return sorted[idx];
}

/// Log-equispaced grid from the lower_quantile of the data to its maximum.
/// Collapses to a single point when the bounds coincide.
inline std::vector<double> build_grid(const std::vector<double>& s2_values,
                                      const GridConfig& config) {
    config.validate();
    if (s2_values.empty()) throw std::invalid_argument("build_grid: empty input");
    for (double v : s2_values)
        if (!(v > 0.0)) throw std::domain_error("build_grid: values must be positive");
    double a, b;
    if (config.has_explicit_bounds) {
        a = config.lower_bound;
        b = config.upper_bound;
    } else {
        std::vector<double> sorted = s2_values;
        std::sort(sorted.begin(), sorted.end());
        a = nearest_rank_quantile(sorted, config.lower_quantile);
        b = sorted.back();
    }
    if (a == b) return {a};
    const double la = std::log(a), lb = std::log(b);
    const std::size_t m = config.grid_size;
    std::vector<double> grid(m);
    for (std::size_t k = 0; k < m; ++k)
        grid[k] = std::exp(la + (lb - la) * static_cast<double>(k) / static_cast<double>(m - 1));
    grid.front() = a;
    grid.back() = b;
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// ---------------------------------------------------------------------------
// Mixture marginals
// ---------------------------------------------------------------------------

/// log f_G(s2; nu) for a discrete prior G, via log-sum-exp over components.
inline double log_marginal_density(const DiscretePrior& prior, double s2, double nu) {
    if (!(s2 > 0.0)) throw std::domain_error("marginal_density: s2 must be positive");
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(prior.size());
    for (std::size_t j = 0; j < prior.size(); ++j) {
        terms[j] = std::log(prior.weights[j]) + scaled_chisq_logpdf(s2, prior.support[j], nu);
        if (terms[j] > m) m = terms[j];
    }
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

inline double marginal_density(const DiscretePrior& prior, double s2, double nu) {
    return std::exp(log_marginal_density(prior, s2, nu));
}

inline double log_marginal_likelihood(const DiscretePrior& prior, const std::vector<double>& s2,
                                      double nu) {
    double acc = 0.0;
    for (double v : s2) acc += log_marginal_density(prior, v, nu);
    return acc;
}

inline double log_marginal_likelihood(const DiscretePrior& prior, const SummaryDataset& ds) {
    return log_marginal_likelihood(prior, ds.s2_values(), ds.nu);
}

/// First-order optimality gap of a grid-supported prior:
///   max over grid sigma^2 of (1/n) sum_i p(S_i^2 | sigma^2) / f_G(S_i^2) - 1,
/// floored at zero. Zero at the exact optimum.
inline double kkt_gap(const DiscretePrior& prior, const std::vector<double>& s2, double nu,
                      const std::vector<double>& grid) {
    const std::size_t n = s2.size();
    std::vector<double> logf(n);
    for (std::size_t i = 0; i < n; ++i) logf[i] = log_marginal_density(prior, s2[i], nu);
    const double h = 0.5 * nu;
    const double lg = std::lgamma(h);
    double worst = 0.0;
    for (double sigma2 : grid) {
        const double coef = h * std::log(nu / (2.0 * sigma2)) - lg;
        const double rate = nu / (2.0 * sigma2);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += std::exp(coef + (h - 1.0) * std::log(s2[i]) - rate * s2[i] - logf[i]);
        worst = std::max(worst, acc / static_cast<double>(n) - 1.0);
    }
    return std::max(worst, 0.0);
}

inline double kkt_gap(const DiscretePrior& prior, const SummaryDataset& ds,
                      const std::vector<double>& grid) {
    return kkt_gap(prior, ds.s2_values(), ds.nu, grid);
}

// ---------------------------------------------------------------------------
// NPMLE fit
// ---------------------------------------------------------------------------

struct NpmleSolverOptions {
    double rel_tol = 1e-9;           // relative log-likelihood change stop (plain EM mode)
    std::size_t max_iter = 50000;    // bound on likelihood sweeps
    bool acceleration = true;        // support-reduction Newton steps vs plain EM
    double kkt_tol = 1e-6;           // optimality certificate threshold
    double prune_tol = 1e-10;        // weights below this are dropped after the fit
    std::size_t max_cache_bytes = std::size_t{1} << 30;
};

struct NpmleFit {
    DiscretePrior prior;
    double log_likelihood = 0.0;
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> grid;
    std::vector<double> loglik_trace;  // objective after each accepted step; nondecreasing
};

namespace detail {

// Likelihood table over (observation x grid atom). Entries are held as
// exp(log p_ij - m_i) with a per-row offset m_i at the row's likelihood peak,
// so rows are O(1) and never overflow. Falls back to row-blocked
// recomputation when the table exceeds the cache budget.
class LikelihoodKernel {
public:
    LikelihoodKernel(const std::vector<double>& s2, const std::vector<double>& grid, double nu,
                     std::size_t max_cache_bytes)
        : s2_(s2), grid_(grid), nu_(nu), n_(s2.size()), m_(grid.size()) {
        const double h = 0.5 * nu_;
        coef_.resize(m_);
        rate_.resize(m_);
        for (std::size_t j = 0; j < m_; ++j) {
            coef_[j] = h * std::log(nu_ / (2.0 * grid_[j])) - std::lgamma(h);
            rate_[j] = nu_ / (2.0 * grid_[j]);
        }
        row_offset_.resize(n_);
        total_offset_ = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            // The likelihood peaks at the atom nearest s2_i.
            const double sig = std::clamp(s2_[i], grid_.front(), grid_.back());
            row_offset_[i] = scaled_chisq_logpdf(s2_[i], sig, nu_);
            total_offset_ += row_offset_[i];
        }
        cached_ = n_ * m_ * sizeof(double) <= max_cache_bytes;
        if (cached_) {
            table_.resize(n_ * m_);
            for (std::size_t i = 0; i < n_; ++i) fill_row(i, &table_[i * m_]);
        }
    }

    std::size_t n() const { return n_; }
    std::size_t m() const { return m_; }
    double total_offset() const { return total_offset_; }

    // One likelihood sweep: f_i = sum_j E_ij w_j, ll = sum_i (log f_i + m_i),
    // g_j = (1/n) sum_i E_ij / f_i. g is the KKT function of w over the grid.
    void eval(const std::vector<double>& w, std::vector<double>& g, double& ll) const {
        g.assign(m_, 0.0);
        ll = total_offset_;
        std::vector<double> scratch;
        if (!cached_) scratch.resize(m_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row;
            if (cached_) {
                row = &table_[i * m_];
            } else {
                fill_row(i, scratch.data());
                row = scratch.data();
            }
            double f = 0.0;
            for (std::size_t j = 0; j < m_; ++j) f += row[j] * w[j];
            ll += std::log(f);
            const double q = 1.0 / f;
            for (std::size_t j = 0; j < m_; ++j) g[j] += row[j] * q;
        }
        const double inv_n = 1.0 / static_cast<double>(n_);
        for (std::size_t j = 0; j < m_; ++j) g[j] *= inv_n;
    }

    // Dense copy of the selected atom columns, column-major n x k.
    std::vector<double> gather_columns(const std::vector<std::size_t>& cols) const {
        std::vector<double> out(cols.size() * n_);
        if (cached_) {
            for (std::size_t c = 0; c < cols.size(); ++c)
                for (std::size_t i = 0; i < n_; ++i) out[c * n_ + i] = table_[i * m_ + cols[c]];
            return out;
        }
        std::vector<double> scratch(m_);
        for (std::size_t i = 0; i < n_; ++i) {
            fill_row(i, scratch.data());
            for (std::size_t c = 0; c < cols.size(); ++c) out[c * n_ + i] = scratch[cols[c]];
        }
        return out;
    }

private:
    void fill_row(std::size_t i, double* out) const {
        const double h = 0.5 * nu_;
        const double a = (h - 1.0) * std::log(s2_[i]) - row_offset_[i];
        const double s2 = s2_[i];
        for (std::size_t j = 0; j < m_; ++j) out[j] = std::exp(coef_[j] + a - rate_[j] * s2);
    }

    const std::vector<double>& s2_;
    const std::vector<double>& grid_;
    double nu_;
    std::size_t n_, m_;
    std::vector<double> coef_, rate_, row_offset_;
    double total_offset_ = 0.0;
    std::vector<double> table_;
    bool cached_ = false;
};

inline void normalize_weights(std::vector<double>& w) {
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
}

// Active-set solver for the simplex-constrained quadratic program
//   min 1/2 ||B x - b||^2  s.t.  x >= 0, sum x = 1,
// with B column-major n x k. Columns are equilibrated to unit Gram diagonal
// (mixture columns span enormous scales); each passive-set solve is a
// bordered KKT system handled by two Cholesky solves.
class SimplexQp {
public:
    SimplexQp(const std::vector<double>& B, std::size_t n, std::size_t k,
              const std::vector<double>& b)
        : k_(k) {
        gram_.assign(k * k, 0.0);
        atb_.assign(k, 0.0);
        scale_.assign(k, 1.0);
        avec_.assign(k, 1.0);
        for (std::size_t c = 0; c < k; ++c) {
            const double* colc = &B[c * n];
            for (std::size_t d = c; d < k; ++d) {
                const double* cold = &B[d * n];
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += colc[i] * cold[i];
                gram_[c * k + d] = acc;
                gram_[d * k + c] = acc;
            }
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += colc[i] * b[i];
            atb_[c] = acc;
        }
        // Equilibrate: y = diag(s) x with s_c = ||B_c||; the simplex
        // constraint becomes sum y_c / s_c = 1.
        for (std::size_t c = 0; c < k; ++c) {
            const double s = std::sqrt(gram_[c * k + c]);
            if (s > 0.0) scale_[c] = s;
            avec_[c] = 1.0 / scale_[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            atb_[c] /= scale_[c];
            for (std::size_t d = 0; d < k; ++d) gram_[c * k + d] /= scale_[c] * scale_[d];
        }
    }

    /// x0 must be feasible; its positive entries seed the passive set.
    std::vector<double> solve(const std::vector<double>& x0) const {
        std::vector<double> y(k_);
        for (std::size_t j = 0; j < k_; ++j) y[j] = x0[j] * scale_[j];
        std::vector<bool> passive(k_, false);
        std::vector<std::size_t> pset;
        for (std::size_t j = 0; j < k_; ++j) {
            if (y[j] > 0.0) {
                passive[j] = true;
                pset.push_back(j);
            }
        }
        double dual_scale = 1.0;
        for (std::size_t j = 0; j < k_; ++j)
            dual_scale = std::max(dual_scale, std::fabs(atb_[j]));

        double mu = 0.0;
        for (std::size_t outer = 0; outer < 4 * k_ + 32; ++outer) {
            // Move y to the optimum over the current passive set.
            for (std::size_t inner = 0; inner < 4 * k_ + 32; ++inner) {
                const auto z = solve_equality(pset, mu);
                bool feasible = true;
                for (double v : z)
                    if (v < 0.0) feasible = false;
                if (feasible) {
                    for (std::size_t c = 0; c < pset.size(); ++c) y[pset[c]] = z[c];
                    break;
                }
                // Ratio test toward z, dropping the variables that hit zero.
                double alpha = 1.0;
                for (std::size_t c = 0; c < pset.size(); ++c) {
                    if (z[c] < 0.0) {
                        const double yc = y[pset[c]];
                        if (yc - z[c] > 0.0) alpha = std::min(alpha, yc / (yc - z[c]));
                    }
                }
                std::vector<std::size_t> keep;
                for (std::size_t c = 0; c < pset.size(); ++c) {
                    const double ny = y[pset[c]] + alpha * (z[c] - y[pset[c]]);
                    if (ny > 1e-15 && !(z[c] < 0.0 && alpha >= 1.0 - 1e-12)) {
                        y[pset[c]] = ny;
                        keep.push_back(pset[c]);
                    } else {
                        y[pset[c]] = 0.0;
                        passive[pset[c]] = false;
                    }
                }
                pset.swap(keep);
                if (pset.empty()) {  // restart from the best single column
                    std::size_t j = 0;
                    for (std::size_t c = 1; c < k_; ++c)
                        if (atb_[c] > atb_[j]) j = c;
                    y.assign(k_, 0.0);
                    y[j] = scale_[j];
                    passive[j] = true;
                    pset.push_back(j);
                }
            }
            // Dual feasibility: s_j = (G y - c)_j + mu a_j >= 0 for inactive j.
            double worst = -1e-9 * dual_scale;
            std::size_t worst_j = k_;
            for (std::size_t j = 0; j < k_; ++j) {
                if (passive[j]) continue;
                double s = -atb_[j] + mu * avec_[j];
                for (std::size_t c : pset) s += gram_[j * k_ + c] * y[c];
                if (s < worst) {
                    worst = s;
                    worst_j = j;
                }
            }
            if (worst_j == k_) break;
            passive[worst_j] = true;
            pset.push_back(worst_j);
        }
        std::vector<double> x(k_);
        for (std::size_t j = 0; j < k_; ++j) x[j] = y[j] / scale_[j];
        return x;
    }

private:
    // Solves [G_PP a_P; a_P' 0][z; mu] = [c_P; 1] via two Cholesky solves.
    std::vector<double> solve_equality(const std::vector<std::size_t>& pset, double& mu) const {
        const std::size_t p = pset.size();
        std::vector<double> G(p * p), rhs(p), a(p);
        for (std::size_t r = 0; r < p; ++r) {
            rhs[r] = atb_[pset[r]];
            a[r] = avec_[pset[r]];
            for (std::size_t c = 0; c < p; ++c) G[r * p + c] = gram_[pset[r] * k_ + pset[c]];
        }
        double ridge = 1e-12;
        for (int attempt = 0; attempt < 12; ++attempt) {
            std::vector<double> L = G;
            for (std::size_t r = 0; r < p; ++r) L[r * p + r] += ridge;
            if (cholesky(L, p)) {
                const auto yv = chol_solve(L, p, rhs);
                const auto uv = chol_solve(L, p, a);
                double sy = 0.0, su = 0.0;
                for (std::size_t r = 0; r < p; ++r) {
                    sy += a[r] * yv[r];
                    su += a[r] * uv[r];
                }
                if (su > 0.0) {
                    mu = (sy - 1.0) / su;
                    std::vector<double> z(p);
                    for (std::size_t r = 0; r < p; ++r) z[r] = yv[r] - mu * uv[r];
                    return z;
                }
            }
            ridge *= 32.0;
        }
        throw numeric_error("fit_npmle: singular subproblem");
    }

    static std::vector<double> chol_solve(const std::vector<double>& L, std::size_t p,
                                          const std::vector<double>& rhs) {
        std::vector<double> z = rhs;
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < a; ++b) z[a] -= L[a * p + b] * z[b];
            z[a] /= L[a * p + a];
        }
        for (std::size_t a = p; a-- > 0;) {
            for (std::size_t b = a + 1; b < p; ++b) z[a] -= L[b * p + a] * z[b];
            z[a] /= L[a * p + a];
        }
        return z;
    }

    static bool cholesky(std::vector<double>& A, std::size_t p) {
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                double acc = A[b * p + a];
                for (std::size_t c = 0; c < a; ++c) acc -= A[a * p + c] * A[b * p + c];
                if (a == b) {
                    if (acc <= 0.0) return false;
                    A[a * p + a] = std::sqrt(acc);
                } else {
                    A[b * p + a] = acc / A[a * p + a];
                }
            }
        }
        return true;
    }

    std::size_t k_;
    std::vector<double> gram_;
    std::vector<double> atb_;
    std::vector<double> scale_;
    std::vector<double> avec_;
};

}  // namespace detail

/// Maximizes sum_i log f_G(S_i^2) over distributions G supported on the grid.
///
/// The accelerated mode runs support-reduction Newton steps: candidate atoms
/// enter the support at local maxima of the gradient function xi(sigma^2),
/// the weights are refit from the second-order model of the log-likelihood
/// (a nonnegative least-squares problem), and a backtracking line search
/// keeps the objective monotone. The plain mode is the multiplicative EM
/// fixed point w_j <- w_j * (1/n) sum_i p(S_i^2|sigma_j^2)/f(S_i^2). Either
/// way the returned kkt_gap certifies optimality of the returned prior.
inline NpmleFit fit_npmle(const std::vector<double>& s2_values, double nu,
                          const GridConfig& config = {},
                          const NpmleSolverOptions& opts = {}) {
    if (s2_values.empty()) throw std::invalid_argument("fit_npmle: empty dataset");
    NpmleFit fit;
    fit.grid = build_grid(s2_values, config);
    const std::size_t n = s2_values.size();
    const std::size_t m = fit.grid.size();

    if (m == 1) {
        fit.prior = DiscretePrior::point_mass(fit.grid[0]);
        fit.log_likelihood = 0.0;
        for (double v : s2_values)
            fit.log_likelihood += scaled_chisq_logpdf(v, fit.grid[0], nu);
        fit.kkt_gap = 0.0;
        fit.converged = true;
        fit.loglik_trace = {fit.log_likelihood};
        return fit;
    }

    const detail::LikelihoodKernel kernel(s2_values, fit.grid, nu, opts.max_cache_bytes);
    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    std::vector<double> g(m);
    double ll = 0.0;
    std::size_t evals = 0;
    const auto sweep = [&]() {
        kernel.eval(w, g, ll);
        ++evals;
    };

    sweep();
    fit.loglik_trace.push_back(ll);
    const double inner_tol = 0.9 * opts.kkt_tol;

    if (!opts.acceleration) {
        double ll_prev = ll;
        while (evals < opts.max_iter) {
            double kkt = 0.0;
            for (double gj : g) kkt = std::max(kkt, gj - 1.0);
            if (kkt <= inner_tol) break;
            for (std::size_t j = 0; j < m; ++j) w[j] *= g[j];
            detail::normalize_weights(w);
            sweep();
            fit.loglik_trace.push_back(ll);
            if (std::fabs(ll - ll_prev) <= opts.rel_tol * std::fabs(ll)) break;
            ll_prev = ll;
        }
    } else {
        // Start from a coarse uniform sub-grid. A dense start keeps every
        // observation covered, which the second-order model needs; the
        // support collapses to the few true atoms within a couple of steps.
        {
            const std::size_t stride = std::max<std::size_t>(1, m / 64);
            std::vector<std::size_t> init;
            for (std::size_t j = 0; j < m; j += stride) init.push_back(j);
            if (init.back() != m - 1) init.push_back(m - 1);
            w.assign(m, 0.0);
            for (std::size_t j : init) w[j] = 1.0 / static_cast<double>(init.size());
            sweep();
            fit.loglik_trace.push_back(ll);
        }

        std::size_t stalls = 0;
        while (evals < opts.max_iter && stalls < 5) {
            double kkt = 0.0;
            for (double gj : g) kkt = std::max(kkt, gj - 1.0);
            if (kkt <= inner_tol) break;

            // Support: every atom currently carrying weight, plus the local
            // maxima of the gradient that exceed the optimality bound.
            std::vector<std::size_t> support;
            for (std::size_t j = 0; j < m; ++j) {
                const bool left_ok = j == 0 || g[j] >= g[j - 1];
                const bool right_ok = j + 1 == m || g[j] >= g[j + 1];
                if (w[j] > 0.0 || (left_ok && right_ok && g[j] > 1.0)) support.push_back(j);
            }
            const std::size_t k = support.size();
            const auto cols = kernel.gather_columns(support);

            // Second-order model of the log-likelihood at the current w:
            // min ||(A_S x)_i / f_i - 2||^2 over the simplex.
            std::vector<double> f(n, 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                const double wc = w[support[c]];
                if (wc == 0.0) continue;
                const double* col = &cols[c * n];
                for (std::size_t i = 0; i < n; ++i) f[i] += col[i] * wc;
            }
            std::vector<double> B(cols.size());
            std::vector<double> b(n, 2.0);
            for (std::size_t c = 0; c < k; ++c)
                for (std::size_t i = 0; i < n; ++i) B[c * n + i] = cols[c * n + i] / f[i];
            std::vector<double> x0(k);
            for (std::size_t c = 0; c < k; ++c) x0[c] = w[support[c]];
            const auto x = detail::SimplexQp(B, n, k, b).solve(x0);

            // Backtracking line search on the true objective.
            const auto restricted_ll = [&](const std::vector<double>& wk) {
                double acc = kernel.total_offset();
                for (std::size_t i = 0; i < n; ++i) {
                    double fi = 0.0;
                    for (std::size_t c = 0; c < k; ++c) fi += cols[c * n + i] * wk[c];
                    acc += std::log(fi);
                }
                return acc;
            };
            std::vector<double> wk_new(k);
            double theta = 1.0;
            double ll_new = -std::numeric_limits<double>::infinity();
            for (int bt = 0; bt < 30; ++bt) {
                for (std::size_t c = 0; c < k; ++c)
                    wk_new[c] = (1.0 - theta) * x0[c] + theta * x[c];
                ll_new = restricted_ll(wk_new);
                ++evals;
                if (ll_new >= ll - 1e-12 * std::max(1.0, std::fabs(ll))) break;
                theta *= 0.5;
            }
            if (ll_new < ll - 1e-12 * std::max(1.0, std::fabs(ll))) {
                ++stalls;  // no usable step from this support
                continue;
            }
            stalls = ll_new > ll + 1e-13 * std::fabs(ll) ? 0 : stalls + 1;

            w.assign(m, 0.0);
            for (std::size_t c = 0; c < k; ++c)
                if (wk_new[c] > 0.0) w[support[c]] = wk_new[c];
            detail::normalize_weights(w);
            sweep();
            fit.loglik_trace.push_back(ll);
        }
    }

    // Prune and certify the result.
    std::vector<double> atoms, weights;
    for (std::size_t j = 0; j < m; ++j) {
        if (w[j] >= opts.prune_tol) {
            atoms.push_back(fit.grid[j]);
            weights.push_back(w[j]);
        }
    }
    fit.prior = DiscretePrior::make(std::move(atoms), std::move(weights));
    fit.log_likelihood = log_marginal_likelihood(fit.prior, s2_values, nu);
    fit.kkt_gap = epb::kkt_gap(fit.prior, s2_values, nu, fit.grid);
    fit.iterations = evals;
    fit.converged = fit.kkt_gap <= opts.kkt_tol;
    return fit;
}

inline NpmleFit fit_npmle(const SummaryDataset& ds, const GridConfig& config = {},
                          const NpmleSolverOptions& opts = {}) {
    ds.validate();
    return fit_npmle(ds.s2_values(), ds.nu, config, opts);
}

// ---------------------------------------------------------------------------
// Hellinger distance
// ---------------------------------------------------------------------------

/// Hellinger distance sqrt(1/2 int (sqrt f - sqrt g)^2 dt) between two
/// densities on (0, infinity). Integration proceeds over geometrically
/// growing segments until both tails carry mass below 1e-10.
template <typename F, typename G>
double hellinger_distance(const F& f, const G& g, double upper_scale = 1.0) {
    if (!(upper_scale > 0.0))
        throw std::domain_error("hellinger_distance: scale must be positive");
    const auto h = [&](double t) {
        const double d = std::sqrt(std::max(f(t), 0.0)) - std::sqrt(std::max(g(t), 0.0));
        return d * d;
    };
    const auto mass = [&](double t) { return std::max(f(t), 0.0) + std::max(g(t), 0.0); };
    double total = 0.0;
    double x0 = 0.0;
    double len = upper_scale;
    for (int k = 0; k < 64; ++k) {
        total += integrate(h, x0, x0 + len, 1e-14);
        const double tail = detail::gk15(mass, x0, x0 + len).first;
        if (k >= 1 && tail < 1e-10) return std::sqrt(0.5 * total);
        x0 += len;
        len *= 2.0;
    }
    throw numeric_error("hellinger_distance: densities did not decay");
}

}  // namespace epb
