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

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "epbayes/mtp.hpp"
#include "epbayes/npmle.hpp"
#include "epbayes/pvalues.hpp"
#include "epbayes/rng.hpp"
#include "epbayes/summarize.hpp"

namespace epb {

// ---------------------------------------------------------------------------
// Simulation settings
// ---------------------------------------------------------------------------

struct VariancePriorSpec {
    enum class Kind { dirac, scaled_inv_chisq, two_point };
    Kind kind = Kind::dirac;
    double dirac_value = 1.0;              // dirac
    double nu0 = 6.0, s0sq = 1.0;          // scaled_inv_chisq
    double v1 = 10.0, v2 = 1.0, w1 = 0.5;  // two_point: mass w1 at v1, 1-w1 at v2

    static VariancePriorSpec dirac(double v) {
        VariancePriorSpec s;
        s.kind = Kind::dirac;
        s.dirac_value = v;
        return s;
    }
    static VariancePriorSpec scaled_inv_chisq(double nu0, double s0sq) {
        VariancePriorSpec s;
        s.kind = Kind::scaled_inv_chisq;
        s.nu0 = nu0;
        s.s0sq = s0sq;
        return s;
    }
    static VariancePriorSpec two_point(double v1, double v2, double w1) {
        VariancePriorSpec s;
        s.kind = Kind::two_point;
        s.v1 = v1;
        s.v2 = v2;
        s.w1 = w1;
        return s;
    }

    std::string label() const {
        switch (kind) {
            case Kind::dirac: return "dirac";
            case Kind::scaled_inv_chisq: return "scaled_inv_chisq";
            case Kind::two_point: return "two_point";
        }
        return "?";
    }
};

struct SignalLawSpec {
    enum class Kind { normal_scaled, normal_fixed, dirac };
    Kind kind = Kind::normal_scaled;
    double param = 16.0;  // gamma for normal_scaled, tau^2 for normal_fixed, m for dirac

    std::string label() const {
        switch (kind) {
            case Kind::normal_scaled: return "normal_scaled";
            case Kind::normal_fixed: return "normal_fixed";
            case Kind::dirac: return "dirac";
        }
        return "?";
    }
};

enum class Ordering { random, adversarial };

struct SimSetting {
    std::size_t n = 10000;
    double nu = 4.0;
    VariancePriorSpec variance_prior;
    double null_prop = 0.9;
    SignalLawSpec signal_law;
    Ordering ordering = Ordering::random;
    double alpha = 0.1;
    GridConfig grid;
    NpmleSolverOptions solver;

    std::string label() const {
        return variance_prior.label() + "_nu" + std::to_string(static_cast<int>(nu)) +
               (ordering == Ordering::adversarial ? "_adversarial" : "_random");
    }

    void validate() const {
        if (n == 0) throw std::domain_error("SimSetting: n must be positive");
        if (!(nu >= 2.0)) throw std::domain_error("SimSetting: nu must be >= 2");
        if (!(null_prop >= 0.0 && null_prop <= 1.0))
            throw std::domain_error("SimSetting: null_prop must lie in [0,1]");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::domain_error("SimSetting: alpha must lie in (0,1)");
    }
};

/// Latent truth of one simulated dataset.
struct SimTruth {
    std::vector<double> mu;
    std::vector<double> sigma2;
    std::vector<std::uint8_t> null_mask;  // null_mask[i] <=> mu[i] == 0

    std::size_t num_nulls() const {
        std::size_t k = 0;
        for (auto b : null_mask) k += b;
        return k;
    }
};

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// Draws sigma_i^2 from the variance prior, assigns nulls (at random, or to
/// the largest variances under adversarial ordering), draws alternative
/// means from the signal law, then Z_i ~ N(mu_i, sigma_i^2) and
/// S_i^2 ~ (sigma_i^2/nu) chi^2_nu independently.
inline std::pair<SummaryDataset, SimTruth> sample_dataset(const SimSetting& setting,
                                                          RngStream& rng) {
    setting.validate();
    const std::size_t n = setting.n;
    SimTruth truth;
    truth.sigma2.resize(n);
    truth.mu.assign(n, 0.0);
    truth.null_mask.assign(n, 0);

    switch (setting.variance_prior.kind) {
        case VariancePriorSpec::Kind::dirac:
            for (auto& v : truth.sigma2) v = setting.variance_prior.dirac_value;
            break;
        case VariancePriorSpec::Kind::scaled_inv_chisq:
            for (auto& v : truth.sigma2)
                v = rng.scaled_inv_chisq(setting.variance_prior.nu0, setting.variance_prior.s0sq);
            break;
        case VariancePriorSpec::Kind::two_point:
            for (auto& v : truth.sigma2)
                v = rng.uniform01() < setting.variance_prior.w1 ? setting.variance_prior.v1
                                                                : setting.variance_prior.v2;
            break;
    }

    const std::size_t n0 = static_cast<std::size_t>(
        std::llround(setting.null_prop * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (setting.ordering == Ordering::random) {
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
            std::swap(order[i - 1], order[j]);
        }
    } else {
        // Nulls take the largest variances; ties broken by index.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return truth.sigma2[a] > truth.sigma2[b];
        });
    }
    for (std::size_t k = 0; k < n0 && k < n; ++k) truth.null_mask[order[k]] = 1;

    for (std::size_t i = 0; i < n; ++i) {
        if (truth.null_mask[i]) continue;
        switch (setting.signal_law.kind) {
            case SignalLawSpec::Kind::normal_scaled:
                truth.mu[i] = rng.standard_normal() *
                              std::sqrt(setting.signal_law.param * truth.sigma2[i]);
                break;
            case SignalLawSpec::Kind::normal_fixed:
                truth.mu[i] = rng.standard_normal() * std::sqrt(setting.signal_law.param);
                break;
            case SignalLawSpec::Kind::dirac:
                truth.mu[i] = setting.signal_law.param;
                break;
        }
    }

    SummaryDataset ds;
    ds.nu = setting.nu;
    ds.pairs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.pairs[i].id = "h" + std::to_string(i);
        ds.pairs[i].z = truth.mu[i] + rng.standard_normal() * std::sqrt(truth.sigma2[i]);
        ds.pairs[i].s2 = truth.sigma2[i] * rng.chisq(setting.nu) / setting.nu;
    }
    return {std::move(ds), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Methods under evaluation
// ---------------------------------------------------------------------------

enum class Method { ttest_bh, limma_bh, npmle_bh, oracle_bh, oracle_storey };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::ttest_bh, Method::limma_bh, Method::npmle_bh, Method::oracle_bh,
    Method::oracle_storey};

inline std::string method_name(Method m) {
    switch (m) {
        case Method::ttest_bh: return "ttest_bh";
        case Method::limma_bh: return "limma_bh";
        case Method::npmle_bh: return "npmle_bh";
        case Method::oracle_bh: return "oracle_bh";
        case Method::oracle_storey: return "oracle_storey";
    }
    return "?";
}

/// The oracle p-value method implied by a variance prior spec: discrete
/// conditional p-values for dirac/two-point priors, the closed-form
/// moderated-t for the conjugate prior.
inline PvalueMethod oracle_method(const VariancePriorSpec& spec) {
    switch (spec.kind) {
        case VariancePriorSpec::Kind::dirac:
            return PvalueMethod::make_oracle(DiscretePrior::point_mass(spec.dirac_value));
        case VariancePriorSpec::Kind::scaled_inv_chisq:
            return PvalueMethod::make_oracle(LimmaPrior{spec.nu0, spec.s0sq});
        case VariancePriorSpec::Kind::two_point:
            return PvalueMethod::make_oracle(
                DiscretePrior::make({spec.v1, spec.v2}, {spec.w1, 1.0 - spec.w1}));
    }
    throw std::logic_error("oracle_method: bad prior kind");
}

struct MethodRun {
    std::vector<double> pvalues;
    RejectionResult rejection;
};

struct RunMethodsResult {
    std::array<MethodRun, 5> by_method;  // indexed by Method
    NpmleFit npmle_fit;
    LimmaPrior limma_prior;

    const MethodRun& operator[](Method m) const {
        return by_method[static_cast<std::size_t>(m)];
    }
};

/// Runs all five pipelines on one dataset. The NPMLE is refit from this
/// dataset's sample variances; the oracle receives the true prior.
inline RunMethodsResult run_methods(const SummaryDataset& ds, const SimSetting& setting) {
    RunMethodsResult out;
    const std::size_t n = ds.size();
    const auto s2 = ds.s2_values();

    out.npmle_fit = fit_npmle(s2, ds.nu, setting.grid, setting.solver);
    out.limma_prior = fit_limma(s2, ds.nu);
    const PvalueMethod oracle = oracle_method(setting.variance_prior);

    auto& ttest = out.by_method[static_cast<std::size_t>(Method::ttest_bh)];
    auto& limma = out.by_method[static_cast<std::size_t>(Method::limma_bh)];
    auto& npmle = out.by_method[static_cast<std::size_t>(Method::npmle_bh)];
    auto& orbh = out.by_method[static_cast<std::size_t>(Method::oracle_bh)];
    auto& orst = out.by_method[static_cast<std::size_t>(Method::oracle_storey)];

    ttest.pvalues.resize(n);
    limma.pvalues.resize(n);
    npmle.pvalues.resize(n);
    orbh.pvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = ds.pairs[i].z, v = ds.pairs[i].s2;
        ttest.pvalues[i] = ttest_pvalue(z, v, ds.nu);
        limma.pvalues[i] = limma_pvalue(out.limma_prior, z, v, ds.nu);
        npmle.pvalues[i] = conditional_pvalue(out.npmle_fit.prior, z, v, ds.nu);
        orbh.pvalues[i] = oracle(z, v, ds.nu);
    }
    orst.pvalues = orbh.pvalues;

    ttest.rejection = bh_reject(ttest.pvalues, setting.alpha);
    limma.rejection = bh_reject(limma.pvalues, setting.alpha);
    npmle.rejection = bh_reject(npmle.pvalues, setting.alpha);
    orbh.rejection = bh_reject(orbh.pvalues, setting.alpha);
    orst.rejection = storey_reject(orst.pvalues, setting.alpha);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ReplicateMetrics {
    double fdp = 0.0;
    double power = 0.0;
    double fndr = 0.0;
    std::optional<double> min_svar_fp;  // absent when the replicate has no nulls
};

/// Per-replicate error metrics:
///   FDP  = V / (R v 1)
///   power = (R - V) / (n - n0)        (0 when there are no alternatives)
///   FNDR = #{alternatives not rejected} / ((n - R) v 1)
///   MinSVarFP = 1{p-value of the null with the smallest S^2 <= 0.2}
inline ReplicateMetrics compute_metrics(const SimTruth& truth, const SummaryDataset& ds,
                                        const std::vector<double>& pvalues,
                                        const RejectionResult& rejection) {
    const std::size_t n = truth.mu.size();
    if (pvalues.size() != n || rejection.rejected.size() != n || ds.size() != n)
        throw std::invalid_argument("compute_metrics: length mismatch");
    std::size_t R = 0, V = 0, missed_alt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (rejection.rejected[i]) {
            ++R;
            if (truth.null_mask[i]) ++V;
        } else if (!truth.null_mask[i]) {
            ++missed_alt;
        }
    }
    const std::size_t n0 = truth.num_nulls();
    ReplicateMetrics m;
    m.fdp = static_cast<double>(V) / static_cast<double>(std::max<std::size_t>(R, 1));
    m.power = n == n0 ? 0.0
                      : static_cast<double>(R - V) / static_cast<double>(n - n0);
    m.fndr = static_cast<double>(missed_alt) /
             static_cast<double>(std::max<std::size_t>(n - R, 1));
    if (n0 > 0) {
        std::size_t argmin = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (truth.null_mask[i] && ds.pairs[i].s2 < best) {
                best = ds.pairs[i].s2;
                argmin = i;
            }
        }
        m.min_svar_fp = pvalues[argmin] <= 0.2 ? 1.0 : 0.0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Monte Carlo aggregation
// ---------------------------------------------------------------------------

struct MetricSummary {
    double estimate = 0.0;
    double stderror = 0.0;
    std::size_t count = 0;
};

struct MethodReport {
    MetricSummary fdr;
    MetricSummary power;
    MetricSummary fndr;
    MetricSummary min_svar_fp;
};

struct SimReport {
    std::string setting_label;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    std::array<MethodReport, 5> by_method;  // indexed by Method

    const MethodReport& operator[](Method m) const {
        return by_method[static_cast<std::size_t>(m)];
    }
};

namespace detail {

// Pairwise summation in fixed index order; keeps aggregation independent of
// the threading layout.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline MetricSummary summarize_metric(const std::vector<double>& values) {
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.estimate = pairwise_sum(values, 0, values.size()) / n;
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double d = values[i] - s.estimate;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq, 0, sq.size()) / (n - 1.0);
        s.stderror = std::sqrt(var / n);
    }
    return s;
}

}  // namespace detail

/// Runs `replicates` independent replicates of the setting, with one RNG
/// stream per replicate split from the root seed. The report is identical
/// for identical (setting, replicates, seed) regardless of thread count.
inline SimReport monte_carlo(const SimSetting& setting, std::size_t replicates,
                             std::uint64_t seed, std::size_t threads = 1) {
    if (replicates == 0) throw std::invalid_argument("monte_carlo: replicates must be >= 1");
    setting.validate();
    std::vector<std::array<ReplicateMetrics, 5>> records(replicates);
    std::vector<std::string> failures(replicates);

    const auto worker = [&](std::size_t first, std::size_t step) {
        for (std::size_t r = first; r < replicates; r += step) {
            try {
                RngStream rng = RngStream::from_root(seed, r);
                auto [ds, truth] = sample_dataset(setting, rng);
                const auto runs = run_methods(ds, setting);
                for (Method m : kAllMethods)
                    records[r][static_cast<std::size_t>(m)] =
                        compute_metrics(truth, ds, runs[m].pvalues, runs[m].rejection);
            } catch (const std::exception& e) {
                failures[r] = e.what();
            }
        }
    };

    if (threads <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
        for (auto& th : pool) th.join();
    }
    for (std::size_t r = 0; r < replicates; ++r)
        if (!failures[r].empty())
            throw numeric_error("monte_carlo: replicate " + std::to_string(r) + " failed: " +
                                failures[r]);

    SimReport report;
    report.setting_label = setting.label();
    report.replicates = replicates;
    report.seed = seed;
    for (Method m : kAllMethods) {
        const auto mi = static_cast<std::size_t>(m);
        std::vector<double> fdp, power, fndr, minsvar;
        fdp.reserve(replicates);
        for (std::size_t r = 0; r < replicates; ++r) {
            fdp.push_back(records[r][mi].fdp);
            power.push_back(records[r][mi].power);
            fndr.push_back(records[r][mi].fndr);
            if (records[r][mi].min_svar_fp) minsvar.push_back(*records[r][mi].min_svar_fp);
        }
        report.by_method[mi].fdr = detail::summarize_metric(fdp);
        report.by_method[mi].power = detail::summarize_metric(power);
        report.by_method[mi].fndr = detail::summarize_metric(fndr);
        report.by_method[mi].min_svar_fp = detail::summarize_metric(minsvar);
    }
    return report;
}

}  // namespace epb
