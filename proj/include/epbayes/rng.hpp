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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "epbayes/prior.hpp"
#include "epbayes/special.hpp"

namespace epb {

namespace detail {

// splitmix64; used only to decorrelate stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// A seedable random stream. Streams derived from the same root seed but
/// distinct stream ids are independent for practical purposes; each stream is
/// single-owner. All samplers are implemented on top of the stream's raw
/// 64-bit output so that sequences are reproducible across platforms.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t s = seed;
        const std::uint64_t w0 = detail::splitmix64(s);
        const std::uint64_t w1 = detail::splitmix64(s);
        std::seed_seq seq{static_cast<std::uint32_t>(w0), static_cast<std::uint32_t>(w0 >> 32),
                          static_cast<std::uint32_t>(w1), static_cast<std::uint32_t>(w1 >> 32)};
        eng_.seed(seq);
    }

    /// Stream number `stream_id` under the root seed.
    static RngStream from_root(std::uint64_t root_seed, std::uint64_t stream_id) {
        std::uint64_t s = root_seed + 0x9E3779B97F4A7C15ULL * stream_id;
        return RngStream(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::domain_error("uniform_below: n must be positive");
        const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= bound);
        return v % n;
    }

    double standard_normal() { return normal_quantile(uniform01()); }

    /// Gamma(shape, scale 1) via Marsaglia-Tsang.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::domain_error("gamma: shape must be positive");
        if (shape < 1.0)
            return gamma(shape + 1.0) * std::pow(uniform01(), 1.0 / shape);
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = standard_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chisq(double nu) {
        if (!(nu > 0.0)) throw std::domain_error("chisq: nu must be positive");
        return 2.0 * gamma(0.5 * nu);
    }

    /// sigma^2 with 1/sigma^2 ~ chi^2_{nu0} / (nu0 s0^2).
    double scaled_inv_chisq(double nu0, double s0sq) {
        if (!(nu0 > 0.0) || !(s0sq > 0.0))
            throw std::domain_error("scaled_inv_chisq: parameters must be positive");
        return nu0 * s0sq / chisq(nu0);
    }

private:
    std::mt19937_64 eng_;
};

/// Samples atoms of a discrete prior; caches the cumulative weights.
class DiscreteSampler {
public:
    explicit DiscreteSampler(const DiscretePrior& prior) : prior_(&prior) {
        cum_.reserve(prior.size());
        double acc = 0.0;
        for (double w : prior.weights) {
            acc += w;
            cum_.push_back(acc);
        }
        cum_.back() = 1.0;
    }

    double operator()(RngStream& rng) const {
        const double u = rng.uniform01();
        std::size_t lo = 0, hi = cum_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cum_[mid] < u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return prior_->support[lo];
    }

private:
    const DiscretePrior* prior_;
    std::vector<double> cum_;
};

inline double sample_discrete(RngStream& rng, const DiscretePrior& prior) {
    return DiscreteSampler(prior)(rng);
}

}  // namespace epb
