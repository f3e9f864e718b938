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
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "epbayes/errors.hpp"

namespace epb {

/// One hypothesis's Gaussian summary: effect estimate z and squared
/// standard-error scale s2 > 0.
struct SummaryPair {
    std::string id;
    double z = 0.0;
    double s2 = 0.0;
};

/// The n-hypothesis collection; all units share one degrees-of-freedom nu.
struct SummaryDataset {
    std::vector<SummaryPair> pairs;
    double nu = 0.0;

    std::size_t size() const { return pairs.size(); }

    std::vector<double> s2_values() const {
        std::vector<double> v;
        v.reserve(pairs.size());
        for (const auto& p : pairs) v.push_back(p.s2);
        return v;
    }

    void validate() const {
        if (!(nu >= 2.0))
            throw std::domain_error("SummaryDataset: nu must be >= 2");
        std::unordered_set<std::string> seen;
        for (const auto& p : pairs) {
            if (!std::isfinite(p.z))
                throw std::domain_error("SummaryDataset: z must be finite (id " + p.id + ")");
            if (!(p.s2 > 0.0) || !std::isfinite(p.s2))
                throw std::domain_error("SummaryDataset: s2 must be positive (id " + p.id + ")");
            if (!seen.insert(p.id).second)
                throw std::domain_error("SummaryDataset: duplicate id " + p.id);
        }
    }
};

struct ContrastSummary {
    double z;
    double s2;
    double nu;
};

/// Summarizes one unit's linear-model fit into (z, s2, nu):
///   z  = c' beta_hat (OLS),
///   s2 = c'(X'X)^{-1}c * RSS / (K - p),
///   nu = K - p.
/// `design` is row-major K x p and must have full column rank.
inline ContrastSummary summarize_contrast(const std::vector<double>& y,
                                          const std::vector<double>& design,
                                          std::size_t n_rows, std::size_t n_cols,
                                          const std::vector<double>& contrast) {
    const std::size_t K = n_rows, p = n_cols;
    if (y.size() != K || design.size() != K * p || contrast.size() != p)
        throw std::invalid_argument("summarize_contrast: dimension mismatch");
    if (K <= p)
        throw std::domain_error("summarize_contrast: need more samples than covariates");

    // Householder QR of the design; R is stored in the top p x p triangle and
    // the reflections are applied to a working copy of y as we go.
    std::vector<double> A = design;
    std::vector<double> qty = y;
    double col_scale = 0.0;
    for (double v : A) col_scale = std::max(col_scale, std::fabs(v));
    if (col_scale == 0.0) throw std::domain_error("summarize_contrast: zero design matrix");

    for (std::size_t j = 0; j < p; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < K; ++i) norm += A[i * p + j] * A[i * p + j];
        norm = std::sqrt(norm);
        if (norm <= 1e-12 * col_scale * std::sqrt(static_cast<double>(K)))
            throw std::domain_error("summarize_contrast: design is rank deficient");
        if (A[j * p + j] < 0.0) norm = -norm;
        // Householder vector v = x + sign(x_j) ||x|| e_j, stored in place.
        A[j * p + j] += norm;
        const double vtv = norm * A[j * p + j];
        for (std::size_t c = j + 1; c < p; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < K; ++i) dot += A[i * p + j] * A[i * p + c];
            const double tau = dot / vtv;
            for (std::size_t i = j; i < K; ++i) A[i * p + c] -= tau * A[i * p + j];
        }
        double doty = 0.0;
        for (std::size_t i = j; i < K; ++i) doty += A[i * p + j] * qty[i];
        const double tau = doty / vtv;
        for (std::size_t i = j; i < K; ++i) qty[i] -= tau * A[i * p + j];
        A[j * p + j] = -norm;  // R_jj
    }

    // beta from R beta = (Q'y)_{1..p}; residual sum of squares from the tail.
    std::vector<double> beta(p);
    for (std::size_t jj = p; jj-- > 0;) {
        double acc = qty[jj];
        for (std::size_t c = jj + 1; c < p; ++c) acc -= A[jj * p + c] * beta[c];
        beta[jj] = acc / A[jj * p + jj];
    }
    double rss = 0.0;
    for (std::size_t i = p; i < K; ++i) rss += qty[i] * qty[i];

    // c'(X'X)^{-1} c = ||R^{-T} c||^2 via forward substitution.
    std::vector<double> w(p);
    for (std::size_t j = 0; j < p; ++j) {
        double acc = contrast[j];
        for (std::size_t r = 0; r < j; ++r) acc -= A[r * p + j] * w[r];
        w[j] = acc / A[j * p + j];
    }
    double quad = 0.0;
    for (double v : w) quad += v * v;

    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) z += contrast[j] * beta[j];

    double ynorm2 = 0.0;
    for (double v : y) ynorm2 += v * v;
    const double nu = static_cast<double>(K - p);
    const double s2 = quad * rss / nu;
    if (quad <= 0.0 || rss <= 1e-20 * std::max(ynorm2, 1e-300) || !(s2 > 0.0))
        throw std::domain_error("summarize_contrast: degenerate variance");
    return {z, s2, nu};
}

// ---------------------------------------------------------------------------
// CSV ingestion. Pairs files have the exact header `id,z,s2`; matrix files
// have header `id,y1,...,yK`. Values are 64-bit floats, `.` decimal,
// scientific notation accepted.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    out.push_back(field);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw parse_error("line " + std::to_string(line_no) + ": non-numeric " + what + " '" + s + "'");
    return v;
}

}  // namespace detail

/// Reads a pairs CSV (header `id,z,s2`). nu is supplied by the caller.
inline SummaryDataset read_pairs(const std::string& path, double nu) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    SummaryDataset ds;
    ds.nu = nu;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw parse_error(path + ": empty file");
    ++line_no;
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || header[0] != "id" || header[1] != "z" || header[2] != "s2")
        throw parse_error(path + ": expected header 'id,z,s2'");
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 3)
            throw parse_error("line " + std::to_string(line_no) + ": expected 3 fields");
        SummaryPair p;
        p.id = fields[0];
        p.z = detail::parse_double(fields[1], "z", line_no);
        p.s2 = detail::parse_double(fields[2], "s2", line_no);
        if (!std::isfinite(p.z))
            throw parse_error("line " + std::to_string(line_no) + ": z must be finite");
        if (!(p.s2 > 0.0) || !std::isfinite(p.s2))
            throw parse_error("line " + std::to_string(line_no) + ": s2 must be positive");
        if (!seen.insert(p.id).second)
            throw parse_error("line " + std::to_string(line_no) + ": duplicate id '" + p.id + "'");
        ds.pairs.push_back(std::move(p));
    }
    ds.validate();
    return ds;
}

/// Writes a pairs CSV with round-trip-exact doubles.
inline void write_pairs(const SummaryDataset& ds, std::ostream& out) {
    out << "id,z,s2\n";
    char buf[64];
    for (const auto& p : ds.pairs) {
        out << p.id << ',';
        std::snprintf(buf, sizeof buf, "%.17g", p.z);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", p.s2);
        out << buf << '\n';
    }
}

/// Reads a design CSV: one row per sample, p numeric columns, and an optional
/// header row (detected by a non-numeric first field).
inline std::pair<std::vector<double>, std::size_t> read_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::vector<double> data;
    std::size_t cols = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (cols == 0) {
            char* end = nullptr;
            std::strtod(fields[0].c_str(), &end);
            if (end != fields[0].c_str() + fields[0].size()) continue;  // header row
            cols = fields.size();
        }
        if (fields.size() != cols)
            throw parse_error(path + " line " + std::to_string(line_no) + ": ragged design row");
        for (const auto& f : fields) data.push_back(detail::parse_double(f, "design entry", line_no));
    }
    if (cols == 0) throw parse_error(path + ": no design rows");
    return {std::move(data), cols};
}

struct MatrixReadResult {
    SummaryDataset dataset;
    std::size_t dropped = 0;  // units with degenerate variance
};

/// Reads a replicate matrix (header `id,y1,...,yK`) and summarizes every unit
/// against the design and contrast. Units with degenerate variance are
/// dropped and counted.
inline MatrixReadResult read_matrix(const std::string& path, const std::string& design_path,
                                    const std::vector<double>& contrast) {
    auto [design, p] = read_design(design_path);
    const std::size_t K = design.size() / p;
    if (contrast.size() != p)
        throw parse_error("contrast has " + std::to_string(contrast.size()) +
                          " entries but design has " + std::to_string(p) + " columns");
    if (K <= p)
        throw parse_error("design must have more rows than columns");

    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    MatrixReadResult res;
    res.dataset.nu = static_cast<double>(K - p);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw parse_error(path + ": empty file");
    ++line_no;
    const auto header = detail::split_csv_line(line);
    if (header.size() != K + 1 || header[0] != "id")
        throw parse_error(path + ": expected header 'id,y1,...,y" + std::to_string(K) +
                          "' matching the design rows");
    std::unordered_set<std::string> seen;
    std::vector<double> y(K);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != K + 1)
            throw parse_error("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(K + 1) + " fields");
        for (std::size_t j = 0; j < K; ++j)
            y[j] = detail::parse_double(fields[j + 1], "response", line_no);
        if (!seen.insert(fields[0]).second)
            throw parse_error("line " + std::to_string(line_no) + ": duplicate id '" + fields[0] + "'");
        try {
            const auto s = summarize_contrast(y, design, K, p, contrast);
            res.dataset.pairs.push_back({fields[0], s.z, s.s2});
        } catch (const std::domain_error& e) {
            if (std::string(e.what()).find("degenerate variance") == std::string::npos) throw;
            ++res.dropped;
        }
    }
    res.dataset.validate();
    return res;
}

}  // namespace epb
