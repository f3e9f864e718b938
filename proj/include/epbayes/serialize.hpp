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

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "epbayes/npmle.hpp"
#include "epbayes/prior.hpp"
#include "epbayes/simbench.hpp"

namespace epb {

using json = nlohmann::ordered_json;

inline json to_json(const NpmleFit& fit) {
    json j;
    j["grid_lower"] = fit.grid.front();
    j["grid_upper"] = fit.grid.back();
    j["grid_size"] = fit.grid.size();
    j["support"] = fit.prior.support;
    j["weights"] = fit.prior.weights;
    j["log_likelihood"] = fit.log_likelihood;
    j["kkt_gap"] = fit.kkt_gap;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

// nu0 = +infinity is serialized as the 1e8 cap plus an explicit flag.
inline json to_json(const LimmaPrior& prior) {
    json j;
    j["nu0"] = prior.infinite() ? 1e8 : prior.nu0;
    j["nu0_infinite"] = prior.infinite();
    j["s0sq"] = prior.s0sq;
    return j;
}

inline json to_json(const MetricSummary& s) {
    return json{{"estimate", s.estimate}, {"stderr", s.stderror}, {"count", s.count}};
}

inline json to_json(const SimReport& report) {
    json j;
    j["setting"] = report.setting_label;
    j["replicates"] = report.replicates;
    j["seed"] = report.seed;
    json methods;
    for (Method m : kAllMethods) {
        const auto& mr = report[m];
        methods[method_name(m)] = json{{"fdr", to_json(mr.fdr)},
                                       {"power", to_json(mr.power)},
                                       {"fndr", to_json(mr.fndr)},
                                       {"min_svar_fp", to_json(mr.min_svar_fp)}};
    }
    j["methods"] = methods;
    return j;
}

/// Tidy CSV rows matching the report panels:
/// setting,method,metric,estimate,stderr,replicates,seed
inline void write_report_csv(const SimReport& report, std::ostream& out) {
    out << "setting,method,metric,estimate,stderr,replicates,seed\n";
    char buf[64];
    const auto emit = [&](Method m, const char* metric, const MetricSummary& s) {
        out << report.setting_label << ',' << method_name(m) << ',' << metric << ',';
        std::snprintf(buf, sizeof buf, "%.17g", s.estimate);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", s.stderror);
        out << buf << ',' << report.replicates << ',' << report.seed << '\n';
    };
    for (Method m : kAllMethods) {
        emit(m, "fdr", report[m].fdr);
        emit(m, "power", report[m].power);
        emit(m, "fndr", report[m].fndr);
        emit(m, "min_svar_fp", report[m].min_svar_fp);
    }
}

}  // namespace epb
