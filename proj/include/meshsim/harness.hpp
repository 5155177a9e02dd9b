#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "meshsim/metrics.hpp"
#include "meshsim/scenario.hpp"

namespace meshsim {

struct SummaryStats {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;
    bool n_too_small = false; // n == 1: the interval is undefined-wide
};

// Mean and Student-t 95% interval. Throws std::invalid_argument on an empty
// sample. All-equal samples give a zero-width interval; n == 1 flags
// n_too_small with an infinite-wide interval.
SummaryStats summarize(const std::vector<double>& samples);

// Executes cfg.repetitions runs with seeds base_seed + i across `jobs`
// workers. Records come back in repetition order regardless of execution
// interleaving. A failing run aborts the batch, reporting its seed.
std::vector<MetricsRecord> run_batch(const ScenarioConfig& cfg, int jobs = 0);

// Swept parameters understood by apply_parameter/sweep.
const std::vector<std::string>& sweep_parameter_names();

// Returns a copy of cfg with `param` set to `value`; throws
// std::invalid_argument for unknown parameters (listing valid names).
ScenarioConfig apply_parameter(const ScenarioConfig& cfg,
                               const std::string& param, double value);

inline const char* csv_header() {
    return "scenario_id,stack,placement,param,value,metric,mean,ci_low,ci_high,n";
}

// One summarized CSV row per (value, metric). Writes the header first.
void sweep(const ScenarioConfig& cfg, const std::string& param,
           const std::vector<double>& values,
           const std::vector<std::string>& metrics, std::ostream& out,
           int jobs = 0);

// Machine-readable provenance written beside a CSV.
std::string run_manifest_json(const ScenarioConfig& cfg);

} // namespace meshsim
