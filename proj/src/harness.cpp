#include "meshsim/harness.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "meshsim/network.hpp"

namespace meshsim {

SummaryStats summarize(const std::vector<double>& samples) {
    if (samples.empty())
        throw std::invalid_argument("summarize: empty sample set");
    SummaryStats s;
    s.n = samples.size();
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n == 1) {
        s.n_too_small = true;
        s.ci_low = -std::numeric_limits<double>::infinity();
        s.ci_high = std::numeric_limits<double>::infinity();
        return s;
    }
    double ss = 0.0;
    for (double v : samples) ss += (v - s.mean) * (v - s.mean);
    double var = ss / static_cast<double>(s.n - 1);
    if (var <= 0.0) {
        s.ci_low = s.ci_high = s.mean;
        return s;
    }
    boost::math::students_t dist(static_cast<double>(s.n - 1));
    double t = boost::math::quantile(dist, 0.975);
    double half = t * std::sqrt(var / static_cast<double>(s.n));
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    return s;
}

std::vector<MetricsRecord> run_batch(const ScenarioConfig& cfg, int jobs) {
    const int reps = cfg.repetitions;
    std::vector<MetricsRecord> records(static_cast<std::size_t>(reps));
    if (jobs <= 0)
        jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    jobs = std::min(jobs, reps);

    std::atomic<int> next{0};
    std::mutex err_mu;
    std::string error;

    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= reps) return;
            std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(i);
            try {
                Network net(cfg, seed);
                records[static_cast<std::size_t>(i)] = net.run();
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (error.empty())
                    error = "run with seed " + std::to_string(seed) +
                            " failed: " + e.what();
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (!error.empty()) throw std::runtime_error(error);
    return records;
}

const std::vector<std::string>& sweep_parameter_names() {
    static const std::vector<std::string> names = {
        "flow_request_rate", "bit_rate",          "hop_distance",
        "node_count",        "failed_link_count", "placement",
    };
    return names;
}

ScenarioConfig apply_parameter(const ScenarioConfig& cfg,
                               const std::string& param, double value) {
    ScenarioConfig out = cfg;
    if (param == "flow_request_rate") {
        out.traffic.flow_request_rate = value;
    } else if (param == "bit_rate") {
        out.traffic.bit_rate_bps = value;
    } else if (param == "hop_distance") {
        out.traffic.sources = TrafficSpec::Sources::HopDistance;
        out.traffic.hop_distance = static_cast<int>(value);
    } else if (param == "node_count") {
        out.topology.n = static_cast<int>(value);
    } else if (param == "failed_link_count") {
        SimTime at = cfg.faults.empty() ? SimTime{cfg.duration.us / 2}
                                        : cfg.faults.front().at;
        out.faults = {{at, static_cast<int>(value)}};
    } else if (param == "placement") {
        out.placement.kind =
            value < 0.5 ? PlacementKind::Embedded : PlacementKind::External;
    } else {
        std::string msg = "unknown sweep parameter '" + param + "'; valid:";
        for (const auto& n : sweep_parameter_names()) msg += " " + n;
        throw std::invalid_argument(msg);
    }
    return out;
}

void sweep(const ScenarioConfig& cfg, const std::string& param,
           const std::vector<double>& values,
           const std::vector<std::string>& metrics, std::ostream& out,
           int jobs) {
    out << csv_header() << "\n";
    const char* stack = cfg.stack == StackKind::Usdn ? "usdn" : "sdnwise";
    for (double value : values) {
        ScenarioConfig point = apply_parameter(cfg, param, value);
        const char* placement =
            point.placement.kind == PlacementKind::Embedded ? "embedded"
                                                            : "external";
        auto records = run_batch(point, jobs);
        for (const auto& metric : metrics) {
            std::vector<double> samples;
            samples.reserve(records.size());
            for (const auto& r : records) samples.push_back(r.metric(metric));
            SummaryStats s = summarize(samples);
            std::ostringstream row;
            row.precision(10);
            row << cfg.id << ',' << stack << ',' << placement << ',' << param
                << ',' << value << ',' << metric << ',' << s.mean << ','
                << s.ci_low << ',' << s.ci_high << ',' << s.n;
            out << row.str() << "\n";
        }
    }
}

std::string run_manifest_json(const ScenarioConfig& cfg) {
    std::ostringstream o;
    o << "{\n"
      << "  \"scenario_id\": \"" << cfg.id << "\",\n"
      << "  \"scenario_hash\": \"" << std::hex << scenario_hash(cfg) << std::dec
      << "\",\n"
      << "  \"base_seed\": " << cfg.base_seed << ",\n"
      << "  \"repetitions\": " << cfg.repetitions << ",\n"
      << "  \"seeds\": [";
    for (int i = 0; i < cfg.repetitions; ++i) {
        if (i) o << ", ";
        o << cfg.base_seed + static_cast<std::uint64_t>(i);
    }
    o << "]\n}\n";
    return o.str();
}

} // namespace meshsim
