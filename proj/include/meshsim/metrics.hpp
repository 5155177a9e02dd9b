#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace meshsim {

// Per-run measurements. A record is a pure function of (scenario, seed).
struct MetricsRecord {
    std::uint64_t seed = 0;

    std::uint64_t app_sent = 0;
    std::uint64_t app_delivered = 0;
    double pdr = 1.0;

    double mean_app_latency_ms = 0.0;
    std::uint64_t latency_samples = 0;

    // Querying-node round trip: FTQ/Request emission to usable rule.
    double mean_rule_rtt_ms = 0.0;
    std::uint64_t rtt_samples = 0;

    // Controller requests served per second over the traffic window.
    double served_throughput = 0.0;
    std::uint64_t served_requests = 0;

    std::vector<double> energy_per_node_mJ;
    double mean_energy_mJ = 0.0;

    double topology_discovery_ms = 0.0; // first join to last configured node
    double topology_update_ms = 0.0;    // mean over fault events
    std::uint64_t repairs_completed = 0;

    std::map<std::string, std::uint64_t> control_tx; // per message kind
    std::uint64_t total_control_tx = 0;
    std::uint64_t data_tx = 0;
    std::uint64_t collisions = 0;

    std::map<std::string, std::uint64_t> drops; // by cause
    std::uint64_t trace_digest = 0;

    // Named accessor used by sweeps/CSV; throws std::invalid_argument for
    // unknown names, listing the valid ones.
    double metric(const std::string& name) const;
    static const std::vector<std::string>& metric_names();
};

} // namespace meshsim
