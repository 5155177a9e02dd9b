#include "meshsim/metrics.hpp"

#include <stdexcept>

namespace meshsim {

const std::vector<std::string>& MetricsRecord::metric_names() {
    static const std::vector<std::string> names = {
        "pdr",
        "mean_app_latency_ms",
        "mean_rule_rtt_ms",
        "served_throughput",
        "mean_energy_mJ",
        "topology_discovery_ms",
        "topology_update_ms",
        "total_control_tx",
        "data_tx",
        "collisions",
        "app_sent",
        "app_delivered",
    };
    return names;
}

double MetricsRecord::metric(const std::string& name) const {
    if (name == "pdr") return pdr;
    if (name == "mean_app_latency_ms") return mean_app_latency_ms;
    if (name == "mean_rule_rtt_ms") return mean_rule_rtt_ms;
    if (name == "served_throughput") return served_throughput;
    if (name == "mean_energy_mJ") return mean_energy_mJ;
    if (name == "topology_discovery_ms") return topology_discovery_ms;
    if (name == "topology_update_ms") return topology_update_ms;
    if (name == "total_control_tx") return static_cast<double>(total_control_tx);
    if (name == "data_tx") return static_cast<double>(data_tx);
    if (name == "collisions") return static_cast<double>(collisions);
    if (name == "app_sent") return static_cast<double>(app_sent);
    if (name == "app_delivered") return static_cast<double>(app_delivered);
    std::string msg = "unknown metric '" + name + "'; valid:";
    for (const auto& n : metric_names()) msg += " " + n;
    throw std::invalid_argument(msg);
}

} // namespace meshsim
