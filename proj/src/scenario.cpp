#include "meshsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace meshsim {

namespace {

std::string join_errors(const std::vector<std::string>& errs) {
    std::string out = "scenario validation failed:";
    for (const auto& e : errs) {
        out += "\n  - ";
        out += e;
    }
    return out;
}

bool parse_bool(const std::string& v) {
    return v == "on" || v == "true" || v == "yes" || v == "1";
}

std::string bool_str(bool b) { return b ? "on" : "off"; }

double seconds(SimTime t) { return t.seconds(); }

} // namespace

ScenarioError::ScenarioError(std::vector<std::string> errs)
    : std::runtime_error(join_errors(errs)), errors(std::move(errs)) {}

std::vector<std::string> validate_scenario(const ScenarioConfig& c) {
    std::vector<std::string> errs;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };
    check(c.topology.n >= 2, "topology.n: must be >= 2");
    check(c.topology.spacing_m > 0, "topology.spacing_m: must be > 0");
    check(c.topology.area_m > 0, "topology.area_m: must be > 0");
    check(c.medium.tx_range_m > 0, "medium.tx_range_m: must be > 0");
    check(c.medium.interference_range_m >= c.medium.tx_range_m,
          "medium.interference_range_m: must be >= tx_range_m");
    check(c.medium.link_quality >= 0.0 && c.medium.link_quality <= 1.0,
          "medium.link_quality: must be in [0,1]");
    check(c.medium.phy_bit_rate_bps > 0, "medium.phy_bit_rate_bps: must be > 0");
    check(c.mac.max_retries >= 0, "mac.max_retries: must be >= 0");
    check(c.mac.queue_capacity >= 1, "mac.queue_capacity: must be >= 1");
    check(c.rdc.channel_check_rate_hz > 0, "rdc.check_rate_hz: must be > 0");
    check(c.placement.service_time.us > 0, "controller.service_time_ms: must be > 0");
    check(c.placement.queue_capacity >= 1, "controller.queue_capacity: must be >= 1");
    check(c.duration.us > 0, "scenario.duration_s: must be > 0");
    check(c.traffic.bit_rate_bps >= 0, "traffic.bit_rate_bps: must be >= 0");
    check(c.traffic.flow_request_rate >= 0, "traffic.flow_request_rate: must be >= 0");
    check(c.traffic.payload_bytes > 0, "traffic.payload_bytes: must be > 0");
    check(c.repetitions >= 1, "scenario.repetitions: must be >= 1");
    for (const auto& f : c.faults) {
        check(f.at.us >= 0, "faults: fault time must be >= 0");
        check(f.fail_links >= 0, "faults: fail count must be >= 0");
    }
    return errs;
}

ScenarioConfig parse_scenario(const std::string& text) {
    ScenarioConfig c;
    std::vector<std::string> errs;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    bool service_time_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);

        auto num = [&]() -> double {
            try {
                return std::stod(val);
            } catch (...) {
                errs.push_back(section + "." + key + ": not a number: '" + val + "'");
                return 0.0;
            }
        };
        auto integer = [&]() { return static_cast<int>(num()); };
        auto time_s = [&]() { return SimTime::from_seconds(num()); };
        auto time_ms = [&]() { return SimTime::from_seconds(num() / 1e3); };
        auto time_us = [&]() { return SimTime{static_cast<std::int64_t>(num())}; };
        auto unknown = [&]() {
            errs.push_back(section + "." + key + ": unknown key");
        };

        if (section == "scenario") {
            if (key == "id") c.id = val;
            else if (key == "duration_s") c.duration = time_s();
            else if (key == "repetitions") c.repetitions = integer();
            else if (key == "base_seed") c.base_seed = static_cast<std::uint64_t>(num());
            else unknown();
        } else if (section == "topology") {
            if (key == "kind") {
                if (val == "grid") c.topology.kind = TopologySpec::Kind::Grid;
                else if (val == "chain") c.topology.kind = TopologySpec::Kind::Chain;
                else if (val == "random") c.topology.kind = TopologySpec::Kind::Random;
                else errs.push_back("topology.kind: expected grid|chain|random");
            } else if (key == "n") c.topology.n = integer();
            else if (key == "spacing_m") c.topology.spacing_m = num();
            else if (key == "area_m") c.topology.area_m = num();
            else if (key == "seed") c.topology.seed = static_cast<std::uint64_t>(num());
            else unknown();
        } else if (section == "stack") {
            if (key == "kind") {
                if (val == "usdn") c.stack = StackKind::Usdn;
                else if (val == "sdnwise") c.stack = StackKind::SdnWise;
                else errs.push_back("stack.kind: expected usdn|sdnwise");
            } else if (key == "wise_install") {
                if (val == "openpath") c.wise_mode = WiseInstallMode::OpenPath;
                else if (val == "perhop") c.wise_mode = WiseInstallMode::PerHopResponse;
                else errs.push_back("stack.wise_install: expected openpath|perhop");
            } else unknown();
        } else if (section == "medium") {
            if (key == "tx_range_m") c.medium.tx_range_m = num();
            else if (key == "interference_range_m") c.medium.interference_range_m = num();
            else if (key == "link_quality") c.medium.link_quality = num();
            else if (key == "distance_loss") c.medium.distance_loss = parse_bool(val);
            else if (key == "phy_bit_rate_bps") c.medium.phy_bit_rate_bps = num();
            else unknown();
        } else if (section == "mac") {
            if (key == "max_retries") c.mac.max_retries = integer();
            else if (key == "queue_capacity") c.mac.queue_capacity = integer();
            else if (key == "backoff_unit_us") c.mac.backoff_unit = time_us();
            else if (key == "max_backoff_exponent") c.mac.max_backoff_exponent = integer();
            else unknown();
        } else if (section == "rdc") {
            if (key == "check_rate_hz") c.rdc.channel_check_rate_hz = num();
            else if (key == "strobe") c.rdc.strobe_enabled = parse_bool(val);
            else if (key == "listen_window_us") c.rdc.listen_window = time_us();
            else unknown();
        } else if (section == "energy") {
            if (key == "tx_mA") c.energy.tx_current_mA = num();
            else if (key == "rx_mA") c.energy.rx_current_mA = num();
            else if (key == "listen_mA") c.energy.listen_current_mA = num();
            else if (key == "voltage_v") c.energy.voltage_v = num();
            else unknown();
        } else if (section == "rpl") {
            if (key == "objective") {
                if (val == "hop") c.rpl.objective = RplObjective::HopCount;
                else if (val == "etx") c.rpl.objective = RplObjective::Etx;
                else errs.push_back("rpl.objective: expected hop|etx");
            } else if (key == "rank_increment") c.rpl.rank_increment = static_cast<std::uint32_t>(num());
            else if (key == "route_lifetime_s") c.rpl.route_lifetime = time_s();
            else if (key == "trickle_imin_s") c.rpl.trickle_imin = time_s();
            else if (key == "trickle_imax_s") c.rpl.trickle_imax = time_s();
            else if (key == "trickle_k") c.rpl.trickle_k = integer();
            else unknown();
        } else if (section == "usdn") {
            if (key == "table_capacity") c.usdn.table_capacity = integer();
            else if (key == "pending_buffer") c.usdn.pending_buffer = integer();
            else if (key == "flowtable_lifetime_s") c.usdn.flowtable_lifetime = time_s();
            else if (key == "nsu_period_s") c.usdn.nsu_period = time_s();
            else unknown();
        } else if (section == "wise") {
            if (key == "table_capacity") c.wise.table_capacity = integer();
            else if (key == "beacon_period_s") c.wise.beacon_period = time_s();
            else if (key == "report_period_s") c.wise.report_period = time_s();
            else if (key == "table_ttl_s") c.wise.table_ttl = time_s();
            else unknown();
        } else if (section == "controller") {
            if (key == "placement") {
                if (val == "embedded") c.placement.kind = PlacementKind::Embedded;
                else if (val == "external") c.placement.kind = PlacementKind::External;
                else errs.push_back("controller.placement: expected embedded|external");
            } else if (key == "service_time_ms") {
                c.placement.service_time = time_ms();
                service_time_set = true;
            }
            else if (key == "backhaul_delay_ms") c.placement.backhaul_delay = time_ms();
            else if (key == "backhaul_rate_bps") c.placement.backhaul_rate_bps = num();
            else if (key == "slip_overhead_bytes") c.placement.slip_overhead_bytes = integer();
            else if (key == "queue_capacity") c.placement.queue_capacity = integer();
            else if (key == "weighted_routes") c.weighted_routes = parse_bool(val);
            else unknown();
        } else if (section == "traffic") {
            if (key == "bit_rate_bps") c.traffic.bit_rate_bps = num();
            else if (key == "payload_bytes") c.traffic.payload_bytes = integer();
            else if (key == "frame_overhead_bytes") c.traffic.frame_overhead_bytes = integer();
            else if (key == "flow_request_rate") c.traffic.flow_request_rate = num();
            else if (key == "start_s") c.traffic.start = time_s();
            else if (key == "arrivals") {
                if (val == "deterministic") c.traffic.exponential_arrivals = false;
                else if (val == "exponential") c.traffic.exponential_arrivals = true;
                else errs.push_back("traffic.arrivals: expected deterministic|exponential");
            } else if (key == "sources") {
                if (val == "all") c.traffic.sources = TrafficSpec::Sources::AllNonSink;
                else if (val.rfind("hop:", 0) == 0) {
                    c.traffic.sources = TrafficSpec::Sources::HopDistance;
                    c.traffic.hop_distance = std::atoi(val.c_str() + 4);
                } else if (val.rfind("count:", 0) == 0) {
                    c.traffic.sources = TrafficSpec::Sources::Count;
                    c.traffic.source_count = std::atoi(val.c_str() + 6);
                } else errs.push_back("traffic.sources: expected all|hop:<d>|count:<k>");
            } else unknown();
        } else if (section == "faults") {
            if (key == "fail") {
                std::istringstream fs(val);
                double t = 0;
                int k = -1;
                fs >> t >> k;
                if (fs.fail() || k < 0)
                    errs.push_back("faults.fail: expected '<time_s> <k>'");
                else
                    c.faults.push_back({SimTime::from_seconds(t), k});
            } else unknown();
        } else {
            errs.push_back("line " + std::to_string(lineno) + ": unknown section [" +
                           section + "]");
        }
    }

    // Placement-specific default: the backend controller serves much faster
    // than the sink-hosted one.
    if (!service_time_set && c.placement.kind == PlacementKind::External)
        c.placement.service_time = SimTime::from_ms(1);

    auto verrs = validate_scenario(c);
    errs.insert(errs.end(), verrs.begin(), verrs.end());
    if (!errs.empty()) throw ScenarioError(std::move(errs));
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError({"cannot open scenario file: " + path});
    std::ostringstream ss;
    ss << in.rdbuf();
    ScenarioConfig c = parse_scenario(ss.str());
    if (const char* env = std::getenv("MESHSIM_BASE_SEED"))
        c.base_seed = std::strtoull(env, nullptr, 10);
    return c;
}

std::string serialize_scenario(const ScenarioConfig& c) {
    std::ostringstream o;
    o.precision(12);
    o << "[scenario]\n"
      << "id = " << c.id << "\n"
      << "duration_s = " << seconds(c.duration) << "\n"
      << "repetitions = " << c.repetitions << "\n"
      << "base_seed = " << c.base_seed << "\n";
    o << "[topology]\n"
      << "kind = "
      << (c.topology.kind == TopologySpec::Kind::Grid
              ? "grid"
              : c.topology.kind == TopologySpec::Kind::Chain ? "chain" : "random")
      << "\n"
      << "n = " << c.topology.n << "\n"
      << "spacing_m = " << c.topology.spacing_m << "\n"
      << "area_m = " << c.topology.area_m << "\n"
      << "seed = " << c.topology.seed << "\n";
    o << "[stack]\n"
      << "kind = " << (c.stack == StackKind::Usdn ? "usdn" : "sdnwise") << "\n"
      << "wise_install = "
      << (c.wise_mode == WiseInstallMode::OpenPath ? "openpath" : "perhop") << "\n";
    o << "[medium]\n"
      << "tx_range_m = " << c.medium.tx_range_m << "\n"
      << "interference_range_m = " << c.medium.interference_range_m << "\n"
      << "link_quality = " << c.medium.link_quality << "\n"
      << "distance_loss = " << bool_str(c.medium.distance_loss) << "\n"
      << "phy_bit_rate_bps = " << c.medium.phy_bit_rate_bps << "\n";
    o << "[mac]\n"
      << "max_retries = " << c.mac.max_retries << "\n"
      << "queue_capacity = " << c.mac.queue_capacity << "\n"
      << "backoff_unit_us = " << c.mac.backoff_unit.us << "\n"
      << "max_backoff_exponent = " << c.mac.max_backoff_exponent << "\n";
    o << "[rdc]\n"
      << "check_rate_hz = " << c.rdc.channel_check_rate_hz << "\n"
      << "strobe = " << bool_str(c.rdc.strobe_enabled) << "\n"
      << "listen_window_us = " << c.rdc.listen_window.us << "\n";
    o << "[energy]\n"
      << "tx_mA = " << c.energy.tx_current_mA << "\n"
      << "rx_mA = " << c.energy.rx_current_mA << "\n"
      << "listen_mA = " << c.energy.listen_current_mA << "\n"
      << "voltage_v = " << c.energy.voltage_v << "\n";
    o << "[rpl]\n"
      << "objective = " << (c.rpl.objective == RplObjective::HopCount ? "hop" : "etx")
      << "\n"
      << "rank_increment = " << c.rpl.rank_increment << "\n"
      << "route_lifetime_s = " << seconds(c.rpl.route_lifetime) << "\n"
      << "trickle_imin_s = " << seconds(c.rpl.trickle_imin) << "\n"
      << "trickle_imax_s = " << seconds(c.rpl.trickle_imax) << "\n"
      << "trickle_k = " << c.rpl.trickle_k << "\n";
    o << "[usdn]\n"
      << "table_capacity = " << c.usdn.table_capacity << "\n"
      << "pending_buffer = " << c.usdn.pending_buffer << "\n"
      << "flowtable_lifetime_s = " << seconds(c.usdn.flowtable_lifetime) << "\n"
      << "nsu_period_s = " << seconds(c.usdn.nsu_period) << "\n";
    o << "[wise]\n"
      << "table_capacity = " << c.wise.table_capacity << "\n"
      << "beacon_period_s = " << seconds(c.wise.beacon_period) << "\n"
      << "report_period_s = " << seconds(c.wise.report_period) << "\n"
      << "table_ttl_s = " << seconds(c.wise.table_ttl) << "\n";
    o << "[controller]\n"
      << "placement = "
      << (c.placement.kind == PlacementKind::Embedded ? "embedded" : "external")
      << "\n"
      << "service_time_ms = " << c.placement.service_time.us / 1e3 << "\n"
      << "backhaul_delay_ms = " << c.placement.backhaul_delay.us / 1e3 << "\n"
      << "backhaul_rate_bps = " << c.placement.backhaul_rate_bps << "\n"
      << "slip_overhead_bytes = " << c.placement.slip_overhead_bytes << "\n"
      << "queue_capacity = " << c.placement.queue_capacity << "\n"
      << "weighted_routes = " << bool_str(c.weighted_routes) << "\n";
    o << "[traffic]\n"
      << "bit_rate_bps = " << c.traffic.bit_rate_bps << "\n"
      << "payload_bytes = " << c.traffic.payload_bytes << "\n"
      << "frame_overhead_bytes = " << c.traffic.frame_overhead_bytes << "\n"
      << "flow_request_rate = " << c.traffic.flow_request_rate << "\n"
      << "start_s = " << seconds(c.traffic.start) << "\n"
      << "arrivals = "
      << (c.traffic.exponential_arrivals ? "exponential" : "deterministic") << "\n";
    o << "sources = ";
    switch (c.traffic.sources) {
        case TrafficSpec::Sources::AllNonSink: o << "all"; break;
        case TrafficSpec::Sources::HopDistance:
            o << "hop:" << c.traffic.hop_distance;
            break;
        case TrafficSpec::Sources::Count: o << "count:" << c.traffic.source_count; break;
    }
    o << "\n";
    if (!c.faults.empty()) {
        o << "[faults]\n";
        for (const auto& f : c.faults)
            o << "fail = " << seconds(f.at) << " " << f.fail_links << "\n";
    }
    return o.str();
}

std::uint64_t scenario_hash(const ScenarioConfig& cfg) {
    std::string s = serialize_scenario(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<NodePosition> generate_topology(const TopologySpec& topo,
                                            const MediumConfig& medium) {
    std::vector<NodePosition> pos(static_cast<std::size_t>(topo.n));
    if (topo.kind == TopologySpec::Kind::Grid) {
        int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(topo.n))));
        for (int i = 0; i < topo.n; ++i)
            pos[static_cast<std::size_t>(i)] = {(i % cols) * topo.spacing_m,
                                                (i / cols) * topo.spacing_m};
        return pos;
    }
    if (topo.kind == TopologySpec::Kind::Chain) {
        for (int i = 0; i < topo.n; ++i)
            pos[static_cast<std::size_t>(i)] = {i * topo.spacing_m, 0.0};
        return pos;
    }

    auto connected = [&](const std::vector<NodePosition>& p) {
        std::vector<bool> seen(p.size(), false);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = true;
        std::size_t count = 1;
        while (!q.empty()) {
            auto cur = q.front();
            q.pop();
            for (std::size_t o = 0; o < p.size(); ++o) {
                if (seen[o]) continue;
                double d = std::hypot(p[cur].x - p[o].x, p[cur].y - p[o].y);
                if (d <= medium.tx_range_m) {
                    seen[o] = true;
                    ++count;
                    q.push(o);
                }
            }
        }
        return count == p.size();
    };

    RngStream rng(topo.seed, 0xa11ce);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (auto& p : pos)
            p = {rng.next_double() * topo.area_m, rng.next_double() * topo.area_m};
        if (connected(pos)) return pos;
    }
    throw ScenarioError({"random topology: no connected layout after 1000 attempts"});
}

} // namespace meshsim
