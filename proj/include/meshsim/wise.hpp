#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"

namespace meshsim {

struct WiseConfig {
    int table_capacity = 16; // FIFO eviction
    int pending_buffer = 4;
    int state_array_len = 16;
    SimTime beacon_period = SimTime::from_s(5);
    SimTime report_period = SimTime::from_s(60);
    SimTime table_ttl = SimTime::from_s(300);
    SimTime sweep_period = SimTime::from_s(10);
    SimTime query_timeout = SimTime::from_s(10); // re-query after this
    // RSSI-style acceptance floor: beacons heard over weaker links are
    // ignored for next-hop adoption (a node with no hop yet still adopts).
    double min_beacon_quality = 0.3;
    int beacon_bytes = 16;
    int join_bytes = 14;
    int request_bytes = 26;
    int response_bytes = 52;
    int openpath_bytes = 48;
    int report_bytes = 46;
    int config_bytes = 40;
    // Stateful per-hop costs: table lookup before each forward, install per
    // received rule set.
    SimTime lookup_delay{800};
    SimTime install_delay{2000};
};

// WISE flow table: ordered first-match entries of 1..3 conjunctive windows.
class WiseTable {
public:
    struct Entry {
        WiseRule rule;
        SimTime installed_at{0};
        SimTime last_used{0};
        std::uint64_t hits = 0;
    };

    WiseTable(int capacity, SimTime default_ttl)
        : capacity_(capacity), default_ttl_(default_ttl) {}

    void install(WiseRule rule, SimTime now);
    // First matching entry in table order; touches stats on hit.
    Entry* first_match(NodeId src, NodeId dst, MsgKind type,
                       const std::vector<std::uint8_t>& state, SimTime now);
    void expire(SimTime now);

    std::size_t size() const { return entries_.size(); }
    const std::deque<Entry>& entries() const { return entries_; }

    static bool window_holds(const WiseWindow& w, NodeId src, NodeId dst,
                             MsgKind type, const std::vector<std::uint8_t>& state);

private:
    SimTime ttl_of(const WiseRule& r) const {
        return r.ttl.us > 0 ? r.ttl : default_ttl_;
    }
    bool expired(const Entry& e, SimTime now) const {
        return (now - e.last_used) >= ttl_of(e.rule);
    }

    int capacity_;
    SimTime default_ttl_;
    std::deque<Entry> entries_;
};

struct WiseCounters {
    std::uint64_t requests_sent = 0;
    std::uint64_t filter_drops = 0;
    std::uint64_t buffer_drops = 0;
    std::uint64_t delivered = 0;
    std::uint64_t partial_openpath = 0;
};

constexpr std::uint32_t kWiseHopInf = 0xffffffff;

// SDN-WISE stateful node: WISE flow table, state array, accepted-ID filter,
// TDM next-hop maintenance, Config/OpenPath/Request/Response/Report.
class WiseNode {
public:
    using EmitFn = std::function<void(Frame)>;
    using AppDeliverFn = std::function<void(const Frame&)>;
    using LinkQualityFn = std::function<double(NodeId neighbor)>;
    using ReportFn = std::function<ReportBody()>;
    using RuleRttFn = std::function<void(std::uint64_t query_id, SimTime emitted)>;
    using InstallFn = std::function<void(std::uint64_t flow_id)>;

    WiseNode(Kernel& kernel, NodeId id, NodeId sink, WiseConfig cfg, EmitFn emit)
        : kernel_(&kernel), id_(id), sink_(sink), cfg_(cfg),
          table_(cfg.table_capacity, cfg.table_ttl),
          state_(static_cast<std::size_t>(cfg.state_array_len), 0),
          emit_(std::move(emit)) {
        accepted_ids_.insert(id_);
        if (id_ == sink_) {
            hop_distance_ = 0;
            configured_ = true;
        }
    }

    void set_app_deliver(AppDeliverFn fn) { app_deliver_ = std::move(fn); }
    void set_link_quality(LinkQualityFn fn) { link_quality_ = std::move(fn); }
    void set_report_metrics(ReportFn fn) { report_metrics_ = std::move(fn); }
    void set_rule_installed(RuleRttFn fn) { rule_installed_ = std::move(fn); }
    void set_on_install(InstallFn fn) { on_install_ = std::move(fn); }

    void start();
    void on_frame(const Frame& frame);
    PacketOutcome handle_packet(Frame pkt);
    void configure(const ConfigBody& body);

    bool configured() const { return configured_; }
    std::uint32_t hop_distance() const { return hop_distance_; }
    NodeId next_hop_to_sink() const { return next_hop_; }
    const std::set<NodeId>& accepted_ids() const { return accepted_ids_; }
    WiseTable& table() { return table_; }
    std::vector<std::uint8_t>& state_array() { return state_; }
    const WiseCounters& counters() const { return counters_; }

    void modify_state(int index, std::uint8_t value) {
        state_[static_cast<std::size_t>(index)] = value;
    }

    // MAC retry exhaustion toward the TDM next hop: forget it and re-learn
    // from subsequent beacons.
    void on_next_hop_failed(NodeId hop);

    std::uint64_t next_query_id() {
        return (static_cast<std::uint64_t>(id_) << 32) | ++query_seq_;
    }

private:
    void send_beacon();
    void on_beacon(const Frame& frame);
    void send_join();
    void send_up(Frame f);
    void emit_request(NodeId src, NodeId dst, std::uint64_t flow);
    void on_response(const Frame& frame);
    void on_openpath(Frame frame);
    void send_report();
    void release_pending();
    void install_for_path(const OpenPathBody& op);
    void finish_query(std::uint64_t query_id);
    void sweep();

    Kernel* kernel_;
    NodeId id_;
    NodeId sink_;
    WiseConfig cfg_;
    WiseTable table_;
    std::vector<std::uint8_t> state_;
    EmitFn emit_;
    AppDeliverFn app_deliver_;
    LinkQualityFn link_quality_;
    ReportFn report_metrics_;
    RuleRttFn rule_installed_;
    InstallFn on_install_;

    std::set<NodeId> accepted_ids_;
    NodeId next_hop_ = kNoNode;
    std::uint32_t hop_distance_ = kWiseHopInf;
    bool configured_ = false;
    bool beaconing_ = false;
    bool reporting_ = false;

    std::deque<Frame> pending_;
    std::map<std::pair<NodeId, std::uint64_t>, std::pair<std::uint64_t, SimTime>> outstanding_;
    std::uint64_t query_seq_ = 0;
    WiseCounters counters_;
};

} // namespace meshsim
