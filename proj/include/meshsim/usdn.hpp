#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"

namespace meshsim {

struct UsdnConfig {
    int table_capacity = 16;
    int pending_buffer = 4; // drop-oldest
    SimTime flowtable_lifetime = SimTime::from_s(300);
    SimTime nsu_period = SimTime::from_s(60);
    SimTime sweep_period = SimTime::from_s(10);
    SimTime query_timeout = SimTime::from_s(10); // re-query after this
    int ftq_bytes = 18;
    int fts_bytes = 40;
    int nsu_bytes = 36;
    int conf_bytes = 32;
    // Per-hop SRH forwarding cost (header walk, no table lookup).
    SimTime srh_forward_delay{200};
    SimTime table_op_delay{500};
};

// Stateless uSDN flowtable: match on (src, dst, flow) with priority then
// specificity precedence, lifetimes, and local refresh of regularly used
// rules.
class FlowTable {
public:
    struct Entry {
        FlowRule rule;
        SimTime installed_at{0};
        SimTime last_used{0};
        std::uint64_t insertion = 0;
        std::uint64_t hits = 0;
    };

    explicit FlowTable(int capacity, SimTime default_lifetime)
        : capacity_(capacity), default_lifetime_(default_lifetime) {}

    // Same match => replace. A full table evicts the least-recently-used
    // non-refreshable entry (falling back to plain LRU).
    void install(FlowRule rule, SimTime now);

    // Highest priority wins, then most-specific match, then insertion order.
    // Touches last_used on hit. Expired entries never match.
    Entry* match(NodeId src, NodeId dst, std::uint64_t flow, SimTime now);

    // Evicts entries idle for >= lifetime; refreshable entries used within
    // lifetime/2 get last_used reset without contacting the controller.
    void expire_and_refresh(SimTime now);

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    static int specificity(const FlowRule& r);
    static bool same_match(const FlowRule& a, const FlowRule& b);
    SimTime lifetime_of(const FlowRule& r) const {
        return r.lifetime.us >= 0 ? r.lifetime : default_lifetime_;
    }
    bool expired(const Entry& e, SimTime now) const {
        SimTime lt = lifetime_of(e.rule);
        return (now - e.last_used) >= lt;
    }

    int capacity_;
    SimTime default_lifetime_;
    std::vector<Entry> entries_;
    std::uint64_t next_insertion_ = 0;
};

struct UsdnCounters {
    std::uint64_t ftq_sent = 0;
    std::uint64_t buffer_drops = 0;
    std::uint64_t filter_drops = 0;
    std::uint64_t delivered = 0;
};

// The uSDN data/control plane on one node: SRH forwarding at relays,
// flowtable with refresh, FTQ/FTS/NSU/CONF signaling.
class UsdnNode {
public:
    using EmitFn = std::function<void(Frame)>;
    using AppDeliverFn = std::function<void(const Frame&)>;
    using ParentFn = std::function<NodeId()>;
    using NsuMetricsFn = std::function<NsuBody()>;
    using RuleRttFn = std::function<void(std::uint64_t query_id, SimTime emitted)>;
    using InstallFn = std::function<void(const FtsBody&)>;

    UsdnNode(Kernel& kernel, NodeId id, NodeId sink, UsdnConfig cfg, EmitFn emit)
        : kernel_(&kernel), id_(id), sink_(sink), cfg_(cfg),
          table_(cfg.table_capacity, cfg.flowtable_lifetime),
          emit_(std::move(emit)) {}

    void set_app_deliver(AppDeliverFn fn) { app_deliver_ = std::move(fn); }
    void set_parent_fn(ParentFn fn) { parent_fn_ = std::move(fn); }
    void set_nsu_metrics(NsuMetricsFn fn) { nsu_metrics_ = std::move(fn); }
    void set_rule_installed(RuleRttFn fn) { rule_installed_ = std::move(fn); }
    void set_on_install(InstallFn fn) { on_install_ = std::move(fn); }

    // Frames addressed to this node (or SRH transit) from the MAC.
    void on_frame(const Frame& frame);

    // Data-plane entry: source-originated or SRH transit packet.
    PacketOutcome handle_packet(Frame pkt);

    // Control-plane upward send (FTQ/NSU/LinkFail) via the RPL parent.
    void send_up(Frame f);

    void report_link_failure(NodeId a, NodeId b);

    bool configured() const { return configured_; }
    FlowTable& table() { return table_; }
    const UsdnCounters& counters() const { return counters_; }
    std::size_t pending_count() const { return pending_.size(); }
    std::uint64_t next_query_id() {
        return (static_cast<std::uint64_t>(id_) << 32) | ++query_seq_;
    }

    // Applies CONF payload; starts the NSU timer and expiry sweep.
    void configure(const ConfBody& conf);

private:
    void on_fts(const Frame& frame);
    void emit_ftq(NodeId src, NodeId dst, std::uint64_t flow);
    void emit_nsu();
    void sweep();
    void release_pending();
    void forward_srh(Frame pkt);

    Kernel* kernel_;
    NodeId id_;
    NodeId sink_;
    UsdnConfig cfg_;
    FlowTable table_;
    EmitFn emit_;
    AppDeliverFn app_deliver_;
    ParentFn parent_fn_;
    NsuMetricsFn nsu_metrics_;
    RuleRttFn rule_installed_;
    InstallFn on_install_;

    bool configured_ = false;
    std::deque<Frame> pending_;
    // At most one outstanding FTQ per (dst, flow) to prevent query storms.
    std::map<std::pair<NodeId, std::uint64_t>, std::pair<std::uint64_t, SimTime>> outstanding_;
    std::uint64_t query_seq_ = 0;
    UsdnCounters counters_;
};

} // namespace meshsim
