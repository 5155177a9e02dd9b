#pragma once

#include <memory>
#include <set>
#include <vector>

#include "meshsim/controller.hpp"
#include "meshsim/mac.hpp"
#include "meshsim/medium.hpp"
#include "meshsim/metrics.hpp"
#include "meshsim/rpl.hpp"
#include "meshsim/scenario.hpp"
#include "meshsim/usdn.hpp"
#include "meshsim/wise.hpp"

namespace meshsim {

// One fully wired simulation instance: medium, per-node MAC + protocol
// stack, controller at the sink, traffic generators, and fault injection.
// Node 0 is the sink/root.
class Network {
public:
    Network(ScenarioConfig cfg, std::uint64_t seed);
    ~Network();

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    // Runs to the scenario duration and collects the record.
    MetricsRecord run();

    void run_until(SimTime t) { kernel_.run_until(t); }
    MetricsRecord collect(); // finalizes energy ledgers; call once, at the end

    Kernel& kernel() { return kernel_; }
    RadioMedium& medium() { return *medium_; }
    Controller& controller() { return *controller_; }
    Mac& mac(NodeId i) { return *shells_[i]->mac; }
    RplNode& rpl(NodeId i) { return *shells_[i]->rpl; }
    UsdnNode& usdn(NodeId i) { return *shells_[i]->usdn; }
    WiseNode& wise(NodeId i) { return *shells_[i]->wise; }

    std::size_t node_count() const { return shells_.size(); }
    NodeId sink() const { return 0; }
    const std::vector<NodeId>& sources() const { return sources_; }
    const ScenarioConfig& config() const { return cfg_; }

    // Hands an application packet to `src`'s stack (also used by tests).
    void inject_app_packet(NodeId src, NodeId dst, std::uint64_t flow);

private:
    struct Shell {
        std::unique_ptr<Mac> mac;
        std::unique_ptr<RplNode> rpl;   // uSDN stack only
        std::unique_ptr<UsdnNode> usdn; // uSDN stack only
        std::unique_ptr<WiseNode> wise; // SDN-WISE stack only
        SimTime configured_at{-1};
    };

    struct FaultEvent {
        SimTime at{0};
        SimTime first_detect{-1};
        SimTime last_repair{-1};
    };

    void build();
    void wire_node(NodeId i);
    void dispatch(NodeId i, const Frame& frame);
    void on_send_done(NodeId i, const Frame& frame, bool ok);
    void note_configured(NodeId i);
    void note_join();
    void note_repair();
    void start_traffic();
    void schedule_flow_arrival();
    void apply_fault(const FaultSpec& spec);
    void send_wise_link_fail(NodeId node, NodeId a, NodeId b, int attempts_left);
    std::vector<NodeId> pick_sources() const;
    std::vector<int> hop_distances() const;

    ScenarioConfig cfg_;
    std::uint64_t seed_;
    Kernel kernel_;
    std::unique_ptr<RadioMedium> medium_;
    std::vector<std::unique_ptr<Shell>> shells_;
    std::unique_ptr<Controller> controller_;
    RngStream traffic_rng_;
    RngStream fault_rng_;
    std::vector<NodeId> sources_;

    // Run accounting.
    std::uint64_t app_sent_ = 0;
    std::uint64_t app_delivered_ = 0;
    std::int64_t latency_sum_us_ = 0;
    std::uint64_t latency_n_ = 0;
    std::int64_t rtt_sum_us_ = 0;
    std::uint64_t rtt_n_ = 0;
    std::uint64_t served_at_start_ = 0;
    SimTime first_join_{-1};
    std::vector<FaultEvent> fault_events_;
    std::uint64_t repairs_ = 0;
    std::set<std::pair<NodeId, std::uint64_t>> wise_installs_seen_;
    std::uint64_t flow_seq_ = 0;
    std::uint64_t packet_seq_ = 0;
    std::size_t rr_index_ = 0;
    bool collected_ = false;
    // Retry exhaustion toward a neighbor only counts as a dead link after
    // consecutive failures; one lost exchange on a lossy link is normal.
    std::map<std::pair<NodeId, NodeId>, int> consec_fail_;
    static constexpr int kLinkDeadThreshold = 2;

    static constexpr double kInitialBatteryMj = 10000.0;
};

} // namespace meshsim
