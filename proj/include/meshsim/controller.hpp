#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"
#include "meshsim/rpl.hpp"

namespace meshsim {

enum class PlacementKind : std::uint8_t { Embedded, External };

struct ControllerPlacement {
    PlacementKind kind = PlacementKind::Embedded;
    SimTime backhaul_delay{2000}; // one-way, external only
    double backhaul_rate_bps = 115200.0;
    // Extra bytes per frame on the serial link (SLIP escaping plus the
    // decompressed IPv6/UDP framing the border router restores).
    int slip_overhead_bytes = 0;
    SimTime service_time{8000}; // per request
    int queue_capacity = 64;
};

enum class StackKind : std::uint8_t { Usdn, SdnWise };

enum class WiseInstallMode : std::uint8_t { OpenPath, PerHopResponse };

// Single FIFO deterministic server: response time = queue wait + service
// time; saturation throughput = 1/service_time.
class ServiceQueue {
public:
    ServiceQueue(Kernel& kernel, SimTime service_time, int capacity)
        : kernel_(&kernel), service_time_(service_time), capacity_(capacity) {}

    // Admits a request arriving now; returns the completion time, or nullopt
    // when the queue is full (request dropped).
    std::optional<SimTime> admit();

    SimTime service_time() const { return service_time_; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t served() const { return served_; }
    int pending() const { return pending_; }

private:
    Kernel* kernel_;
    SimTime service_time_;
    int capacity_;
    SimTime busy_until_{0};
    int pending_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t served_ = 0;
};

// Idle-queue response delay for a placement: service time plus, for the
// external placement, two backhaul propagation delays and two serialization
// times for a frame of `bytes` at the backhaul rate.
SimTime placement_overhead(const ControllerPlacement& p, int request_bytes,
                           int response_bytes);

// Controller topology view assembled from joins and state updates.
struct TopologyView {
    struct NodeInfo {
        SimTime last_seen{0};
        double energy_mJ = 0.0;
        double x = 0.0, y = 0.0;
    };
    std::map<NodeId, NodeInfo> nodes;
    std::map<std::pair<NodeId, NodeId>, double> links; // ordered (a<b) -> quality

    void touch(NodeId n, SimTime now) { nodes[n].last_seen = now; }
    bool add_link(NodeId a, NodeId b, double q);
    bool remove_link(NodeId a, NodeId b);
    bool has_link(NodeId a, NodeId b) const;
    std::vector<NodeId> neighbors_of(NodeId n) const;
};

struct ControllerCounters {
    std::uint64_t joins = 0;
    std::uint64_t state_updates = 0;
    std::uint64_t flow_queries = 0;
    std::uint64_t link_failures = 0;
    std::uint64_t no_route = 0;
    std::uint64_t confs_sent = 0;
    std::uint64_t repairs_issued = 0;
    std::uint64_t unreachable = 0;
};

// Both controller placements behind one interface. Requests arrive at the
// sink; the external placement adds modeled SLIP backhaul delay and
// serialization before and after a FIFO service stage.
class Controller {
public:
    // Emit a frame into the mesh through the sink's MAC.
    using SinkEmitFn = std::function<void(Frame)>;
    using RepairIssuedFn = std::function<void(std::uint64_t flow_id)>;

    struct Options {
        StackKind stack = StackKind::Usdn;
        WiseInstallMode wise_mode = WiseInstallMode::OpenPath;
        SimTime nsu_period = SimTime::from_s(60);
        SimTime flowtable_lifetime = SimTime::from_s(300);
        SimTime route_lifetime = SimTime::from_s(300);
        int conf_bytes = 32;
        int fts_bytes = 40;
        int response_bytes = 52;
        int openpath_bytes = 48;
        bool weighted_routes = false; // inverse-quality weights when true
        bool missed_update_detection = true;
    };

    Controller(Kernel& kernel, NodeId sink, ControllerPlacement placement,
               Options opt, SinkEmitFn emit);

    // Entry point: a control frame reached the sink at kernel time.
    void on_control_frame(const Frame& frame);

    // Shortest path a -> b on the topology view (uniform weights, lowest-id
    // tiebreak), or nullopt when disconnected.
    std::optional<std::vector<NodeId>> route(NodeId from, NodeId to);

    TopologyView& topology() { return topo_; }
    const ControllerCounters& counters() const { return counters_; }
    const ServiceQueue& service() const { return service_; }
    RootRouteTable& route_table() { return routes_; }
    void set_repair_issued(RepairIssuedFn fn) { repair_issued_ = std::move(fn); }

    bool registered(NodeId n) const { return topo_.nodes.count(n) > 0; }

    // Manual DeviceControl trigger (no evaluated scenario drives this).
    void device_power(NodeId node, bool on);

    void start();

private:
    struct InstalledFlow {
        NodeId origin;
        NodeId src, dst;
        std::vector<NodeId> path;
    };

    SimTime inbound_extra(int bytes) const;
    SimTime outbound_extra(int bytes) const;
    void dispatch(const Frame& frame);
    void handle_join(const Frame& frame);
    void handle_state_update(const Frame& frame);
    void handle_flow_query(const Frame& frame);
    void handle_link_failure(NodeId a, NodeId b);
    void send_to_node(Frame f, NodeId target);
    void send_conf(NodeId target);
    void issue_usdn_rule(NodeId origin, NodeId src, NodeId dst,
                         std::uint64_t flow, std::uint64_t query_id,
                         const std::vector<NodeId>& path);
    void issue_wise_rules(NodeId origin, NodeId src, NodeId dst,
                          std::uint64_t flow, std::uint64_t query_id,
                          const std::vector<NodeId>& path);
    void invalidate_cache();
    void periodic_liveness_check();

    Kernel* kernel_;
    NodeId sink_;
    ControllerPlacement placement_;
    Options opt_;
    SinkEmitFn emit_;
    RepairIssuedFn repair_issued_;
    ServiceQueue service_;
    TopologyView topo_;
    RootRouteTable routes_; // replica built from forwarded DAOs (uSDN)
    std::map<std::pair<NodeId, NodeId>, std::vector<NodeId>> route_cache_;
    std::map<std::uint64_t, InstalledFlow> installed_flows_;
    ControllerCounters counters_;
    std::map<NodeId, SimTime> last_update_;
};

} // namespace meshsim
