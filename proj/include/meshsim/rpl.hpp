#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"
#include "meshsim/rng.hpp"

namespace meshsim {

enum class RplObjective : std::uint8_t {
    HopCount, // rank = parent rank + rank_increment
    Etx,      // cost = parent cost + 1/p over the link
};

struct RplConfig {
    RplObjective objective = RplObjective::HopCount;
    std::uint32_t rank_increment = 256;
    SimTime route_lifetime = SimTime::from_s(300); // 5 min
    SimTime trickle_imin = SimTime::from_s(4);
    SimTime trickle_imax = SimTime::from_s(1048);
    int trickle_k = 10;
    SimTime dis_period = SimTime::from_s(10);
    int dio_bytes = 30;
    int dao_bytes = 24;
    int dis_bytes = 8;
};

// Root-side table of (node -> parent) pointers with expiry. Non-storing
// mode: this is the only place downward routes exist.
class RootRouteTable {
public:
    explicit RootRouteTable(NodeId root) : root_(root) {}

    // False (and counted) when the registration would create a parent cycle.
    bool register_dao(NodeId node, NodeId parent, SimTime now, SimTime lifetime);

    // Root -> ... -> dest hop list, or nullopt when unknown/expired.
    std::optional<std::vector<NodeId>> source_route(NodeId dest, SimTime now) const;

    bool has_route(NodeId dest, SimTime now) const;
    std::optional<NodeId> parent_of(NodeId node, SimTime now) const;
    std::uint64_t cycle_rejections() const { return cycle_rejections_; }
    NodeId root() const { return root_; }
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        NodeId parent;
        SimTime expiry;
    };
    bool expired(const Entry& e, SimTime now) const { return now > e.expiry; }

    NodeId root_;
    std::map<NodeId, Entry> entries_;
    std::uint64_t cycle_rejections_ = 0;
};

// Per-node non-storing RPL: DODAG join via DIO/DAO/DIS with a simplified
// trickle beacon. All frame IO goes through the emit callback; the owner
// wires it into the MAC.
class RplNode {
public:
    using EmitFn = std::function<void(Frame)>;
    using DaoAtRootFn = std::function<void(const DaoBody&)>;
    using ParentChangeFn = std::function<void(NodeId new_parent)>;

    RplNode(Kernel& kernel, NodeId id, NodeId root, RplConfig cfg,
            RngStream rng, EmitFn emit);

    void start();
    void on_frame(const Frame& frame);

    // MAC retry exhaustion toward the preferred parent: drop the candidate
    // and reselect.
    void on_parent_link_failed(NodeId parent);

    bool joined() const { return joined_; }
    bool is_root() const { return id_ == root_; }
    std::uint32_t rank() const { return rank_; }
    NodeId preferred_parent() const { return parent_; }

    RootRouteTable& root_table() { return table_; }
    const RootRouteTable& root_table() const { return table_; }
    void set_dao_at_root(DaoAtRootFn fn) { dao_at_root_ = std::move(fn); }
    void set_parent_change(ParentChangeFn fn) { parent_change_ = std::move(fn); }

    // Link quality estimate used by the ETX objective.
    void note_link_quality(NodeId neighbor, double quality);

private:
    void on_dio(const Frame& frame);
    void on_dis(const Frame& frame);
    void on_dao(const Frame& frame);
    void reselect_parent();
    void send_dao();
    void send_dio();
    void trickle_start_interval();
    void trickle_reset();
    void schedule_dis();
    double candidate_cost(NodeId cand) const;

    Kernel* kernel_;
    NodeId id_;
    NodeId root_;
    RplConfig cfg_;
    RngStream rng_;
    EmitFn emit_;
    DaoAtRootFn dao_at_root_;
    ParentChangeFn parent_change_;

    bool joined_ = false;
    std::uint32_t rank_ = 0xffffffff;
    double etx_cost_ = 1e18;
    NodeId parent_ = kNoNode;
    std::uint32_t version_ = 1;

    struct Candidate {
        std::uint32_t rank;
        double etx_cost;
    };
    std::map<NodeId, Candidate> candidates_;
    std::map<NodeId, double> link_quality_;

    SimTime trickle_interval_{0};
    int trickle_counter_ = 0;
    Kernel::Handle trickle_fire_{};
    Kernel::Handle trickle_next_{};
    Kernel::Handle dis_timer_{};
    Kernel::Handle dao_refresh_{};

    RootRouteTable table_;
};

} // namespace meshsim
