#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <set>
#include <vector>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"
#include "meshsim/rng.hpp"

namespace meshsim {

struct NodePosition {
    double x = 0.0;
    double y = 0.0;
};

struct MediumConfig {
    double tx_range_m = 50.0;
    double interference_range_m = 50.0;
    double link_quality = 0.90;
    bool distance_loss = true;
    double phy_bit_rate_bps = 250000.0; // 802.15.4 2.4 GHz nominal
};

enum class RxResult : std::uint8_t {
    Delivered,
    LostChannel,
    LostCollision,
    OutOfRange,
};

struct TransmissionOutcome {
    NodeId receiver = kNoNode;
    RxResult result = RxResult::OutOfRange;
};

// UDGM reception probability: q * (1 - (d/R)^2) inside the disk with
// distance loss on, flat q with it off, 0 beyond the disk.
double reception_probability(double distance_m, const MediumConfig& cfg);

// Unit-disk-graph medium. Decides per transmission which nodes receive a
// frame; concurrent transmissions overlapping a reception window inside the
// interference range collide (no capture effect).
class RadioMedium {
public:
    RadioMedium(Kernel& kernel, MediumConfig cfg, RngStream rng)
        : kernel_(&kernel), cfg_(cfg), rng_(rng) {}

    void set_positions(std::vector<NodePosition> pos) {
        positions_ = std::move(pos);
        neighbor_cache_.assign(positions_.size(), {});
        neighbor_cache_valid_.assign(positions_.size(), false);
    }
    const std::vector<NodePosition>& positions() const { return positions_; }
    std::size_t node_count() const { return positions_.size(); }

    double distance(NodeId a, NodeId b) const;

    // All nodes at distance <= tx_range, excluding self.
    const std::vector<NodeId>& neighbors(NodeId id) const;

    // Explicit link faults: frames on a failed pair are never delivered.
    void fail_link(NodeId a, NodeId b) { failed_.insert(ordered(a, b)); }
    void restore_link(NodeId a, NodeId b) { failed_.erase(ordered(a, b)); }
    bool link_failed(NodeId a, NodeId b) const { return failed_.count(ordered(a, b)) > 0; }
    std::vector<std::pair<NodeId, NodeId>> all_links() const;

    SimTime airtime(int bytes) const {
        return SimTime::from_seconds(static_cast<double>(bytes) * 8.0 /
                                     cfg_.phy_bit_rate_bps);
    }

    // Carrier sense: any in-flight transmission whose sender lies within the
    // interference range of `id`.
    bool channel_busy_near(NodeId id) const;

    using DeliverFn = std::function<void(NodeId receiver, const Frame&)>;
    using CompleteFn = std::function<void(const std::vector<TransmissionOutcome>&)>;

    void set_deliver(DeliverFn fn) { deliver_ = std::move(fn); }

    // Puts a frame on the air. Outcomes are finalized at the end of the
    // airtime window (later overlapping transmissions can still collide with
    // this one) and reported through `done`; delivered receivers also get the
    // frame via the deliver callback.
    void transmit(NodeId sender, const Frame& frame, CompleteFn done = nullptr);

    // Same, but the channel is held for `occupancy` (>= airtime): a duty-
    // cycle strobe repeats the frame until the receiver wakes, so the whole
    // strobe train contends as one long transmission. Only the trailing
    // `vulnerable` span of the hold — the strobe copy the awake receiver
    // actually decodes — can be corrupted by overlapping transmissions;
    // zero means the entire hold is vulnerable.
    void transmit(NodeId sender, const Frame& frame, SimTime occupancy,
                  CompleteFn done, SimTime vulnerable = SimTime{0});

    const MediumConfig& config() const { return cfg_; }
    MediumConfig& config() { return cfg_; }

    std::uint64_t tx_count(MsgKind kind) const {
        auto it = tx_counts_.find(static_cast<int>(kind));
        return it == tx_counts_.end() ? 0 : it->second;
    }
    std::uint64_t total_tx() const { return total_tx_; }
    std::uint64_t collision_count() const { return collisions_; }

private:
    struct ActiveTx {
        NodeId sender;
        std::int64_t start_us;
        std::int64_t end_us;
        std::int64_t vuln_start_us;
        std::vector<TransmissionOutcome> outcomes;
    };

    static std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    Kernel* kernel_;
    MediumConfig cfg_;
    RngStream rng_;
    std::vector<NodePosition> positions_;
    mutable std::vector<std::vector<NodeId>> neighbor_cache_;
    mutable std::vector<bool> neighbor_cache_valid_;
    std::set<std::pair<NodeId, NodeId>> failed_;
    std::list<ActiveTx> active_;
    DeliverFn deliver_;
    std::map<int, std::uint64_t> tx_counts_;
    std::uint64_t total_tx_ = 0;
    std::uint64_t collisions_ = 0;
};

} // namespace meshsim
