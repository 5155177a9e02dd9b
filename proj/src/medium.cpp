#include "meshsim/medium.hpp"

#include <algorithm>
#include <cmath>

namespace meshsim {

double reception_probability(double distance_m, const MediumConfig& cfg) {
    if (distance_m > cfg.tx_range_m) return 0.0;
    if (!cfg.distance_loss) return cfg.link_quality;
    double ratio = distance_m / cfg.tx_range_m;
    return cfg.link_quality * (1.0 - ratio * ratio);
}

double RadioMedium::distance(NodeId a, NodeId b) const {
    const auto& pa = positions_[a];
    const auto& pb = positions_[b];
    return std::hypot(pa.x - pb.x, pa.y - pb.y);
}

const std::vector<NodeId>& RadioMedium::neighbors(NodeId id) const {
    if (!neighbor_cache_valid_[id]) {
        std::vector<NodeId> out;
        for (NodeId other = 0; other < positions_.size(); ++other) {
            if (other == id) continue;
            if (distance(id, other) <= cfg_.tx_range_m) out.push_back(other);
        }
        neighbor_cache_[id] = std::move(out);
        neighbor_cache_valid_[id] = true;
    }
    return neighbor_cache_[id];
}

std::vector<std::pair<NodeId, NodeId>> RadioMedium::all_links() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId a = 0; a < positions_.size(); ++a)
        for (NodeId b : neighbors(a))
            if (a < b && !link_failed(a, b)) out.emplace_back(a, b);
    return out;
}

bool RadioMedium::channel_busy_near(NodeId id) const {
    std::int64_t now = kernel_->now().us;
    for (const auto& tx : active_) {
        if (tx.end_us <= now) continue;
        if (tx.sender == id) return true;
        if (distance(tx.sender, id) <= cfg_.interference_range_m) return true;
    }
    return false;
}

void RadioMedium::transmit(NodeId sender, const Frame& frame, CompleteFn done) {
    transmit(sender, frame, airtime(frame.bytes), std::move(done));
}

void RadioMedium::transmit(NodeId sender, const Frame& frame, SimTime occupancy,
                           CompleteFn done, SimTime vulnerable) {
    std::int64_t now = kernel_->now().us;
    std::int64_t hold = std::max(occupancy.us, airtime(frame.bytes).us);
    std::int64_t end = now + hold;
    if (end == now) end = now + 1; // zero-byte frames still occupy one tick
    std::int64_t vuln_len =
        vulnerable.us > 0 ? std::min(vulnerable.us, end - now) : end - now;

    active_.push_front(ActiveTx{sender, now, end, end - vuln_len, {}});
    auto self = active_.begin();

    ++total_tx_;
    ++tx_counts_[static_cast<int>(frame.kind)];

    for (NodeId r = 0; r < positions_.size(); ++r) {
        if (r == sender) continue;
        double d = distance(sender, r);
        if (d > cfg_.tx_range_m) continue;
        RxResult res;
        if (link_failed(sender, r)) {
            res = RxResult::LostChannel;
        } else {
            res = rng_.bernoulli(reception_probability(d, cfg_))
                      ? RxResult::Delivered
                      : RxResult::LostChannel;
        }
        self->outcomes.push_back({r, res});
    }

    // Temporal overlap with other in-flight transmissions: a reception is
    // lost when another transmission's channel hold overlaps its vulnerable
    // decode window and the interferer is inside the receiver's interference
    // range. Checked on both sides; a node that is itself transmitting
    // cannot receive.
    for (auto it = active_.begin(); it != active_.end(); ++it) {
        if (it == self) continue;
        if (it->end_us <= now) continue;
        if (it->end_us > self->vuln_start_us) {
            for (auto& o : self->outcomes) {
                if (o.receiver == it->sender ||
                    distance(it->sender, o.receiver) <= cfg_.interference_range_m) {
                    if (o.result == RxResult::Delivered) ++collisions_;
                    o.result = RxResult::LostCollision;
                }
            }
        }
        if (end > it->vuln_start_us) {
            for (auto& o : it->outcomes) {
                if (o.receiver == sender ||
                    distance(sender, o.receiver) <= cfg_.interference_range_m) {
                    if (o.result == RxResult::Delivered) ++collisions_;
                    o.result = RxResult::LostCollision;
                }
            }
        }
    }

    kernel_->schedule(SimTime{end}, [this, self, frame, done = std::move(done)]() {
        std::vector<TransmissionOutcome> outcomes = std::move(self->outcomes);
        active_.erase(self);
        for (const auto& o : outcomes) {
            if (o.result == RxResult::Delivered && deliver_) {
                Frame rx = frame;
                deliver_(o.receiver, rx);
            }
        }
        if (done) done(outcomes);
    });
}

} // namespace meshsim
