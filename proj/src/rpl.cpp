#include "meshsim/rpl.hpp"

#include <algorithm>

namespace meshsim {

bool RootRouteTable::register_dao(NodeId node, NodeId parent, SimTime now,
                                  SimTime lifetime) {
    if (node == root_) return false;
    // Walk parent pointers from `parent`; reaching `node` would close a cycle.
    NodeId cur = parent;
    std::size_t steps = 0;
    while (cur != root_ && steps++ <= entries_.size()) {
        if (cur == node) {
            ++cycle_rejections_;
            return false;
        }
        auto it = entries_.find(cur);
        if (it == entries_.end() || expired(it->second, now)) break;
        cur = it->second.parent;
    }
    entries_[node] = Entry{parent, now + lifetime};
    return true;
}

std::optional<std::vector<NodeId>> RootRouteTable::source_route(NodeId dest,
                                                                SimTime now) const {
    std::vector<NodeId> rev;
    NodeId cur = dest;
    std::size_t steps = 0;
    while (cur != root_) {
        auto it = entries_.find(cur);
        if (it == entries_.end() || expired(it->second, now)) return std::nullopt;
        rev.push_back(cur);
        cur = it->second.parent;
        if (++steps > entries_.size() + 1) return std::nullopt;
    }
    rev.push_back(root_);
    std::reverse(rev.begin(), rev.end());
    return rev;
}

bool RootRouteTable::has_route(NodeId dest, SimTime now) const {
    return source_route(dest, now).has_value();
}

std::optional<NodeId> RootRouteTable::parent_of(NodeId node, SimTime now) const {
    auto it = entries_.find(node);
    if (it == entries_.end() || expired(it->second, now)) return std::nullopt;
    return it->second.parent;
}

RplNode::RplNode(Kernel& kernel, NodeId id, NodeId root, RplConfig cfg,
                 RngStream rng, EmitFn emit)
    : kernel_(&kernel), id_(id), root_(root), cfg_(cfg), rng_(rng),
      emit_(std::move(emit)), table_(root) {}

void RplNode::start() {
    if (is_root()) {
        joined_ = true;
        rank_ = 0;
        etx_cost_ = 0.0;
        trickle_interval_ = cfg_.trickle_imin;
        trickle_start_interval();
    } else {
        schedule_dis();
    }
}

void RplNode::schedule_dis() {
    // Small jitter so co-started nodes do not solicit in lockstep.
    SimTime jitter{static_cast<std::int64_t>(rng_.next_below(100000))};
    dis_timer_ = kernel_->schedule_in(cfg_.dis_period + jitter, [this]() {
        if (joined_) return;
        Frame f;
        f.kind = MsgKind::Dis;
        f.link_dst = kBroadcast;
        f.origin = id_;
        f.bytes = cfg_.dis_bytes;
        emit_(f);
        schedule_dis();
    });
}

void RplNode::note_link_quality(NodeId neighbor, double quality) {
    link_quality_[neighbor] = quality;
}

double RplNode::candidate_cost(NodeId cand) const {
    const auto& c = candidates_.at(cand);
    if (cfg_.objective == RplObjective::HopCount)
        return static_cast<double>(c.rank) + cfg_.rank_increment;
    auto it = link_quality_.find(cand);
    double q = it == link_quality_.end() ? 0.5 : std::max(it->second, 1e-3);
    return c.etx_cost + 1.0 / q;
}

void RplNode::on_frame(const Frame& frame) {
    switch (frame.kind) {
        case MsgKind::Dio: on_dio(frame); break;
        case MsgKind::Dis: on_dis(frame); break;
        case MsgKind::Dao: on_dao(frame); break;
        default: break;
    }
}

void RplNode::on_dio(const Frame& frame) {
    if (is_root()) return;
    const auto& dio = std::get<DioBody>(frame.body);
    if (dio.version < version_) return; // stale version
    version_ = std::max(version_, dio.version);

    NodeId sender = frame.link_src;
    double etx = 0.0;
    if (cfg_.objective == RplObjective::Etx) {
        // DIO rank doubles as a scaled cost carrier for the ETX objective.
        etx = static_cast<double>(dio.rank) / cfg_.rank_increment;
    }
    candidates_[sender] = Candidate{dio.rank, etx};
    ++trickle_counter_;
    reselect_parent();
}

void RplNode::reselect_parent() {
    if (candidates_.empty()) {
        if (joined_) {
            joined_ = false;
            parent_ = kNoNode;
            rank_ = 0xffffffff;
            schedule_dis();
        }
        return;
    }
    // argmin of objective cost; ties broken by lowest candidate id (map
    // iteration order is ascending, strict < keeps the first).
    NodeId best = kNoNode;
    double best_cost = 1e306;
    for (const auto& [cand, c] : candidates_) {
        double cost = candidate_cost(cand);
        if (cost < best_cost) {
            best_cost = cost;
            best = cand;
        }
    }
    bool was_joined = joined_;
    NodeId old_parent = parent_;

    // Parent-switch hysteresis: an alternative wins only on a clear cost
    // improvement, or at equal-or-better cost with a lower id (the stable
    // tiebreak direction, which cannot flap). Stops churn under jitter.
    if (was_joined && best != parent_ && candidates_.count(parent_)) {
        double parent_cost = candidate_cost(parent_);
        double threshold = cfg_.objective == RplObjective::HopCount
                               ? cfg_.rank_increment / 2.0
                               : 0.25;
        bool clear_win = best_cost < parent_cost - threshold;
        bool id_win = best < parent_ && best_cost <= parent_cost;
        if (!clear_win && !id_win) {
            best = parent_;
            best_cost = parent_cost;
        }
    }

    std::uint32_t new_rank = candidates_[best].rank + cfg_.rank_increment;
    if (best == parent_ && new_rank == rank_ && was_joined) return;

    parent_ = best;
    rank_ = new_rank;
    etx_cost_ = best_cost;
    joined_ = true;
    if (dis_timer_.valid()) kernel_->cancel(dis_timer_);

    if (!was_joined) {
        trickle_interval_ = cfg_.trickle_imin;
        trickle_start_interval();
    } else if (old_parent != parent_) {
        trickle_reset();
    }
    // The DAO advertises the node->parent link; a rank change alone is not
    // new downward-routing information (the refresh timer renews lifetimes).
    if (!was_joined || old_parent != parent_) send_dao();
    if (old_parent != parent_ && parent_change_) parent_change_(parent_);
}

void RplNode::send_dao() {
    if (is_root()) return;
    Frame f;
    f.kind = MsgKind::Dao;
    f.link_dst = parent_;
    f.origin = id_;
    f.dst = root_;
    f.bytes = cfg_.dao_bytes;
    f.body = DaoBody{id_, parent_, cfg_.route_lifetime};
    emit_(f);

    if (dao_refresh_.valid()) kernel_->cancel(dao_refresh_);
    dao_refresh_ = kernel_->schedule_in(SimTime{cfg_.route_lifetime.us / 2}, [this]() {
        if (joined_) send_dao();
    });
}

void RplNode::on_dao(const Frame& frame) {
    const auto& dao = std::get<DaoBody>(frame.body);
    if (is_root()) {
        if (table_.register_dao(dao.node, dao.parent, kernel_->now(), dao.lifetime)) {
            if (dao_at_root_) dao_at_root_(dao);
        }
        return;
    }
    if (!joined_) return;
    // Relay hop-by-hop toward the root via the preferred parent.
    Frame fwd = frame;
    fwd.link_dst = parent_;
    emit_(fwd);
}

void RplNode::on_dis(const Frame&) {
    if (!joined_) return; // un-joined receivers stay silent
    trickle_reset();
    // Immediate solicited DIO (with a tick of jitter for collision spread).
    SimTime jitter{static_cast<std::int64_t>(rng_.next_below(50000))};
    kernel_->schedule_in(jitter, [this]() {
        if (joined_) send_dio();
    });
}

void RplNode::send_dio() {
    Frame f;
    f.kind = MsgKind::Dio;
    f.link_dst = kBroadcast;
    f.origin = id_;
    f.bytes = cfg_.dio_bytes;
    std::uint32_t advertised = rank_;
    if (cfg_.objective == RplObjective::Etx)
        advertised = static_cast<std::uint32_t>(etx_cost_ * cfg_.rank_increment);
    f.body = DioBody{advertised, version_,
                     static_cast<std::uint8_t>(cfg_.objective)};
    emit_(f);
}

void RplNode::trickle_start_interval() {
    trickle_counter_ = 0;
    // Fire at a random point in the second half of the interval.
    std::int64_t half = trickle_interval_.us / 2;
    std::int64_t t = half + static_cast<std::int64_t>(
                                rng_.next_below(static_cast<std::uint64_t>(half) + 1));
    trickle_fire_ = kernel_->schedule_in(SimTime{t}, [this]() {
        if (trickle_counter_ < cfg_.trickle_k) send_dio();
    });
    trickle_next_ = kernel_->schedule_in(trickle_interval_, [this]() {
        trickle_interval_ = SimTime{std::min(trickle_interval_.us * 2,
                                             cfg_.trickle_imax.us)};
        trickle_start_interval();
    });
}

void RplNode::trickle_reset() {
    if (trickle_fire_.valid()) kernel_->cancel(trickle_fire_);
    if (trickle_next_.valid()) kernel_->cancel(trickle_next_);
    trickle_interval_ = cfg_.trickle_imin;
    trickle_start_interval();
}

void RplNode::on_parent_link_failed(NodeId parent) {
    candidates_.erase(parent);
    if (parent == parent_) {
        parent_ = kNoNode;
        joined_ = false;
        rank_ = 0xffffffff;
        reselect_parent();
        if (!joined_) schedule_dis();
    }
}

} // namespace meshsim
