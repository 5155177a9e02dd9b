#include "meshsim/usdn.hpp"

#include <algorithm>

namespace meshsim {

int FlowTable::specificity(const FlowRule& r) {
    if (r.match_flow) return 3;
    if (r.match_src && r.match_dst) return 2;
    if (r.match_dst) return 1;
    return 0;
}

bool FlowTable::same_match(const FlowRule& a, const FlowRule& b) {
    return a.match_src == b.match_src && a.match_dst == b.match_dst &&
           a.match_flow == b.match_flow;
}

void FlowTable::install(FlowRule rule, SimTime now) {
    for (auto& e : entries_) {
        if (same_match(e.rule, rule)) {
            e.rule = std::move(rule);
            e.installed_at = now;
            e.last_used = now;
            return;
        }
    }
    if (static_cast<int>(entries_.size()) >= capacity_) {
        // LRU among non-refreshable entries first.
        auto victim = entries_.end();
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            if (it->rule.refreshable) continue;
            if (victim == entries_.end() || it->last_used < victim->last_used)
                victim = it;
        }
        if (victim == entries_.end()) {
            for (auto it = entries_.begin(); it != entries_.end(); ++it)
                if (victim == entries_.end() || it->last_used < victim->last_used)
                    victim = it;
        }
        entries_.erase(victim);
    }
    Entry e;
    e.rule = std::move(rule);
    e.installed_at = now;
    e.last_used = now;
    e.insertion = next_insertion_++;
    entries_.push_back(std::move(e));
}

FlowTable::Entry* FlowTable::match(NodeId src, NodeId dst, std::uint64_t flow,
                                   SimTime now) {
    Entry* best = nullptr;
    for (auto& e : entries_) {
        if (expired(e, now)) continue;
        const auto& r = e.rule;
        if (r.match_src && *r.match_src != src) continue;
        if (r.match_dst && *r.match_dst != dst) continue;
        if (r.match_flow && *r.match_flow != flow) continue;
        if (!best) {
            best = &e;
            continue;
        }
        if (r.priority != best->rule.priority) {
            if (r.priority > best->rule.priority) best = &e;
            continue;
        }
        int sa = specificity(r), sb = specificity(best->rule);
        if (sa != sb) {
            if (sa > sb) best = &e;
            continue;
        }
        if (e.insertion < best->insertion) best = &e;
    }
    if (best) {
        best->last_used = now;
        ++best->hits;
    }
    return best;
}

void FlowTable::expire_and_refresh(SimTime now) {
    for (auto& e : entries_) {
        SimTime lt = lifetime_of(e.rule);
        if (e.rule.refreshable && (now - e.last_used).us * 2 <= lt.us &&
            (now - e.last_used).us > 0) {
            e.last_used = now; // local refresh, no controller round trip
        }
    }
    std::erase_if(entries_, [&](const Entry& e) { return expired(e, now); });
}

void UsdnNode::configure(const ConfBody& conf) {
    bool was_configured = configured_;
    configured_ = true;
    cfg_.nsu_period = conf.nsu_period; // zero disables state updates
    if (conf.flowtable_lifetime.us > 0) cfg_.flowtable_lifetime = conf.flowtable_lifetime;
    for (const auto& r : conf.default_rules) table_.install(r, kernel_->now());
    if (was_configured) return;
    if (cfg_.nsu_period.us > 0 && id_ != sink_) {
        // Initial state report goes out right away (with a jitter tick so
        // co-configured nodes spread out); the controller needs measured
        // link qualities long before the first periodic update.
        SimTime jitter{static_cast<std::int64_t>(1000 + 997 * (id_ % 64))};
        kernel_->schedule_in(jitter, [this]() { emit_nsu(); });
    }
    kernel_->schedule_in(cfg_.sweep_period, [this]() { sweep(); });
}

void UsdnNode::sweep() {
    table_.expire_and_refresh(kernel_->now());
    // Unanswered queries age out so the next packet re-queries instead of
    // being suppressed forever behind a lost FTQ/FTS.
    std::erase_if(outstanding_, [&](const auto& kv) {
        return (kernel_->now() - kv.second.second) >= cfg_.query_timeout;
    });
    kernel_->schedule_in(cfg_.sweep_period, [this]() { sweep(); });
}

void UsdnNode::emit_nsu() {
    if (configured_ && nsu_metrics_) {
        Frame f;
        f.kind = MsgKind::Nsu;
        f.origin = id_;
        f.dst = sink_;
        f.bytes = cfg_.nsu_bytes;
        f.body = nsu_metrics_();
        send_up(f);
    }
    kernel_->schedule_in(cfg_.nsu_period, [this]() { emit_nsu(); });
}

void UsdnNode::send_up(Frame f) {
    NodeId parent = parent_fn_ ? parent_fn_() : kNoNode;
    if (parent == kNoNode) return; // not joined; nothing to route over
    f.link_dst = parent;
    emit_(f);
}

void UsdnNode::report_link_failure(NodeId a, NodeId b) {
    Frame f;
    f.kind = MsgKind::LinkFail;
    f.origin = id_;
    f.dst = sink_;
    f.bytes = cfg_.ftq_bytes;
    f.body = LinkFailBody{a, b};
    send_up(f);
}

void UsdnNode::forward_srh(Frame pkt) {
    auto& srh = *pkt.srh;
    srh.cursor += 1;
    if (srh.cursor >= srh.hops.size()) return;
    pkt.link_dst = srh.hops[srh.cursor];
    Frame out = std::move(pkt);
    kernel_->schedule_in(cfg_.srh_forward_delay, [this, out = std::move(out)]() {
        emit_(out);
    });
}

PacketOutcome UsdnNode::handle_packet(Frame pkt) {
    if (pkt.dst == id_) {
        ++counters_.delivered;
        if (app_deliver_) app_deliver_(pkt);
        return PacketOutcome::Delivered;
    }
    if (pkt.srh) {
        // Header walk: advance cursor, no table lookup at relays.
        forward_srh(std::move(pkt));
        return PacketOutcome::Forwarded;
    }
    const auto* app = std::get_if<AppBody>(&pkt.body);
    std::uint64_t flow = app ? app->flow_id : 0;
    auto* entry = table_.match(pkt.origin, pkt.dst, flow, kernel_->now());
    if (entry) {
        switch (entry->rule.action) {
            case FlowRule::Action::ForwardSrh: {
                pkt.srh = Srh{entry->rule.srh_route, 0};
                forward_srh(std::move(pkt));
                return PacketOutcome::Forwarded;
            }
            case FlowRule::Action::ForwardNextHop: {
                pkt.link_dst = entry->rule.next_hop;
                emit_(pkt);
                return PacketOutcome::Forwarded;
            }
            case FlowRule::Action::Drop:
                return PacketOutcome::Dropped;
            case FlowRule::Action::ToController:
                break; // falls through to query-and-buffer below
        }
    }
    // Miss (or explicit to-controller): buffer the original, query with a
    // digest only.
    if (static_cast<int>(pending_.size()) >= cfg_.pending_buffer) {
        pending_.pop_front();
        ++counters_.buffer_drops;
    }
    NodeId dst = pkt.dst;
    NodeId src = pkt.origin;
    pending_.push_back(std::move(pkt));
    emit_ftq(src, dst, flow);
    return PacketOutcome::QueuedPendingRule;
}

void UsdnNode::emit_ftq(NodeId src, NodeId dst, std::uint64_t flow) {
    auto key = std::make_pair(dst, flow);
    if (outstanding_.count(key)) return; // query suppression
    std::uint64_t qid = next_query_id();
    outstanding_[key] = {qid, kernel_->now()};
    Frame f;
    f.kind = MsgKind::Ftq;
    f.origin = id_;
    f.dst = sink_;
    f.bytes = cfg_.ftq_bytes;
    f.body = FtqBody{src, dst, flow, qid};
    ++counters_.ftq_sent;
    send_up(f);
}

void UsdnNode::on_fts(const Frame& frame) {
    const auto& fts = std::get<FtsBody>(frame.body);
    SimTime now = kernel_->now();
    for (const auto& r : fts.rules) table_.install(r, now);
    // Report rule RTT for the answered query.
    for (auto it = outstanding_.begin(); it != outstanding_.end();) {
        if (it->second.first == fts.query_id) {
            if (rule_installed_) rule_installed_(fts.query_id, it->second.second);
            it = outstanding_.erase(it);
        } else {
            ++it;
        }
    }
    if (on_install_) on_install_(fts);
    kernel_->schedule_in(cfg_.table_op_delay, [this]() { release_pending(); });
}

void UsdnNode::release_pending() {
    // Re-match buffered packets; matched ones are released in order.
    std::deque<Frame> still;
    while (!pending_.empty()) {
        Frame pkt = std::move(pending_.front());
        pending_.pop_front();
        const auto* app = std::get_if<AppBody>(&pkt.body);
        std::uint64_t flow = app ? app->flow_id : 0;
        auto* entry = table_.match(pkt.origin, pkt.dst, flow, kernel_->now());
        if (entry && entry->rule.action != FlowRule::Action::ToController) {
            if (entry->rule.action == FlowRule::Action::ForwardSrh) {
                pkt.srh = Srh{entry->rule.srh_route, 0};
                forward_srh(std::move(pkt));
            } else if (entry->rule.action == FlowRule::Action::ForwardNextHop) {
                pkt.link_dst = entry->rule.next_hop;
                emit_(pkt);
            }
            // Drop action: packet silently discarded.
        } else {
            still.push_back(std::move(pkt));
        }
    }
    pending_ = std::move(still);
}

void UsdnNode::on_frame(const Frame& frame) {
    // SRH transit: advance and forward without touching the flowtable.
    if (frame.srh && frame.dst != id_) {
        forward_srh(frame);
        return;
    }
    if (frame.dst == id_ || frame.dst == kBroadcast) {
        switch (frame.kind) {
            case MsgKind::Conf:
                configure(std::get<ConfBody>(frame.body));
                return;
            case MsgKind::Fts:
                on_fts(frame);
                return;
            case MsgKind::NoRoute: {
                // Unanswerable query: drop the buffered packets for it.
                const auto& fts = std::get<FtsBody>(frame.body);
                for (auto it = outstanding_.begin(); it != outstanding_.end();) {
                    if (it->second.first == fts.query_id) {
                        std::erase_if(pending_, [&](const Frame& p) {
                            return p.dst == it->first.first;
                        });
                        it = outstanding_.erase(it);
                    } else {
                        ++it;
                    }
                }
                return;
            }
            case MsgKind::AppData:
                handle_packet(frame);
                return;
            default:
                return;
        }
    }
    // Upward control relay toward the sink.
    if (frame.dst == sink_) {
        Frame fwd = frame;
        send_up(std::move(fwd));
        return;
    }
    if (frame.kind == MsgKind::AppData) handle_packet(frame);
}

} // namespace meshsim
