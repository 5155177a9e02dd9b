#include "meshsim/wise.hpp"

#include <algorithm>

namespace meshsim {

bool WiseTable::window_holds(const WiseWindow& w, NodeId src, NodeId dst,
                             MsgKind type, const std::vector<std::uint8_t>& state) {
    int lhs = 0;
    switch (w.field) {
        case WiseWindow::Field::Src: lhs = src; break;
        case WiseWindow::Field::Dst: lhs = dst; break;
        case WiseWindow::Field::Type: lhs = static_cast<int>(type); break;
        case WiseWindow::Field::StateByte: {
            auto i = static_cast<std::size_t>(w.operand_index);
            lhs = i < state.size() ? state[i] : 0;
            break;
        }
    }
    switch (w.rel) {
        case WiseWindow::Rel::Eq: return lhs == w.value;
        case WiseWindow::Rel::Ne: return lhs != w.value;
        case WiseWindow::Rel::Lt: return lhs < w.value;
        case WiseWindow::Rel::Gt: return lhs > w.value;
    }
    return false;
}

void WiseTable::install(WiseRule rule, SimTime now) {
    // Identical window sets replace in place.
    for (auto& e : entries_) {
        if (e.rule.windows.size() == rule.windows.size()) {
            bool same = true;
            for (std::size_t i = 0; i < rule.windows.size(); ++i) {
                const auto& a = e.rule.windows[i];
                const auto& b = rule.windows[i];
                if (a.field != b.field || a.rel != b.rel || a.value != b.value ||
                    a.operand_index != b.operand_index) {
                    same = false;
                    break;
                }
            }
            if (same) {
                e.rule = std::move(rule);
                e.installed_at = now;
                e.last_used = now;
                return;
            }
        }
    }
    if (static_cast<int>(entries_.size()) >= capacity_) entries_.pop_front();
    Entry e;
    e.rule = std::move(rule);
    e.installed_at = now;
    e.last_used = now;
    entries_.push_back(std::move(e));
}

WiseTable::Entry* WiseTable::first_match(NodeId src, NodeId dst, MsgKind type,
                                         const std::vector<std::uint8_t>& state,
                                         SimTime now) {
    for (auto& e : entries_) {
        if (expired(e, now)) continue;
        bool all = true;
        for (const auto& w : e.rule.windows) {
            if (!window_holds(w, src, dst, type, state)) {
                all = false;
                break;
            }
        }
        if (all) {
            e.last_used = now;
            ++e.hits;
            return &e;
        }
    }
    return nullptr;
}

void WiseTable::expire(SimTime now) {
    std::erase_if(entries_, [&](const Entry& e) { return expired(e, now); });
}

void WiseNode::start() {
    if (id_ == sink_) {
        beaconing_ = true;
        send_beacon();
    }
    kernel_->schedule_in(cfg_.sweep_period, [this]() { sweep(); });
}

void WiseNode::sweep() {
    table_.expire(kernel_->now());
    // Age out unanswered queries so later packets can re-query.
    std::erase_if(outstanding_, [&](const auto& kv) {
        return (kernel_->now() - kv.second.second) >= cfg_.query_timeout;
    });
    kernel_->schedule_in(cfg_.sweep_period, [this]() { sweep(); });
}

void WiseNode::send_beacon() {
    // A node that lost its next hop pauses advertising but keeps the timer
    // alive; beacons resume as soon as it re-adopts.
    if (hop_distance_ != kWiseHopInf) {
        Frame f;
        f.kind = MsgKind::WiseBeacon;
        f.link_dst = kBroadcast;
        f.origin = id_;
        f.bytes = cfg_.beacon_bytes;
        f.body = WiseBeaconBody{hop_distance_, 1.0};
        emit_(f);
    }
    kernel_->schedule_in(cfg_.beacon_period, [this]() { send_beacon(); });
}

void WiseNode::on_beacon(const Frame& frame) {
    if (id_ == sink_) return;
    const auto& b = std::get<WiseBeaconBody>(frame.body);
    if (b.hop_distance == kWiseHopInf) return;
    NodeId sender = frame.link_src;
    double q = link_quality_ ? link_quality_(sender) : 1.0;
    std::uint32_t cand_hop = b.hop_distance + 1;
    if (q < cfg_.min_beacon_quality && hop_distance_ != kWiseHopInf) return;

    bool adopt = false;
    if (cand_hop < hop_distance_) {
        adopt = true;
    } else if (cand_hop == hop_distance_ && sender != next_hop_) {
        // Equal-depth parent switch needs a clear quality margin; measured
        // estimates jitter, and every switch costs a join round-trip.
        double cur_q = link_quality_ ? link_quality_(next_hop_) : 1.0;
        if (q > cur_q + 0.15 || (q == cur_q && sender < next_hop_)) adopt = true;
    }
    if (!adopt) return;

    bool first = hop_distance_ == kWiseHopInf;
    hop_distance_ = cand_hop;
    next_hop_ = sender;
    if (first && !beaconing_) {
        beaconing_ = true;
        // Offset our beacons from the adopted parent's.
        kernel_->schedule_in(SimTime{cfg_.beacon_period.us / 2},
                             [this]() { send_beacon(); });
    }
    send_join();
}

void WiseNode::send_join() {
    Frame f;
    f.kind = MsgKind::WiseJoin;
    f.origin = id_;
    f.dst = sink_;
    f.bytes = cfg_.join_bytes;
    f.body = WiseJoinBody{id_, next_hop_};
    send_up(std::move(f));
}

void WiseNode::send_up(Frame f) {
    if (next_hop_ == kNoNode && id_ != sink_) return;
    f.link_dst = next_hop_;
    emit_(std::move(f));
}

void WiseNode::configure(const ConfigBody& body) {
    bool was = configured_;
    configured_ = true;
    for (NodeId n : body.accepted_ids) accepted_ids_.insert(n);
    cfg_.report_period = body.report_period; // zero disables reports
    if (body.table_ttl.us > 0) cfg_.table_ttl = body.table_ttl;
    if (!was && !reporting_ && id_ != sink_ && cfg_.report_period.us > 0) {
        reporting_ = true;
        kernel_->schedule_in(cfg_.report_period, [this]() { send_report(); });
    }
}

void WiseNode::send_report() {
    if (configured_ && report_metrics_) {
        Frame f;
        f.kind = MsgKind::Report;
        f.origin = id_;
        f.dst = sink_;
        f.bytes = cfg_.report_bytes;
        f.body = report_metrics_();
        send_up(std::move(f));
    }
    kernel_->schedule_in(cfg_.report_period, [this]() { send_report(); });
}

void WiseNode::on_next_hop_failed(NodeId hop) {
    if (hop != next_hop_) return;
    next_hop_ = kNoNode;
    hop_distance_ = kWiseHopInf;
    // Re-learned from the next beacon heard; also report upstream once a
    // path exists again (handled by join on re-adoption).
}

PacketOutcome WiseNode::handle_packet(Frame pkt) {
    // Accepted-ID filter: never process (or forward) a destination this node
    // has not been told to accept.
    if (pkt.dst != kBroadcast && !accepted_ids_.count(pkt.dst)) {
        ++counters_.filter_drops;
        return PacketOutcome::Dropped;
    }
    if (pkt.dst == id_) {
        ++counters_.delivered;
        if (app_deliver_) app_deliver_(pkt);
        return PacketOutcome::Delivered;
    }
    const auto* app = std::get_if<AppBody>(&pkt.body);
    std::uint64_t flow = app ? app->flow_id : 0;

    // First-match semantics; modify_state entries rewrite the state array and
    // re-match (bounded), enabling stateful chains.
    for (int depth = 0; depth < 4; ++depth) {
        auto* e = table_.first_match(pkt.origin, pkt.dst, pkt.kind, state_,
                                     kernel_->now());
        if (!e) break;
        switch (e->rule.action) {
            case WiseRule::Action::Forward: {
                pkt.link_dst = e->rule.next_hop;
                Frame out = std::move(pkt);
                kernel_->schedule_in(cfg_.lookup_delay,
                                     [this, out = std::move(out)]() { emit_(out); });
                return PacketOutcome::Forwarded;
            }
            case WiseRule::Action::Drop:
                return PacketOutcome::Dropped;
            case WiseRule::Action::ModifyState:
                modify_state(e->rule.state_index,
                             static_cast<std::uint8_t>(e->rule.state_value));
                continue;
            case WiseRule::Action::ToController:
                depth = 4;
                break;
        }
        break;
    }
    // Miss: buffer and ask the controller.
    if (static_cast<int>(pending_.size()) >= cfg_.pending_buffer) {
        pending_.pop_front();
        ++counters_.buffer_drops;
    }
    NodeId src = pkt.origin, dst = pkt.dst;
    pending_.push_back(std::move(pkt));
    emit_request(src, dst, flow);
    return PacketOutcome::QueuedPendingRule;
}

void WiseNode::emit_request(NodeId src, NodeId dst, std::uint64_t flow) {
    auto key = std::make_pair(dst, flow);
    if (outstanding_.count(key)) return;
    std::uint64_t qid = next_query_id();
    outstanding_[key] = {qid, kernel_->now()};
    Frame f;
    f.kind = MsgKind::Request;
    f.origin = id_;
    f.dst = sink_;
    f.bytes = cfg_.request_bytes;
    f.body = RequestBody{src, dst, flow, qid};
    ++counters_.requests_sent;
    send_up(std::move(f));
}

void WiseNode::finish_query(std::uint64_t query_id) {
    for (auto it = outstanding_.begin(); it != outstanding_.end();) {
        if (it->second.first == query_id) {
            if (rule_installed_) rule_installed_(query_id, it->second.second);
            it = outstanding_.erase(it);
        } else {
            ++it;
        }
    }
}

void WiseNode::on_response(const Frame& frame) {
    const auto& resp = std::get<ResponseBody>(frame.body);
    SimTime now = kernel_->now();
    for (const auto& r : resp.rules) {
        // Forwarding a destination implies accepting it.
        for (const auto& w : r.windows)
            if (w.field == WiseWindow::Field::Dst && w.rel == WiseWindow::Rel::Eq)
                accepted_ids_.insert(static_cast<NodeId>(w.value));
        table_.install(r, now);
    }
    if (on_install_) on_install_(resp.flow_id);
    if (resp.query_id) finish_query(resp.query_id);
    kernel_->schedule_in(cfg_.install_delay, [this]() { release_pending(); });
}

void WiseNode::install_for_path(const OpenPathBody& op) {
    auto it = std::find(op.path.begin(), op.path.end(), id_);
    if (it == op.path.end()) return;
    std::size_t i = static_cast<std::size_t>(it - op.path.begin());
    SimTime now = kernel_->now();
    auto make_rule = [&](NodeId match_dst, NodeId hop) {
        WiseRule r;
        WiseWindow w;
        w.field = WiseWindow::Field::Dst;
        w.rel = WiseWindow::Rel::Eq;
        w.value = match_dst;
        r.windows = {w};
        r.action = WiseRule::Action::Forward;
        r.next_hop = hop;
        accepted_ids_.insert(match_dst);
        table_.install(std::move(r), now);
    };
    // Entries for both directions of this path segment.
    if (i + 1 < op.path.size()) make_rule(op.path.back(), op.path[i + 1]);
    if (i > 0) make_rule(op.path.front(), op.path[i - 1]);
    if (on_install_) on_install_(op.flow_id);
}

void WiseNode::on_openpath(Frame frame) {
    const auto& op = std::get<OpenPathBody>(frame.body);
    install_for_path(op);
    bool terminal = !frame.srh || frame.srh->cursor + 1 >= frame.srh->hops.size();
    if (terminal) {
        if (op.query_id) finish_query(op.query_id);
        kernel_->schedule_in(cfg_.install_delay, [this]() { release_pending(); });
        return;
    }
    frame.srh->cursor += 1;
    frame.link_dst = frame.srh->hops[frame.srh->cursor];
    kernel_->schedule_in(cfg_.install_delay, [this, frame]() { emit_(frame); });
}

void WiseNode::release_pending() {
    std::deque<Frame> still;
    while (!pending_.empty()) {
        Frame pkt = std::move(pending_.front());
        pending_.pop_front();
        const auto* app = std::get_if<AppBody>(&pkt.body);
        std::uint64_t flow = app ? app->flow_id : 0;
        auto* e = table_.first_match(pkt.origin, pkt.dst, pkt.kind, state_,
                                     kernel_->now());
        if (e && e->rule.action == WiseRule::Action::Forward) {
            pkt.link_dst = e->rule.next_hop;
            emit_(std::move(pkt));
        } else if (e && e->rule.action == WiseRule::Action::Drop) {
            // discarded
        } else {
            (void)flow;
            still.push_back(std::move(pkt));
        }
    }
    pending_ = std::move(still);
}

void WiseNode::on_frame(const Frame& frame) {
    switch (frame.kind) {
        case MsgKind::WiseBeacon:
            on_beacon(frame);
            return;
        case MsgKind::Config:
            if (frame.dst == id_) {
                configure(std::get<ConfigBody>(frame.body));
            } else if (frame.srh && frame.srh->cursor + 1 < frame.srh->hops.size()) {
                Frame fwd = frame;
                fwd.srh->cursor += 1;
                fwd.link_dst = fwd.srh->hops[fwd.srh->cursor];
                emit_(std::move(fwd));
            }
            return;
        case MsgKind::Response:
            if (frame.dst == id_) {
                on_response(frame);
            } else if (frame.srh && frame.srh->cursor + 1 < frame.srh->hops.size()) {
                Frame fwd = frame;
                fwd.srh->cursor += 1;
                fwd.link_dst = fwd.srh->hops[fwd.srh->cursor];
                emit_(std::move(fwd));
            }
            return;
        case MsgKind::OpenPath:
            on_openpath(frame);
            return;
        case MsgKind::WiseJoin:
        case MsgKind::Request:
        case MsgKind::Report:
        case MsgKind::LinkFail:
            // Upward control relay toward the sink.
            if (frame.dst == sink_ && id_ != sink_) {
                Frame fwd = frame;
                send_up(std::move(fwd));
            }
            return;
        case MsgKind::AppData:
            handle_packet(frame);
            return;
        default:
            return;
    }
}

} // namespace meshsim
