#include "meshsim/controller.hpp"

#include <cmath>

#include <algorithm>
#include <queue>

namespace meshsim {

std::optional<SimTime> ServiceQueue::admit() {
    if (pending_ >= capacity_) {
        ++dropped_;
        return std::nullopt;
    }
    SimTime now = kernel_->now();
    SimTime start = busy_until_ > now ? busy_until_ : now;
    SimTime done = start + service_time_;
    busy_until_ = done;
    ++pending_;
    kernel_->schedule(done, [this]() {
        --pending_;
        ++served_;
    });
    return done;
}

SimTime placement_overhead(const ControllerPlacement& p, int request_bytes,
                           int response_bytes) {
    if (p.kind == PlacementKind::Embedded) return p.service_time;
    auto ser = [&](int bytes) {
        return SimTime::from_seconds(
            static_cast<double>(bytes + p.slip_overhead_bytes) * 8.0 /
            p.backhaul_rate_bps);
    };
    return p.service_time + SimTime{2 * p.backhaul_delay.us} + ser(request_bytes) +
           ser(response_bytes);
}

bool TopologyView::add_link(NodeId a, NodeId b, double q) {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = links.find(key);
    bool changed = it == links.end() || std::abs(it->second - q) > 0.05;
    links[key] = q;
    return changed;
}

bool TopologyView::remove_link(NodeId a, NodeId b) {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    return links.erase(key) > 0;
}

bool TopologyView::has_link(NodeId a, NodeId b) const {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    return links.count(key) > 0;
}

std::vector<NodeId> TopologyView::neighbors_of(NodeId n) const {
    std::vector<NodeId> out;
    for (const auto& [link, q] : links) {
        if (link.first == n) out.push_back(link.second);
        else if (link.second == n) out.push_back(link.first);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Controller::Controller(Kernel& kernel, NodeId sink, ControllerPlacement placement,
                       Options opt, SinkEmitFn emit)
    : kernel_(&kernel), sink_(sink), placement_(placement), opt_(opt),
      emit_(std::move(emit)),
      service_(kernel, placement.service_time, placement.queue_capacity),
      routes_(sink) {
    topo_.nodes[sink_] = {};
}

void Controller::start() {
    if (opt_.missed_update_detection && opt_.nsu_period.us > 0)
        kernel_->schedule_in(opt_.nsu_period, [this]() { periodic_liveness_check(); });
}

SimTime Controller::inbound_extra(int bytes) const {
    if (placement_.kind == PlacementKind::Embedded) return SimTime{0};
    return placement_.backhaul_delay +
           SimTime::from_seconds((bytes + placement_.slip_overhead_bytes) * 8.0 /
                                 placement_.backhaul_rate_bps);
}

SimTime Controller::outbound_extra(int bytes) const {
    return inbound_extra(bytes);
}

void Controller::on_control_frame(const Frame& frame) {
    // Border-router stage: external placement pays backhaul propagation and
    // serialization before the request can enter the service queue.
    SimTime at_ctrl = kernel_->now() + inbound_extra(frame.bytes);
    Frame copy = frame;
    kernel_->schedule(at_ctrl, [this, copy]() {
        auto done = service_.admit();
        if (!done) return; // dropped; the node retries per its own timers
        kernel_->schedule(*done, [this, copy]() { dispatch(copy); });
    });
}

void Controller::dispatch(const Frame& frame) {
    // Every inbound request goes to exactly one subsystem.
    switch (frame.kind) {
        case MsgKind::Dao:
        case MsgKind::WiseJoin:
            ++counters_.joins;
            handle_join(frame);
            break;
        case MsgKind::Nsu:
        case MsgKind::Report:
            ++counters_.state_updates;
            handle_state_update(frame);
            break;
        case MsgKind::Ftq:
        case MsgKind::Request:
            ++counters_.flow_queries;
            handle_flow_query(frame);
            break;
        case MsgKind::LinkFail: {
            ++counters_.link_failures;
            const auto& lf = std::get<LinkFailBody>(frame.body);
            handle_link_failure(lf.a, lf.b);
            break;
        }
        default:
            break;
    }
}

void Controller::handle_join(const Frame& frame) {
    NodeId node;
    if (frame.kind == MsgKind::Dao) {
        const auto& dao = std::get<DaoBody>(frame.body);
        node = dao.node;
        routes_.register_dao(dao.node, dao.parent, kernel_->now(), dao.lifetime);
        // Announced links start optimistic; measured qualities from NSU
        // neighbor reports must not be clobbered.
        if (!topo_.has_link(dao.node, dao.parent)) {
            topo_.add_link(dao.node, dao.parent, 1.0);
            invalidate_cache();
        }
    } else {
        const auto& j = std::get<WiseJoinBody>(frame.body);
        node = j.node;
        if (!topo_.has_link(j.node, j.next_hop)) {
            topo_.add_link(j.node, j.next_hop, 1.0);
            invalidate_cache();
        }
    }
    topo_.touch(node, kernel_->now()); // idempotent registration
    last_update_[node] = kernel_->now();
    send_conf(node);
}

void Controller::send_conf(NodeId target) {
    ++counters_.confs_sent;
    Frame f;
    f.origin = sink_;
    f.dst = target;
    if (opt_.stack == StackKind::Usdn) {
        f.kind = MsgKind::Conf;
        f.bytes = opt_.conf_bytes;
        ConfBody body;
        body.nsu_period = opt_.nsu_period;
        body.flowtable_lifetime = opt_.flowtable_lifetime;
        FlowRule to_ctrl;
        to_ctrl.action = FlowRule::Action::ToController;
        to_ctrl.priority = -1000;
        to_ctrl.refreshable = true;
        body.default_rules = {to_ctrl};
        f.body = std::move(body);
    } else {
        f.kind = MsgKind::Config;
        f.bytes = opt_.conf_bytes;
        ConfigBody body;
        body.accepted_ids = {target, sink_};
        body.report_period = opt_.nsu_period;
        body.table_ttl = opt_.flowtable_lifetime;
        f.body = std::move(body);
    }
    send_to_node(std::move(f), target);
}

void Controller::send_to_node(Frame f, NodeId target) {
    if (target == sink_) return;
    std::optional<std::vector<NodeId>> path;
    if (opt_.stack == StackKind::Usdn) {
        path = routes_.source_route(target, kernel_->now());
        if (!path) path = route(sink_, target);
    } else {
        path = route(sink_, target);
    }
    if (!path || path->size() < 2) {
        ++counters_.unreachable;
        return;
    }
    f.srh = Srh{*path, 0};
    f.link_dst = (*path)[1];
    f.srh->cursor = 1;
    SimTime delay = outbound_extra(f.bytes);
    if (delay.us == 0) {
        emit_(std::move(f));
    } else {
        kernel_->schedule_in(delay, [this, f = std::move(f)]() { emit_(f); });
    }
}

void Controller::handle_state_update(const Frame& frame) {
    NodeId origin = frame.origin;
    if (!registered(origin)) {
        // Update from an unregistered node is treated as a join.
        topo_.touch(origin, kernel_->now());
        send_conf(origin);
    }
    auto& info = topo_.nodes[origin];
    info.last_seen = kernel_->now();
    last_update_[origin] = kernel_->now();
    bool changed = false;
    if (const auto* nsu = std::get_if<NsuBody>(&frame.body)) {
        info.energy_mJ = nsu->residual_energy_mJ;
        for (const auto& lq : nsu->neighbors)
            changed |= topo_.add_link(origin, lq.neighbor, lq.quality);
    } else if (const auto* rep = std::get_if<ReportBody>(&frame.body)) {
        info.energy_mJ = rep->battery_mJ;
        info.x = rep->x;
        info.y = rep->y;
        for (const auto& lq : rep->neighbors)
            changed |= topo_.add_link(origin, lq.neighbor, lq.quality);
    }
    if (changed) invalidate_cache();
}

void Controller::invalidate_cache() {
    route_cache_.clear();
}

std::optional<std::vector<NodeId>> Controller::route(NodeId from, NodeId to) {
    auto key = std::make_pair(from, to);
    auto it = route_cache_.find(key);
    if (it != route_cache_.end()) return it->second;
    if (from == to) return std::vector<NodeId>{from};

    if (!opt_.weighted_routes) {
        // BFS with ascending-id neighbor expansion: lowest-id tiebreak.
        std::map<NodeId, NodeId> parent;
        std::queue<NodeId> q;
        q.push(from);
        parent[from] = from;
        while (!q.empty()) {
            NodeId cur = q.front();
            q.pop();
            if (cur == to) break;
            for (NodeId nb : topo_.neighbors_of(cur)) {
                if (!parent.count(nb)) {
                    parent[nb] = cur;
                    q.push(nb);
                }
            }
        }
        if (!parent.count(to)) return std::nullopt;
        std::vector<NodeId> path;
        for (NodeId cur = to; cur != from; cur = parent[cur]) path.push_back(cur);
        path.push_back(from);
        std::reverse(path.begin(), path.end());
        route_cache_[key] = path;
        return path;
    }

    // Inverse-quality-weighted Dijkstra (interference-aware proxy).
    std::map<NodeId, double> dist;
    std::map<NodeId, NodeId> parent;
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[from] = 0.0;
    parent[from] = from;
    pq.push({0.0, from});
    while (!pq.empty()) {
        auto [d, cur] = pq.top();
        pq.pop();
        if (d > dist[cur]) continue;
        if (cur == to) break;
        for (NodeId nb : topo_.neighbors_of(cur)) {
            auto lk = cur < nb ? std::make_pair(cur, nb) : std::make_pair(nb, cur);
            double q = std::max(topo_.links.at(lk), 1e-3);
            double nd = d + 1.0 / q;
            if (!dist.count(nb) || nd < dist[nb]) {
                dist[nb] = nd;
                parent[nb] = cur;
                pq.push({nd, nb});
            }
        }
    }
    if (!parent.count(to)) return std::nullopt;
    std::vector<NodeId> path;
    for (NodeId cur = to; cur != from; cur = parent[cur]) path.push_back(cur);
    path.push_back(from);
    std::reverse(path.begin(), path.end());
    route_cache_[key] = path;
    return path;
}

void Controller::handle_flow_query(const Frame& frame) {
    NodeId origin = frame.origin;
    NodeId src = kNoNode, dst = kNoNode;
    std::uint64_t flow = 0, qid = 0;
    if (const auto* ftq = std::get_if<FtqBody>(&frame.body)) {
        src = ftq->src;
        dst = ftq->dst;
        flow = ftq->flow_id;
        qid = ftq->query_id;
    } else if (const auto* req = std::get_if<RequestBody>(&frame.body)) {
        src = req->src;
        dst = req->dst;
        flow = req->flow_id;
        qid = req->query_id;
    }
    auto path = route(origin, dst);
    if (!path || path->size() < 2) {
        ++counters_.no_route;
        Frame f;
        f.kind = MsgKind::NoRoute;
        f.origin = sink_;
        f.dst = origin;
        f.bytes = 12;
        f.body = FtsBody{qid, {}};
        send_to_node(std::move(f), origin);
        return;
    }
    installed_flows_[flow] = InstalledFlow{origin, src, dst, *path};
    if (opt_.stack == StackKind::Usdn)
        issue_usdn_rule(origin, src, dst, flow, qid, *path);
    else
        issue_wise_rules(origin, src, dst, flow, qid, *path);
}

void Controller::issue_usdn_rule(NodeId origin, NodeId /*src*/, NodeId dst,
                                 std::uint64_t flow, std::uint64_t query_id,
                                 const std::vector<NodeId>& path) {
    Frame f;
    f.kind = MsgKind::Fts;
    f.origin = sink_;
    f.dst = origin;
    f.bytes = opt_.fts_bytes;
    FlowRule rule;
    rule.match_dst = dst;
    rule.match_flow = flow;
    rule.action = FlowRule::Action::ForwardSrh;
    rule.srh_route = path;
    rule.priority = 10;
    f.body = FtsBody{query_id, {rule}};
    send_to_node(std::move(f), origin);
}

void Controller::issue_wise_rules(NodeId origin, NodeId src, NodeId dst,
                                  std::uint64_t flow, std::uint64_t query_id,
                                  const std::vector<NodeId>& path) {
    if (opt_.wise_mode == WiseInstallMode::OpenPath) {
        // One traversing packet; every node on the path installs both
        // directions of its segment.
        Frame f;
        f.kind = MsgKind::OpenPath;
        f.origin = sink_;
        f.dst = origin;
        f.bytes = opt_.openpath_bytes;
        OpenPathBody body;
        body.path = path;
        body.flow_id = flow;
        body.query_id = query_id;
        body.flow_src = src;
        body.flow_dst = dst;
        f.body = std::move(body);
        // Descent: reversed path when it ends at the sink, otherwise the
        // sink route to the path head followed by the path itself.
        std::vector<NodeId> visit;
        if (path.back() == sink_) {
            visit.assign(path.rbegin(), path.rend());
        } else {
            auto to_head = route(sink_, path.front());
            if (!to_head) {
                ++counters_.unreachable;
                return;
            }
            visit = *to_head;
            visit.insert(visit.end(), path.begin() + 1, path.end());
        }
        if (visit.size() < 2) return;
        f.srh = Srh{visit, 1};
        f.link_dst = visit[1];
        SimTime delay = outbound_extra(f.bytes);
        if (delay.us == 0) {
            emit_(std::move(f));
        } else {
            kernel_->schedule_in(delay, [this, f = std::move(f)]() { emit_(f); });
        }
        return;
    }
    // Per-hop mode: one Response per path node (sink installs nothing to
    // send), each descending separately.
    for (std::size_t i = 0; i < path.size(); ++i) {
        NodeId target = path[i];
        if (target == sink_) continue;
        ResponseBody body;
        body.flow_id = flow;
        body.query_id = target == origin ? query_id : 0;
        auto make_rule = [&](NodeId match_dst, NodeId hop) {
            WiseRule r;
            WiseWindow w;
            w.field = WiseWindow::Field::Dst;
            w.rel = WiseWindow::Rel::Eq;
            w.value = match_dst;
            r.windows = {w};
            r.action = WiseRule::Action::Forward;
            r.next_hop = hop;
            body.rules.push_back(std::move(r));
        };
        if (i + 1 < path.size()) make_rule(path.back(), path[i + 1]);
        if (i > 0) make_rule(path.front(), path[i - 1]);
        Frame f;
        f.kind = MsgKind::Response;
        f.origin = sink_;
        f.dst = target;
        f.bytes = opt_.response_bytes;
        f.body = std::move(body);
        send_to_node(std::move(f), target);
    }
}

void Controller::handle_link_failure(NodeId a, NodeId b) {
    bool removed = topo_.remove_link(a, b);
    if (!removed) return;
    invalidate_cache();
    // Re-route every installed flow whose path used the failed link.
    for (auto& [flow, info] : installed_flows_) {
        bool affected = false;
        for (std::size_t i = 0; i + 1 < info.path.size(); ++i) {
            if ((info.path[i] == a && info.path[i + 1] == b) ||
                (info.path[i] == b && info.path[i + 1] == a)) {
                affected = true;
                break;
            }
        }
        if (!affected) continue;
        auto fresh = route(info.origin, info.dst);
        if (!fresh || fresh->size() < 2) {
            ++counters_.unreachable;
            continue;
        }
        info.path = *fresh;
        ++counters_.repairs_issued;
        if (repair_issued_) repair_issued_(flow);
        if (opt_.stack == StackKind::Usdn)
            issue_usdn_rule(info.origin, info.src, info.dst, flow, 0, *fresh);
        else
            issue_wise_rules(info.origin, info.src, info.dst, flow, 0, *fresh);
    }
}

void Controller::periodic_liveness_check() {
    // A node missing two consecutive state updates is treated as a failed
    // endpoint: its links are withdrawn.
    SimTime now = kernel_->now();
    std::vector<std::pair<NodeId, NodeId>> dead;
    for (const auto& [node, seen] : last_update_) {
        if ((now - seen).us > 2 * opt_.nsu_period.us + opt_.nsu_period.us / 2) {
            for (NodeId nb : topo_.neighbors_of(node)) dead.push_back({node, nb});
        }
    }
    for (auto [a, b] : dead) handle_link_failure(a, b);
    kernel_->schedule_in(opt_.nsu_period, [this]() { periodic_liveness_check(); });
}

void Controller::device_power(NodeId node, bool on) {
    Frame f;
    f.kind = MsgKind::DevCtl;
    f.origin = sink_;
    f.dst = node;
    f.bytes = 10;
    f.body = DevCtlBody{on};
    send_to_node(std::move(f), node);
}

} // namespace meshsim
