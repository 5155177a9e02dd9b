#include "meshsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <queue>

namespace meshsim {

namespace {

// Distinguishes generator-assigned flow ids: stable per-source data flows
// vs one-shot flow-request flows.
constexpr std::uint64_t kDataFlowBase = 1ull << 20;
constexpr std::uint64_t kRequestFlowBase = 1ull << 24;

} // namespace

Network::Network(ScenarioConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed),
      traffic_rng_(seed, 5000), fault_rng_(seed, 6000) {
    build();
}

Network::~Network() = default;

void Network::build() {
    medium_ = std::make_unique<RadioMedium>(kernel_, cfg_.medium,
                                            RngStream(seed_, 0));
    medium_->set_positions(generate_topology(cfg_.topology, cfg_.medium));
    medium_->set_deliver([this](NodeId r, const Frame& f) {
        shells_[r]->mac->handle_delivery(f);
    });

    const int n = cfg_.topology.n;
    shells_.reserve(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
        auto sh = std::make_unique<Shell>();
        MacConfig mac_cfg = cfg_.mac;
        sh->mac = std::make_unique<Mac>(kernel_, *medium_, i, mac_cfg, cfg_.rdc,
                                        RngStream(seed_, 1 + i));
        sh->mac->ledger().tx_current_mA = cfg_.energy.tx_current_mA;
        sh->mac->ledger().rx_current_mA = cfg_.energy.rx_current_mA;
        sh->mac->ledger().listen_current_mA = cfg_.energy.listen_current_mA;
        sh->mac->ledger().voltage_v = cfg_.energy.voltage_v;
        shells_.push_back(std::move(sh));
    }

    Controller::Options opt;
    opt.stack = cfg_.stack;
    opt.wise_mode = cfg_.wise_mode;
    opt.route_lifetime = cfg_.rpl.route_lifetime;
    opt.weighted_routes = cfg_.weighted_routes;
    if (cfg_.stack == StackKind::Usdn) {
        opt.nsu_period = cfg_.usdn.nsu_period;
        opt.flowtable_lifetime = cfg_.usdn.flowtable_lifetime;
        opt.conf_bytes = cfg_.usdn.conf_bytes;
        opt.fts_bytes = cfg_.usdn.fts_bytes;
    } else {
        opt.nsu_period = cfg_.wise.report_period;
        opt.flowtable_lifetime = cfg_.wise.table_ttl;
        opt.conf_bytes = cfg_.wise.config_bytes;
        opt.response_bytes = cfg_.wise.response_bytes;
        opt.openpath_bytes = cfg_.wise.openpath_bytes;
    }
    controller_ = std::make_unique<Controller>(
        kernel_, sink(), cfg_.placement, opt,
        [this](Frame f) { shells_[sink()]->mac->send(std::move(f)); });

    for (NodeId i = 0; i < n; ++i) wire_node(i);

    sources_ = pick_sources();

    for (auto& sh : shells_) sh->mac->start();
    if (cfg_.stack == StackKind::Usdn)
        for (auto& sh : shells_) sh->rpl->start();
    else
        for (auto& sh : shells_) sh->wise->start();
    controller_->start();

    SimTime start = cfg_.traffic.start;
    if (start > cfg_.duration) start = cfg_.duration;
    kernel_.schedule(start, [this]() { start_traffic(); });

    for (const auto& fault : cfg_.faults)
        kernel_.schedule(fault.at, [this, fault]() { apply_fault(fault); });
}

void Network::wire_node(NodeId i) {
    Shell& sh = *shells_[i];
    auto emit = [this, i](Frame f) { shells_[i]->mac->send(std::move(f)); };

    if (cfg_.stack == StackKind::Usdn) {
        sh.rpl = std::make_unique<RplNode>(kernel_, i, sink(), cfg_.rpl,
                                           RngStream(seed_, 1000 + i), emit);
        for (NodeId nb : medium_->neighbors(i))
            sh.rpl->note_link_quality(
                nb, reception_probability(medium_->distance(i, nb), cfg_.medium));
        sh.usdn = std::make_unique<UsdnNode>(kernel_, i, sink(), cfg_.usdn, emit);
        sh.usdn->set_parent_fn(
            [this, i]() { return shells_[i]->rpl->preferred_parent(); });
        sh.usdn->set_nsu_metrics([this, i]() {
            NsuBody b;
            b.residual_energy_mJ =
                kInitialBatteryMj - energy_mJ(shells_[i]->mac->ledger());
            for (NodeId nb : medium_->neighbors(i)) {
                if (medium_->link_failed(i, nb)) continue;
                b.neighbors.push_back(
                    {nb, reception_probability(medium_->distance(i, nb),
                                               cfg_.medium)});
            }
            b.queue_occupancy = shells_[i]->mac->queue_occupancy();
            return b;
        });
        sh.usdn->set_rule_installed([this](std::uint64_t, SimTime emitted) {
            rtt_sum_us_ += (kernel_.now() - emitted).us;
            ++rtt_n_;
        });
        sh.usdn->set_on_install([this](const FtsBody& fts) {
            if (fts.query_id == 0) note_repair();
        });
        if (i == sink()) {
            // Root DAOs double as join requests toward the controller.
            sh.rpl->set_dao_at_root([this](const DaoBody& dao) {
                note_join();
                Frame f;
                f.kind = MsgKind::Dao;
                f.origin = dao.node;
                f.dst = sink();
                f.bytes = cfg_.rpl.dao_bytes;
                f.body = dao;
                controller_->on_control_frame(f);
            });
            sh.usdn->set_app_deliver([this](const Frame& f) {
                ++app_delivered_;
                latency_sum_us_ += (kernel_.now() - f.created).us;
                ++latency_n_;
            });
        }
    } else {
        sh.wise = std::make_unique<WiseNode>(kernel_, i, sink(), cfg_.wise, emit);
        sh.wise->set_link_quality([this, i](NodeId nb) {
            if (nb == kNoNode || nb >= medium_->node_count()) return 0.0;
            return reception_probability(medium_->distance(i, nb), cfg_.medium);
        });
        sh.wise->set_report_metrics([this, i]() {
            ReportBody b;
            b.battery_mJ = kInitialBatteryMj - energy_mJ(shells_[i]->mac->ledger());
            b.x = medium_->positions()[i].x;
            b.y = medium_->positions()[i].y;
            for (NodeId nb : medium_->neighbors(i)) {
                if (medium_->link_failed(i, nb)) continue;
                b.neighbors.push_back(
                    {nb, reception_probability(medium_->distance(i, nb),
                                               cfg_.medium)});
            }
            return b;
        });
        sh.wise->set_rule_installed([this](std::uint64_t, SimTime emitted) {
            rtt_sum_us_ += (kernel_.now() - emitted).us;
            ++rtt_n_;
        });
        sh.wise->set_on_install([this, i](std::uint64_t flow) {
            // A second install of the same flow at the same node is a repair.
            if (!wise_installs_seen_.insert({i, flow}).second) note_repair();
        });
        if (i == sink()) {
            sh.wise->set_app_deliver([this](const Frame& f) {
                ++app_delivered_;
                latency_sum_us_ += (kernel_.now() - f.created).us;
                ++latency_n_;
            });
        }
    }

    sh.mac->set_receive([this, i](const Frame& f) { dispatch(i, f); });
    sh.mac->set_send_done(
        [this, i](const Frame& f, bool ok) { on_send_done(i, f, ok); });
}

void Network::dispatch(NodeId i, const Frame& frame) {
    Shell& sh = *shells_[i];
    if (cfg_.stack == StackKind::Usdn) {
        switch (frame.kind) {
            case MsgKind::Dio:
            case MsgKind::Dis:
            case MsgKind::Dao:
                sh.rpl->on_frame(frame);
                return;
            default:
                break;
        }
        if (i == sink() && frame.dst == sink() &&
            (frame.kind == MsgKind::Ftq || frame.kind == MsgKind::Nsu ||
             frame.kind == MsgKind::LinkFail)) {
            controller_->on_control_frame(frame);
            return;
        }
        bool was = sh.usdn->configured();
        sh.usdn->on_frame(frame);
        if (!was && sh.usdn->configured()) note_configured(i);
        return;
    }

    if (i == sink() && frame.dst == sink() &&
        (frame.kind == MsgKind::WiseJoin || frame.kind == MsgKind::Request ||
         frame.kind == MsgKind::Report || frame.kind == MsgKind::LinkFail)) {
        if (frame.kind == MsgKind::WiseJoin) note_join();
        controller_->on_control_frame(frame);
        return;
    }
    bool was = sh.wise->configured();
    sh.wise->on_frame(frame);
    if (!was && sh.wise->configured()) note_configured(i);
}

void Network::on_send_done(NodeId i, const Frame& frame, bool ok) {
    if (frame.link_dst == kBroadcast) return;
    NodeId dst = frame.link_dst;
    if (ok) {
        consec_fail_.erase({i, dst});
        return;
    }
    // Clear-channel exhaustion is local congestion, not evidence against
    // the link; treating it as link death causes repair storms under load.
    if (shells_[i]->mac->last_fail_channel_access()) return;
    if (std::getenv("MESHSIM_DEBUG_DROPS"))
        std::fprintf(stderr, "[%0.3f] drop %s %u->%u q=%.3f\n",
                     kernel_.now().seconds(), msg_kind_name(frame.kind), i, dst,
                     reception_probability(medium_->distance(i, dst), cfg_.medium));
    if (medium_->link_failed(i, dst)) {
        // First failed MAC delivery after an injected fault marks detection.
        for (auto& ev : fault_events_) {
            if (ev.at <= kernel_.now() && ev.first_detect.us < 0)
                ev.first_detect = kernel_.now();
        }
    }
    if (++consec_fail_[{i, dst}] < kLinkDeadThreshold) return;
    consec_fail_.erase({i, dst});

    if (cfg_.stack == StackKind::Usdn) {
        Shell& sh = *shells_[i];
        if (sh.rpl->preferred_parent() == dst) sh.rpl->on_parent_link_failed(dst);
        sh.usdn->report_link_failure(i, dst);
    } else {
        shells_[i]->wise->on_next_hop_failed(dst);
        send_wise_link_fail(i, i, dst, 5);
    }
}

void Network::send_wise_link_fail(NodeId node, NodeId a, NodeId b,
                                  int attempts_left) {
    // The failed link may have been the node's own uplink; wait for TDM
    // re-adoption before the report can travel.
    NodeId hop = shells_[node]->wise->next_hop_to_sink();
    if (hop == kNoNode && node != sink()) {
        if (attempts_left <= 0) return;
        kernel_.schedule_in(SimTime::from_s(1), [this, node, a, b, attempts_left]() {
            send_wise_link_fail(node, a, b, attempts_left - 1);
        });
        return;
    }
    Frame f;
    f.kind = MsgKind::LinkFail;
    f.origin = node;
    f.dst = sink();
    f.bytes = 14;
    f.body = LinkFailBody{a, b};
    if (node == sink()) {
        controller_->on_control_frame(f);
    } else {
        f.link_dst = hop;
        shells_[node]->mac->send(std::move(f));
    }
}

void Network::note_configured(NodeId i) {
    if (shells_[i]->configured_at.us < 0) shells_[i]->configured_at = kernel_.now();
}

void Network::note_join() {
    if (first_join_.us < 0) first_join_ = kernel_.now();
}

void Network::note_repair() {
    ++repairs_;
    for (auto it = fault_events_.rbegin(); it != fault_events_.rend(); ++it) {
        if (it->at <= kernel_.now()) {
            if (kernel_.now() > it->last_repair) it->last_repair = kernel_.now();
            return;
        }
    }
}

std::vector<int> Network::hop_distances() const {
    // BFS hop counts over the ideal (unfailed) neighbor graph, sink-rooted.
    std::vector<int> hops(shells_.size(), -1);
    std::queue<NodeId> q;
    hops[sink()] = 0;
    q.push(sink());
    while (!q.empty()) {
        NodeId cur = q.front();
        q.pop();
        for (NodeId nb : medium_->neighbors(cur)) {
            if (hops[nb] < 0) {
                hops[nb] = hops[cur] + 1;
                q.push(nb);
            }
        }
    }
    return hops;
}

std::vector<NodeId> Network::pick_sources() const {
    std::vector<NodeId> out;
    switch (cfg_.traffic.sources) {
        case TrafficSpec::Sources::AllNonSink:
            for (NodeId i = 0; i < shells_.size(); ++i)
                if (i != sink()) out.push_back(i);
            break;
        case TrafficSpec::Sources::HopDistance: {
            auto hops = hop_distances();
            for (NodeId i = 0; i < shells_.size(); ++i)
                if (hops[i] == cfg_.traffic.hop_distance) out.push_back(i);
            break;
        }
        case TrafficSpec::Sources::Count:
            for (NodeId i = 0; i < shells_.size(); ++i) {
                if (i == sink()) continue;
                if (static_cast<int>(out.size()) >= cfg_.traffic.source_count) break;
                out.push_back(i);
            }
            break;
    }
    return out;
}

void Network::inject_app_packet(NodeId src, NodeId dst, std::uint64_t flow) {
    Frame f;
    f.kind = MsgKind::AppData;
    f.origin = src;
    f.dst = dst;
    f.bytes = cfg_.traffic.payload_bytes + cfg_.traffic.frame_overhead_bytes;
    f.body = AppBody{flow, ++packet_seq_};
    f.created = kernel_.now();
    ++app_sent_;
    if (cfg_.stack == StackKind::Usdn)
        shells_[src]->usdn->handle_packet(std::move(f));
    else
        shells_[src]->wise->handle_packet(std::move(f));
}

void Network::start_traffic() {
    served_at_start_ = controller_->service().served();

    if (cfg_.traffic.bit_rate_bps > 0 && !sources_.empty()) {
        double interval_s = static_cast<double>(cfg_.traffic.payload_bytes) * 8.0 /
                            cfg_.traffic.bit_rate_bps;
        auto interval = SimTime::from_seconds(interval_s);
        for (NodeId s : sources_) {
            // Stagger sources across the interval so they never phase-lock.
            SimTime offset{static_cast<std::int64_t>(
                traffic_rng_.next_below(static_cast<std::uint64_t>(
                    std::max<std::int64_t>(interval.us, 1))))};
            std::uint64_t flow = kDataFlowBase + s;
            // Self-rescheduling periodic emission.
            struct Periodic {
                Network* net;
                NodeId s;
                std::uint64_t flow;
                SimTime interval;
                void operator()() const {
                    net->inject_app_packet(s, net->sink(), flow);
                    net->kernel_.schedule_in(interval, *this);
                }
            };
            kernel_.schedule_in(offset, Periodic{this, s, flow, interval});
        }
    }

    if (cfg_.traffic.flow_request_rate > 0 && !sources_.empty())
        schedule_flow_arrival();
}

void Network::schedule_flow_arrival() {
    double rate = cfg_.traffic.flow_request_rate;
    double dt_s;
    if (cfg_.traffic.exponential_arrivals) {
        double u = traffic_rng_.next_double();
        dt_s = -std::log(1.0 - u) / rate;
    } else {
        dt_s = 1.0 / rate;
    }
    SimTime dt = SimTime::from_seconds(dt_s);
    if (dt.us < 1) dt = SimTime{1};
    kernel_.schedule_in(dt, [this]() {
        NodeId src = sources_[rr_index_++ % sources_.size()];
        inject_app_packet(src, sink(), kRequestFlowBase + ++flow_seq_);
        schedule_flow_arrival();
    });
}

void Network::apply_fault(const FaultSpec& spec) {
    // Candidate set: links the routing planes are actually using, so every
    // failure is observable.
    std::set<std::pair<NodeId, NodeId>> in_use;
    for (NodeId i = 0; i < shells_.size(); ++i) {
        if (i == sink()) continue;
        NodeId up = cfg_.stack == StackKind::Usdn
                        ? shells_[i]->rpl->preferred_parent()
                        : shells_[i]->wise->next_hop_to_sink();
        if (up == kNoNode) continue;
        auto key = i < up ? std::make_pair(i, up) : std::make_pair(up, i);
        if (!medium_->link_failed(key.first, key.second)) in_use.insert(key);
    }
    std::vector<std::pair<NodeId, NodeId>> candidates(in_use.begin(), in_use.end());

    FaultEvent ev;
    ev.at = kernel_.now();
    int k = std::min<int>(spec.fail_links, static_cast<int>(candidates.size()));
    for (int f = 0; f < k; ++f) {
        std::size_t pick = static_cast<std::size_t>(
            fault_rng_.next_below(candidates.size()));
        auto link = candidates[pick];
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        medium_->fail_link(link.first, link.second);
    }
    fault_events_.push_back(ev);
}

MetricsRecord Network::run() {
    kernel_.run_until(cfg_.duration);
    return collect();
}

MetricsRecord Network::collect() {
    if (!collected_) {
        for (auto& sh : shells_) sh->mac->finalize(kernel_.now());
        collected_ = true;
    }

    MetricsRecord m;
    m.seed = seed_;
    m.app_sent = app_sent_;
    m.app_delivered = app_delivered_;
    m.pdr = app_sent_ > 0
                ? static_cast<double>(app_delivered_) / static_cast<double>(app_sent_)
                : 1.0;
    m.latency_samples = latency_n_;
    m.mean_app_latency_ms =
        latency_n_ > 0 ? static_cast<double>(latency_sum_us_) / 1e3 /
                             static_cast<double>(latency_n_)
                       : 0.0;
    m.rtt_samples = rtt_n_;
    m.mean_rule_rtt_ms = rtt_n_ > 0 ? static_cast<double>(rtt_sum_us_) / 1e3 /
                                          static_cast<double>(rtt_n_)
                                    : 0.0;

    SimTime window = kernel_.now() - cfg_.traffic.start;
    if (window.us <= 0) window = kernel_.now();
    m.served_requests = controller_->service().served() - served_at_start_;
    m.served_throughput = window.us > 0
                              ? static_cast<double>(m.served_requests) /
                                    window.seconds()
                              : 0.0;

    double energy_sum = 0.0;
    for (auto& sh : shells_) {
        double e = energy_mJ(sh->mac->ledger());
        m.energy_per_node_mJ.push_back(e);
        energy_sum += e;
    }
    m.mean_energy_mJ = energy_sum / static_cast<double>(shells_.size());

    SimTime last_config{-1};
    for (auto& sh : shells_) {
        if (sh->configured_at > last_config) last_config = sh->configured_at;
    }
    if (first_join_.us >= 0 && last_config.us >= 0)
        m.topology_discovery_ms = (last_config - first_join_).millis();

    double update_sum = 0.0;
    for (const auto& ev : fault_events_) {
        if (ev.first_detect.us >= 0 && ev.last_repair >= ev.first_detect)
            update_sum += (ev.last_repair - ev.first_detect).millis();
    }
    m.topology_update_ms =
        fault_events_.empty() ? 0.0
                              : update_sum / static_cast<double>(fault_events_.size());
    m.repairs_completed = repairs_;

    for (int k = 0; k <= static_cast<int>(MsgKind::AppData); ++k) {
        auto kind = static_cast<MsgKind>(k);
        std::uint64_t c = medium_->tx_count(kind);
        if (c == 0) continue;
        if (is_control_kind(kind)) {
            m.control_tx[msg_kind_name(kind)] = c;
            m.total_control_tx += c;
        } else {
            m.data_tx = c;
        }
    }
    m.collisions = medium_->collision_count();

    std::uint64_t mac_queue = 0, link = 0, cca = 0, buffer = 0, filter = 0;
    for (NodeId i = 0; i < shells_.size(); ++i) {
        mac_queue += shells_[i]->mac->counters().queue_full_drops;
        link += shells_[i]->mac->counters().link_drops;
        cca += shells_[i]->mac->counters().channel_access_drops;
        if (cfg_.stack == StackKind::Usdn) {
            buffer += shells_[i]->usdn->counters().buffer_drops;
        } else {
            buffer += shells_[i]->wise->counters().buffer_drops;
            filter += shells_[i]->wise->counters().filter_drops;
        }
    }
    m.drops["mac_queue"] = mac_queue;
    m.drops["link_retry_exhausted"] = link;
    m.drops["channel_access_exhausted"] = cca;
    m.drops["pending_buffer"] = buffer;
    m.drops["accepted_id_filter"] = filter;
    m.drops["controller_queue"] = controller_->service().dropped();
    m.drops["no_route"] = controller_->counters().no_route;

    m.trace_digest = kernel_.trace_digest();
    return m;
}

} // namespace meshsim
