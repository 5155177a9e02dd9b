#include <doctest.h>

#include <map>
#include <vector>

#include "meshsim/wise.hpp"

using namespace meshsim;

namespace {

WiseWindow dst_eq(NodeId dst) {
    WiseWindow w;
    w.field = WiseWindow::Field::Dst;
    w.rel = WiseWindow::Rel::Eq;
    w.value = dst;
    return w;
}

WiseWindow state_eq(int index, int value) {
    WiseWindow w;
    w.field = WiseWindow::Field::StateByte;
    w.operand_index = index;
    w.rel = WiseWindow::Rel::Eq;
    w.value = value;
    return w;
}

WiseRule forward_rule(std::vector<WiseWindow> windows, NodeId hop) {
    WiseRule r;
    r.windows = std::move(windows);
    r.action = WiseRule::Action::Forward;
    r.next_hop = hop;
    return r;
}

Frame app_packet(NodeId origin, NodeId dst, std::uint64_t flow = 1) {
    Frame f;
    f.kind = MsgKind::AppData;
    f.origin = origin;
    f.dst = dst;
    f.bytes = 37;
    f.body = AppBody{flow, 0};
    return f;
}

Frame beacon_from(NodeId sender, std::uint32_t hop, double q = 1.0) {
    Frame f;
    f.kind = MsgKind::WiseBeacon;
    f.link_src = sender;
    f.link_dst = kBroadcast;
    f.bytes = 16;
    f.body = WiseBeaconBody{hop, q};
    return f;
}

} // namespace

TEST_CASE("window semantics: conjunction of up to three conditions") {
    std::vector<std::uint8_t> state(16, 0);
    CHECK(WiseTable::window_holds(dst_eq(5), 1, 5, MsgKind::AppData, state));
    CHECK_FALSE(WiseTable::window_holds(dst_eq(5), 1, 6, MsgKind::AppData, state));

    state[2] = 9;
    CHECK(WiseTable::window_holds(state_eq(2, 9), 1, 5, MsgKind::AppData, state));
    WiseWindow lt = state_eq(2, 10);
    lt.rel = WiseWindow::Rel::Lt;
    CHECK(WiseTable::window_holds(lt, 1, 5, MsgKind::AppData, state));
    lt.rel = WiseWindow::Rel::Gt;
    CHECK_FALSE(WiseTable::window_holds(lt, 1, 5, MsgKind::AppData, state));

    WiseTable t(16, SimTime::from_s(300));
    t.install(forward_rule({dst_eq(5), state_eq(0, 1)}, 7), SimTime{0});
    CHECK(t.first_match(1, 5, MsgKind::AppData, state, SimTime{0}) == nullptr);
    state[0] = 1;
    CHECK(t.first_match(1, 5, MsgKind::AppData, state, SimTime{0}) != nullptr);
}

TEST_CASE("first-match order, in-place replace, FIFO eviction") {
    WiseTable t(3, SimTime::from_s(300));
    std::vector<std::uint8_t> state(16, 0);
    // Two rules that both match a packet to 5; installation order decides.
    WiseWindow src_any;
    src_any.field = WiseWindow::Field::Src;
    src_any.rel = WiseWindow::Rel::Gt;
    src_any.value = -1;
    t.install(forward_rule({dst_eq(5)}, 1), SimTime{0});
    t.install(forward_rule({src_any}, 2), SimTime{0});
    auto* e = t.first_match(0, 5, MsgKind::AppData, state, SimTime{0});
    REQUIRE(e);
    CHECK(e->rule.next_hop == 1); // earlier entry wins
    CHECK(e->hits == 1);

    // Identical window sets replace in place instead of duplicating.
    t.install(forward_rule({dst_eq(5)}, 9), SimTime{0});
    CHECK(t.size() == 2);
    e = t.first_match(0, 5, MsgKind::AppData, state, SimTime{0});
    REQUIRE(e);
    CHECK(e->rule.next_hop == 9);

    // Capacity 3: the fourth distinct install evicts the oldest entry.
    t.install(forward_rule({dst_eq(6)}, 3), SimTime{0});
    t.install(forward_rule({dst_eq(7)}, 4), SimTime{0});
    CHECK(t.size() == 3);
    e = t.first_match(0, 5, MsgKind::AppData, state, SimTime{0});
    REQUIRE(e);
    CHECK(e->rule.next_hop == 2); // dst_eq(5) was evicted FIFO; src catch-all matches
}

TEST_CASE("table ttl expiry") {
    WiseTable t(16, SimTime::from_s(300));
    std::vector<std::uint8_t> state(16, 0);
    t.install(forward_rule({dst_eq(5)}, 1), SimTime{0});
    t.expire(SimTime::from_s(299));
    CHECK(t.size() == 1);
    t.expire(SimTime::from_s(300));
    CHECK(t.size() == 0);
}

TEST_CASE("TDM beacons: adoption, quality tiebreak, BFS-consistent hops") {
    Kernel k;
    WiseNode n(k, 3, 0, WiseConfig{}, [](Frame) {});
    std::map<NodeId, double> quality{{0, 0.8}, {1, 0.9}, {2, 0.9}};
    n.set_link_quality([&](NodeId nb) { return quality.count(nb) ? quality[nb] : 0.0; });

    CHECK(n.hop_distance() == kWiseHopInf);
    n.on_frame(beacon_from(1, 1));
    CHECK(n.hop_distance() == 2);
    CHECK(n.next_hop_to_sink() == 1);

    SUBCASE("closer sender wins") {
        n.on_frame(beacon_from(0, 0));
        CHECK(n.hop_distance() == 1);
        CHECK(n.next_hop_to_sink() == 0);
    }

    SUBCASE("equal hop: higher quality wins") {
        quality[2] = 0.95;
        n.on_frame(beacon_from(2, 1));
        CHECK(n.next_hop_to_sink() == 2);
    }

    SUBCASE("equal hop and quality: lower id wins") {
        n.on_frame(beacon_from(2, 1));
        CHECK(n.next_hop_to_sink() == 1);
        quality[0] = 0.9;
        n.on_frame(beacon_from(0, 1));
        CHECK(n.next_hop_to_sink() == 0);
    }

    SUBCASE("farther sender is ignored") {
        n.on_frame(beacon_from(2, 5));
        CHECK(n.next_hop_to_sink() == 1);
    }
}

TEST_CASE("accepted-ID filter drops unknown destinations") {
    Kernel k;
    WiseNode n(k, 2, 0, WiseConfig{}, [](Frame) {});
    CHECK(n.handle_packet(app_packet(1, 9)) == PacketOutcome::Dropped);
    CHECK(n.counters().filter_drops == 1);
    // Own id is always accepted.
    CHECK(n.handle_packet(app_packet(1, 2)) == PacketOutcome::Delivered);
}

TEST_CASE("miss emits a Request with a digest; repeat misses suppressed") {
    Kernel k;
    std::vector<Frame> out;
    WiseNode n(k, 2, 0, WiseConfig{}, [&](Frame f) { out.push_back(f); });
    n.on_frame(beacon_from(0, 0)); // learn the uplink
    out.clear();
    ConfigBody conf;
    conf.accepted_ids = {2, 9};
    n.configure(conf);

    CHECK(n.handle_packet(app_packet(2, 9, 5)) == PacketOutcome::QueuedPendingRule);
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind == MsgKind::Request);
    const auto& rq = std::get<RequestBody>(out[0].body);
    CHECK(rq.src == 2);
    CHECK(rq.dst == 9);
    CHECK(rq.flow_id == 5);
    n.handle_packet(app_packet(2, 9, 5));
    CHECK(out.size() == 1); // suppressed

    SUBCASE("Response installs rules and releases the pending packet") {
        Frame resp;
        resp.kind = MsgKind::Response;
        resp.dst = 2;
        resp.bytes = 52;
        ResponseBody rb;
        rb.query_id = rq.query_id;
        rb.flow_id = 5;
        rb.rules = {forward_rule({dst_eq(9)}, 7)};
        resp.body = rb;
        bool rtt_seen = false;
        n.set_rule_installed([&](std::uint64_t qid, SimTime) {
            rtt_seen = qid == rq.query_id;
        });
        n.on_frame(resp);
        k.run_until(SimTime::from_s(1));
        CHECK(rtt_seen);
        bool forwarded = false;
        for (const auto& f : out)
            forwarded |= f.kind == MsgKind::AppData && f.link_dst == 7;
        CHECK(forwarded);
    }
}

TEST_CASE("stateful match: ModifyState then re-match") {
    Kernel k;
    std::vector<Frame> out;
    WiseNode n(k, 2, 0, WiseConfig{}, [&](Frame f) { out.push_back(f); });
    ConfigBody conf;
    conf.accepted_ids = {2, 9};
    n.configure(conf);

    // Gate: forwarding to 9 requires state[0] == 1; a trigger rule flips it
    // for packets from node 4.
    n.table().install(forward_rule({dst_eq(9), state_eq(0, 1)}, 7), SimTime{0});
    WiseRule trigger;
    WiseWindow from4;
    from4.field = WiseWindow::Field::Src;
    from4.rel = WiseWindow::Rel::Eq;
    from4.value = 4;
    trigger.windows = {from4};
    trigger.action = WiseRule::Action::ModifyState;
    trigger.state_index = 0;
    trigger.state_value = 1;
    n.table().install(trigger, SimTime{0});

    CHECK(n.handle_packet(app_packet(1, 9)) == PacketOutcome::QueuedPendingRule);
    CHECK(n.state_array()[0] == 0);
    // A packet from 4 hits the trigger, rewrites state, then re-matches the
    // forward rule in the same invocation.
    CHECK(n.handle_packet(app_packet(4, 9)) == PacketOutcome::Forwarded);
    CHECK(n.state_array()[0] == 1);
    // Gate now open for everyone.
    CHECK(n.handle_packet(app_packet(1, 9)) == PacketOutcome::Forwarded);
}

TEST_CASE("OpenPath installs both directions at every traversed node") {
    Kernel k;
    WiseNode a(k, 1, 0, WiseConfig{}, [](Frame) {});
    OpenPathBody op;
    op.path = {0, 1, 2};
    op.flow_id = 5;
    op.flow_src = 0;
    op.flow_dst = 2;

    Frame f;
    f.kind = MsgKind::OpenPath;
    f.dst = 1;
    f.bytes = 48;
    f.body = op;
    int installs = 0;
    a.set_on_install([&](std::uint64_t) { ++installs; });
    a.on_frame(f);
    k.run_until(SimTime::from_s(1));
    CHECK(installs == 1);
    CHECK(a.table().size() == 2); // toward 2 and back toward 0
    std::vector<std::uint8_t> state(16, 0);
    auto* toward_dst = a.table().first_match(0, 2, MsgKind::AppData, state, k.now());
    REQUIRE(toward_dst);
    CHECK(toward_dst->rule.next_hop == 2);
    auto* toward_src = a.table().first_match(2, 0, MsgKind::AppData, state, k.now());
    REQUIRE(toward_src);
    CHECK(toward_src->rule.next_hop == 0);
}
