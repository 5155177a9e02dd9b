#include <doctest.h>

#include <cmath>
#include <vector>

#include "meshsim/medium.hpp"
#include "meshsim/scenario.hpp"

using namespace meshsim;

TEST_CASE("reception probability: UDGM with distance loss") {
    MediumConfig cfg; // q = 0.9, R = 50 m
    CHECK(reception_probability(0.0, cfg) == doctest::Approx(0.9));
    CHECK(reception_probability(51.0, cfg) == 0.0);
    CHECK(reception_probability(25.0, cfg) == doctest::Approx(0.675));

    SUBCASE("flat quality with distance loss off") {
        cfg.distance_loss = false;
        CHECK(reception_probability(49.0, cfg) == doctest::Approx(0.9));
        CHECK(reception_probability(51.0, cfg) == 0.0);
    }

    SUBCASE("non-increasing in distance, zero beyond range") {
        double prev = 1.0;
        for (double d = 0.0; d <= 60.0; d += 0.5) {
            double p = reception_probability(d, cfg);
            CHECK(p <= prev + 1e-12);
            if (d > 50.0) CHECK(p == 0.0);
            prev = p;
        }
    }
}

namespace {

std::vector<NodeId> brute_force_neighbors(const std::vector<NodePosition>& pos,
                                          NodeId id, double range) {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < pos.size(); ++j) {
        if (j == id) continue;
        double dx = pos[j].x - pos[id].x, dy = pos[j].y - pos[id].y;
        if (std::sqrt(dx * dx + dy * dy) <= range) out.push_back(j);
    }
    return out;
}

} // namespace

TEST_CASE("neighbor sets match the brute-force oracle") {
    Kernel k;

    SUBCASE("50-node grid, 20 m spacing") {
        TopologySpec topo;
        topo.kind = TopologySpec::Kind::Grid;
        topo.n = 50;
        topo.spacing_m = 20.0;
        MediumConfig cfg;
        RadioMedium m(k, cfg, RngStream(1, 0));
        m.set_positions(generate_topology(topo, cfg));
        for (NodeId i = 0; i < 50; ++i) {
            CHECK(m.neighbors(i) ==
                  brute_force_neighbors(m.positions(), i, cfg.tx_range_m));
        }
        // Interior node: 4-neighborhood at 20 m plus diagonals at 28.3 m
        // plus the straight two-step nodes at 40 m are all within 50 m.
        auto nb = m.neighbors(10); // row 1, col 3 of a 7-wide grid
        CHECK(nb.size() >= 8);
    }

    SUBCASE("50-node random layout") {
        TopologySpec topo;
        topo.kind = TopologySpec::Kind::Random;
        topo.n = 50;
        topo.area_m = 300.0;
        topo.seed = 7;
        MediumConfig cfg;
        RadioMedium m(k, cfg, RngStream(1, 0));
        m.set_positions(generate_topology(topo, cfg));
        for (NodeId i = 0; i < 50; ++i)
            CHECK(m.neighbors(i) ==
                  brute_force_neighbors(m.positions(), i, cfg.tx_range_m));
    }

    SUBCASE("symmetry and isolation") {
        MediumConfig cfg;
        RadioMedium m(k, cfg, RngStream(1, 0));
        m.set_positions({{0, 0}, {30, 0}, {500, 500}});
        CHECK(m.neighbors(2).empty());
        for (NodeId a = 0; a < 3; ++a)
            for (NodeId b = 0; b < 3; ++b) {
                if (a == b) continue;
                auto na = m.neighbors(a);
                auto nb = m.neighbors(b);
                bool ab = std::find(na.begin(), na.end(), b) != na.end();
                bool ba = std::find(nb.begin(), nb.end(), a) != nb.end();
                CHECK(ab == ba);
            }
    }
}

TEST_CASE("single-node network yields no outcomes") {
    Kernel k;
    MediumConfig cfg;
    RadioMedium m(k, cfg, RngStream(1, 0));
    m.set_positions({{0, 0}});
    Frame f;
    f.kind = MsgKind::Dio;
    f.link_src = 0;
    f.link_dst = kBroadcast;
    f.bytes = 30;
    std::vector<TransmissionOutcome> got;
    m.transmit(0, f, [&](const std::vector<TransmissionOutcome>& o) { got = o; });
    k.run_until(SimTime::from_s(1));
    CHECK(got.empty());
}

TEST_CASE("temporal overlap collides at common receivers, both directions") {
    Kernel k;
    MediumConfig cfg;
    cfg.link_quality = 1.0;
    cfg.distance_loss = false;
    RadioMedium m(k, cfg, RngStream(1, 0));
    // 1 and 2 are both in range of 0; they are also in range of each other,
    // but transmissions are already in flight, so CCA is not in play here.
    m.set_positions({{0, 0}, {-30, 0}, {30, 0}});

    Frame f;
    f.kind = MsgKind::AppData;
    f.bytes = 40;
    std::vector<TransmissionOutcome> o1, o2;
    f.link_src = 1;
    f.link_dst = 0;
    m.transmit(1, f, [&](const std::vector<TransmissionOutcome>& o) { o1 = o; });
    f.link_src = 2;
    m.transmit(2, f, [&](const std::vector<TransmissionOutcome>& o) { o2 = o; });
    k.run_until(SimTime::from_s(1));

    auto result_at = [](const std::vector<TransmissionOutcome>& outs, NodeId r) {
        for (const auto& o : outs)
            if (o.receiver == r) return o.result;
        return RxResult::OutOfRange;
    };
    CHECK(result_at(o1, 0) == RxResult::LostCollision);
    CHECK(result_at(o2, 0) == RxResult::LostCollision);
    CHECK(m.collision_count() >= 2);
}

TEST_CASE("non-overlapping transmissions deliver with q=1") {
    Kernel k;
    MediumConfig cfg;
    cfg.link_quality = 1.0;
    cfg.distance_loss = false;
    RadioMedium m(k, cfg, RngStream(1, 0));
    m.set_positions({{0, 0}, {30, 0}});
    Frame f;
    f.kind = MsgKind::AppData;
    f.link_src = 1;
    f.link_dst = 0;
    f.bytes = 40;
    int delivered = 0;
    for (int i = 0; i < 5; ++i) {
        k.schedule(SimTime::from_ms(10 * i), [&, f] {
            m.transmit(1, f, [&](const std::vector<TransmissionOutcome>& o) {
                for (const auto& out : o)
                    delivered += out.result == RxResult::Delivered;
            });
        });
    }
    k.run_until(SimTime::from_s(1));
    CHECK(delivered == 5);
    CHECK(m.collision_count() == 0);
}

TEST_CASE("failed links never deliver; airtime arithmetic") {
    Kernel k;
    MediumConfig cfg;
    cfg.link_quality = 1.0;
    cfg.distance_loss = false;
    RadioMedium m(k, cfg, RngStream(1, 0));
    m.set_positions({{0, 0}, {30, 0}});
    m.fail_link(0, 1);
    CHECK(m.link_failed(1, 0));
    Frame f;
    f.kind = MsgKind::AppData;
    f.link_src = 1;
    f.link_dst = 0;
    f.bytes = 40;
    std::vector<TransmissionOutcome> got;
    m.transmit(1, f, [&](const std::vector<TransmissionOutcome>& o) { got = o; });
    k.run_until(SimTime::from_s(1));
    REQUIRE(got.size() == 1);
    CHECK(got[0].result != RxResult::Delivered);

    // 32 bytes at 250 kbit/s = 1024 us.
    CHECK(m.airtime(32) == SimTime::from_us(1024));
    m.restore_link(0, 1);
    CHECK_FALSE(m.link_failed(0, 1));
}

TEST_CASE("channel occupancy extends contention to the strobe train") {
    Kernel k;
    MediumConfig cfg;
    cfg.link_quality = 1.0;
    cfg.distance_loss = false;
    RadioMedium m(k, cfg, RngStream(1, 0));
    m.set_positions({{0, 0}, {30, 0}, {60, 0}});
    Frame f;
    f.kind = MsgKind::AppData;
    f.link_src = 0;
    f.link_dst = 1;
    f.bytes = 40;
    m.transmit(0, f, SimTime::from_ms(100), nullptr);
    k.run_until(SimTime::from_ms(50));
    CHECK(m.channel_busy_near(1));
    k.run_until(SimTime::from_ms(101));
    CHECK_FALSE(m.channel_busy_near(1));
}
