#include <doctest.h>

#include <algorithm>
#include <queue>

#include "meshsim/scenario.hpp"

using namespace meshsim;

TEST_CASE("minimal scenario gets all documented defaults") {
    auto c = parse_scenario("[topology]\nkind = grid\nn = 50\n[stack]\nkind = usdn\n");
    CHECK(c.topology.spacing_m == 20.0);
    CHECK(c.medium.tx_range_m == 50.0);
    CHECK(c.medium.link_quality == 0.9);
    CHECK(c.medium.distance_loss);
    CHECK(c.mac.max_retries == 3);
    CHECK(c.mac.queue_capacity == 8);
    CHECK(c.rdc.channel_check_rate_hz == 8.0);
    CHECK(c.rpl.route_lifetime == SimTime::from_s(300));
    CHECK(c.usdn.flowtable_lifetime == SimTime::from_s(300));
    CHECK(c.wise.beacon_period == SimTime::from_s(5));
    CHECK(c.placement.kind == PlacementKind::Embedded);
    CHECK(c.placement.service_time == SimTime::from_ms(8));
    CHECK(c.duration == SimTime::from_s(300));
    CHECK(c.repetitions == 50);
    CHECK(c.traffic.bit_rate_bps == 9.0);
    CHECK_FALSE(c.weighted_routes);
}

TEST_CASE("external placement defaults to a 1 ms service time") {
    auto c = parse_scenario(
        "[topology]\nkind = grid\nn = 9\n[stack]\nkind = usdn\n"
        "[controller]\nplacement = external\n");
    CHECK(c.placement.service_time == SimTime::from_ms(1));
    CHECK(c.placement.backhaul_delay == SimTime::from_ms(2));
}

TEST_CASE("validation reports every violation, not just the first") {
    auto c = parse_scenario("[topology]\nkind = grid\nn = 50\n");
    c.topology.n = 1;
    c.repetitions = 0;
    c.traffic.bit_rate_bps = -3;
    auto errs = validate_scenario(c);
    CHECK(errs.size() >= 3);
    bool has_n = false, has_reps = false, has_rate = false;
    for (const auto& e : errs) {
        has_n |= e.find("n") != std::string::npos;
        has_reps |= e.find("repetitions") != std::string::npos;
        has_rate |= e.find("bit_rate") != std::string::npos;
    }
    CHECK(has_n);
    CHECK(has_reps);
    CHECK(has_rate);
}

TEST_CASE("n=1 grid fails to parse with a field diagnostic") {
    CHECK_THROWS_AS(parse_scenario("[topology]\nkind = grid\nn = 1\n"),
                    ScenarioError);
    try {
        parse_scenario("[topology]\nkind = grid\nn = 1\n");
    } catch (const ScenarioError& e) {
        REQUIRE(e.errors.size() >= 1);
        CHECK(e.errors[0].find("n") != std::string::npos);
    }
}

TEST_CASE("serialize/parse round trip is the identity") {
    auto c = parse_scenario(
        "[scenario]\nid = paper-replica\nduration_s = 300\nrepetitions = 50\n"
        "[topology]\nkind = grid\nn = 50\nspacing_m = 20\n"
        "[stack]\nkind = usdn\n"
        "[medium]\nlink_quality = 0.9\ntx_range_m = 50\n"
        "[controller]\nplacement = external\nbackhaul_delay_ms = 2\n"
        "[traffic]\nbit_rate_bps = 9\nflow_request_rate = 25\n"
        "[faults]\nfail = 150 4\n");
    auto text = serialize_scenario(c);
    auto c2 = parse_scenario(text);
    CHECK(serialize_scenario(c2) == text);
    CHECK(scenario_hash(c2) == scenario_hash(c));
    CHECK(c2.id == "paper-replica");
    CHECK(c2.faults.size() == 1);
    CHECK(c2.faults[0].at == SimTime::from_s(150));
    CHECK(c2.faults[0].fail_links == 4);
}

TEST_CASE("grid(4, 20 m) lattice positions") {
    TopologySpec t;
    t.kind = TopologySpec::Kind::Grid;
    t.n = 4;
    t.spacing_m = 20.0;
    auto pos = generate_topology(t, MediumConfig{});
    REQUIRE(pos.size() == 4);
    CHECK(pos[0].x == 0.0);
    CHECK(pos[0].y == 0.0);
    CHECK(pos[1].x == 20.0);
    CHECK(pos[1].y == 0.0);
    CHECK(pos[2].x == 0.0);
    CHECK(pos[2].y == 20.0);
    CHECK(pos[3].x == 20.0);
    CHECK(pos[3].y == 20.0);
}

namespace {

bool connected(const std::vector<NodePosition>& pos, double range) {
    std::vector<bool> seen(pos.size(), false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t found = 1;
    while (!q.empty()) {
        auto cur = q.front();
        q.pop();
        for (std::size_t j = 0; j < pos.size(); ++j) {
            if (seen[j]) continue;
            double dx = pos[cur].x - pos[j].x, dy = pos[cur].y - pos[j].y;
            if (dx * dx + dy * dy <= range * range) {
                seen[j] = true;
                ++found;
                q.push(j);
            }
        }
    }
    return found == pos.size();
}

} // namespace

TEST_CASE("topology generation properties") {
    MediumConfig medium;

    SUBCASE("50-node grid at 20 m spacing is connected") {
        TopologySpec t;
        t.n = 50;
        auto pos = generate_topology(t, medium);
        CHECK(connected(pos, medium.tx_range_m));
    }

    SUBCASE("random layouts are seeded-deterministic and connected") {
        TopologySpec t;
        t.kind = TopologySpec::Kind::Random;
        t.n = 50;
        t.area_m = 300.0;
        t.seed = 7;
        auto a = generate_topology(t, medium);
        auto b = generate_topology(t, medium);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].x == b[i].x);
            CHECK(a[i].y == b[i].y);
        }
        CHECK(connected(a, medium.tx_range_m));
    }

    SUBCASE("chain runs along one axis") {
        TopologySpec t;
        t.kind = TopologySpec::Kind::Chain;
        t.n = 5;
        t.spacing_m = 30.0;
        auto pos = generate_topology(t, medium);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(pos[i].x == 30.0 * static_cast<double>(i));
            CHECK(pos[i].y == 0.0);
        }
    }
}

TEST_CASE("unparseable values produce field diagnostics") {
    try {
        parse_scenario("[topology]\nkind = blob\nn = many\n[mac]\nmax_retries = -2\n");
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(e.errors.size() >= 2);
    }
}
