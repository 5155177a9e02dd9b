#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <vector>

#include "meshsim/medium.hpp"
#include "meshsim/rpl.hpp"
#include "meshsim/scenario.hpp"

using namespace meshsim;

namespace {

// Lossless instant-ish link layer over a fixed adjacency: frames reach every
// neighbor (broadcast) or the addressed neighbor after 1 ms.
struct Dodag {
    Kernel kernel;
    std::vector<std::unique_ptr<RplNode>> nodes;
    std::vector<std::vector<NodeId>> adj;

    explicit Dodag(const std::vector<NodePosition>& pos, double range = 50.0,
                   RplConfig cfg = {}) {
        adj.resize(pos.size());
        for (NodeId a = 0; a < pos.size(); ++a)
            for (NodeId b = 0; b < pos.size(); ++b) {
                if (a == b) continue;
                double dx = pos[a].x - pos[b].x, dy = pos[a].y - pos[b].y;
                if (std::sqrt(dx * dx + dy * dy) <= range) adj[a].push_back(b);
            }
        for (NodeId i = 0; i < pos.size(); ++i) {
            nodes.push_back(std::make_unique<RplNode>(
                kernel, i, 0, cfg, RngStream(1, i),
                [this, i](Frame f) { deliver(i, f); }));
        }
    }

    void deliver(NodeId from, Frame f) {
        f.link_src = from;
        kernel.schedule_in(SimTime::from_ms(1), [this, from, f] {
            for (NodeId nb : adj[from])
                if (f.link_dst == kBroadcast || f.link_dst == nb)
                    nodes[nb]->on_frame(f);
        });
    }

    void start_all() {
        for (auto& n : nodes) n->start();
    }

    std::vector<int> bfs_depths() const {
        std::vector<int> depth(adj.size(), -1);
        std::queue<NodeId> q;
        depth[0] = 0;
        q.push(0);
        while (!q.empty()) {
            NodeId cur = q.front();
            q.pop();
            for (NodeId nb : adj[cur])
                if (depth[nb] < 0) {
                    depth[nb] = depth[cur] + 1;
                    q.push(nb);
                }
        }
        return depth;
    }
};

std::vector<NodePosition> grid(int n, int cols, double spacing) {
    std::vector<NodePosition> pos;
    for (int i = 0; i < n; ++i)
        pos.push_back({spacing * (i % cols), spacing * (i / cols)});
    return pos;
}

} // namespace

TEST_CASE("first DIO: join with rank = increment, parent = root, DAO emitted") {
    Dodag d(grid(2, 2, 30.0));
    d.start_all();
    d.kernel.run_until(SimTime::from_s(30));
    CHECK(d.nodes[1]->joined());
    CHECK(d.nodes[1]->rank() == 256);
    CHECK(d.nodes[1]->preferred_parent() == 0);
    CHECK(d.nodes[0]->root_table().has_route(1, d.kernel.now()));
}

TEST_CASE("equal-rank candidates tie-break to the lowest id") {
    Kernel k;
    std::vector<Frame> out;
    RplNode n(k, 1, 0, RplConfig{}, RngStream(1, 1), [&](Frame f) { out.push_back(f); });
    n.start();
    Frame dio;
    dio.kind = MsgKind::Dio;
    dio.link_dst = kBroadcast;
    dio.bytes = 30;
    dio.body = DioBody{256, 1, 0};
    dio.link_src = 9;
    n.on_frame(dio);
    CHECK(n.preferred_parent() == 9);
    dio.link_src = 4;
    n.on_frame(dio);
    CHECK(n.preferred_parent() == 4);
    CHECK(n.rank() == 512);
}

TEST_CASE("3x3 grid, hop objective: parents lie on BFS shortest paths") {
    Dodag d(grid(9, 3, 20.0));
    d.start_all();
    d.kernel.run_until(SimTime::from_s(60));
    auto depth = d.bfs_depths();
    for (NodeId i = 1; i < 9; ++i) {
        REQUIRE(d.nodes[i]->joined());
        NodeId p = d.nodes[i]->preferred_parent();
        CHECK(depth[p] == depth[i] - 1); // parent one BFS level closer
        CHECK(d.nodes[i]->rank() ==
              static_cast<std::uint32_t>(depth[i]) * 256);
    }
}

TEST_CASE("DODAG acyclicity: rank strictly decreases along parent edges") {
    Dodag d(grid(12, 4, 20.0));
    d.start_all();
    d.kernel.run_until(SimTime::from_s(60));
    for (NodeId i = 1; i < 12; ++i) {
        REQUIRE(d.nodes[i]->joined());
        NodeId p = d.nodes[i]->preferred_parent();
        CHECK(d.nodes[p]->rank() < d.nodes[i]->rank());
    }
}

TEST_CASE("un-joined nodes ignore DIS; joined neighbors answer") {
    Dodag d(grid(2, 2, 30.0));
    // Only node 1 starts: it is not joined, so its DIS draws no DIO and it
    // stays out of the DODAG.
    d.nodes[1]->start();
    d.kernel.run_until(SimTime::from_s(30));
    CHECK_FALSE(d.nodes[1]->joined());
    // Now the root comes up; the next DIS gets answered.
    d.nodes[0]->start();
    d.kernel.run_until(SimTime::from_s(60));
    CHECK(d.nodes[1]->joined());
}

TEST_CASE("root route table expiry and refresh") {
    RootRouteTable t(0);
    SimTime lifetime = SimTime::from_s(300);

    SUBCASE("entry absent just past its lifetime") {
        CHECK(t.register_dao(1, 0, SimTime::from_s(0), lifetime));
        CHECK(t.has_route(1, SimTime::from_s(300)));
        CHECK_FALSE(t.has_route(1, SimTime::from_s(301)));
        CHECK_FALSE(t.source_route(1, SimTime::from_s(301)).has_value());
    }

    SUBCASE("refresh extends expiry") {
        t.register_dao(1, 0, SimTime::from_s(0), lifetime);
        t.register_dao(1, 0, SimTime::from_s(200), lifetime);
        CHECK(t.has_route(1, SimTime::from_s(500)));
        CHECK_FALSE(t.has_route(1, SimTime::from_s(501)));
    }

    SUBCASE("cyclic registration is rejected and counted") {
        CHECK(t.register_dao(1, 2, SimTime::from_s(0), lifetime));
        CHECK_FALSE(t.register_dao(2, 1, SimTime::from_s(0), lifetime));
        CHECK(t.cycle_rejections() == 1);
    }
}

TEST_CASE("source routes reverse parent pointers") {
    RootRouteTable t(0);
    SimTime lt = SimTime::from_s(300);
    SimTime now{0};

    SUBCASE("dest = root is the identity route") {
        auto r = t.source_route(0, now);
        REQUIRE(r.has_value());
        CHECK(*r == std::vector<NodeId>{0});
    }

    SUBCASE("chain root-A-B") {
        t.register_dao(1, 0, now, lt); // A
        t.register_dao(2, 1, now, lt); // B
        auto r = t.source_route(2, now);
        REQUIRE(r.has_value());
        CHECK(*r == std::vector<NodeId>{0, 1, 2});
        CHECK(t.parent_of(2, now) == 1);
    }

    SUBCASE("unknown destination") {
        CHECK_FALSE(t.source_route(42, now).has_value());
    }
}

TEST_CASE("parent link failure drops the candidate and reselects") {
    Kernel k;
    RplNode n(k, 5, 0, RplConfig{}, RngStream(1, 5), [](Frame) {});
    n.start();
    Frame dio;
    dio.kind = MsgKind::Dio;
    dio.link_dst = kBroadcast;
    dio.bytes = 30;
    dio.body = DioBody{0, 1, 0};
    dio.link_src = 0;
    n.on_frame(dio);
    dio.body = DioBody{256, 1, 0};
    dio.link_src = 2;
    n.on_frame(dio);
    REQUIRE(n.preferred_parent() == 0);
    n.on_parent_link_failed(0);
    CHECK(n.preferred_parent() == 2);
    CHECK(n.rank() == 512);
}

TEST_CASE("ETX objective prefers two good hops over one poor link") {
    Kernel k;
    RplConfig cfg;
    cfg.objective = RplObjective::Etx;
    RplNode n(k, 3, 0, cfg, RngStream(1, 3), [](Frame) {});
    n.note_link_quality(0, 0.2); // direct but bad
    n.note_link_quality(2, 0.9); // via a relay with cost ~1.11
    n.start();
    Frame dio;
    dio.kind = MsgKind::Dio;
    dio.link_dst = kBroadcast;
    dio.bytes = 30;
    dio.body = DioBody{0, 1, 1}; // root advertises cost 0
    dio.link_src = 0;
    n.on_frame(dio);
    CHECK(n.preferred_parent() == 0);
    // Relay at cost 1.11 (advertised as rank 1.11*256 = 284).
    dio.body = DioBody{284, 1, 1};
    dio.link_src = 2;
    n.on_frame(dio);
    // 1.11 + 1/0.9 = 2.22 beats 0 + 1/0.2 = 5.0.
    CHECK(n.preferred_parent() == 2);
}
