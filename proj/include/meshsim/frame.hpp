#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "meshsim/time.hpp"

namespace meshsim {

using NodeId = std::uint16_t;
constexpr NodeId kNoNode = 0xffff;
constexpr NodeId kBroadcast = 0xfffe;

// Source routing header: explicit hop list with a cursor to the next hop.
struct Srh {
    std::vector<NodeId> hops;
    std::size_t cursor = 0;
};

enum class MsgKind : std::uint8_t {
    // RPL control
    Dio, Dis, Dao,
    // uSDN control
    Ftq, Fts, Nsu, Conf, NoRoute, LinkFail, DevCtl,
    // SDN-WISE control
    WiseBeacon, WiseJoin, Config, OpenPath, Request, Response, Report,
    // data plane
    AppData,
};

const char* msg_kind_name(MsgKind k);
bool is_control_kind(MsgKind k);

// Data-plane verdict for one packet at one node.
enum class PacketOutcome : std::uint8_t {
    Forwarded,
    QueuedPendingRule,
    Delivered,
    Dropped,
};

struct LinkQuality {
    NodeId neighbor = kNoNode;
    double quality = 0.0;
};

struct DioBody {
    std::uint32_t rank = 0;
    std::uint32_t version = 0;
    std::uint8_t objective_function = 0;
};

struct DaoBody {
    NodeId node = kNoNode;
    NodeId parent = kNoNode;
    SimTime lifetime{0};
};

struct FtqBody {
    // Digest of the unmatched packet, not the packet itself.
    NodeId src = kNoNode;
    NodeId dst = kNoNode;
    std::uint64_t flow_id = 0;
    std::uint64_t query_id = 0;
};

struct FlowRule {
    // uSDN flow entry as carried in an FTS.
    std::optional<NodeId> match_src;
    std::optional<NodeId> match_dst;
    std::optional<std::uint64_t> match_flow;
    enum class Action : std::uint8_t { ForwardSrh, ForwardNextHop, ToController, Drop };
    Action action = Action::Drop;
    std::vector<NodeId> srh_route;
    NodeId next_hop = kNoNode;
    int priority = 0;
    SimTime lifetime{-1}; // < 0: use the table's default lifetime
    bool refreshable = true;
};

struct FtsBody {
    std::uint64_t query_id = 0;
    std::vector<FlowRule> rules;
};

struct NsuBody {
    double residual_energy_mJ = 0.0;
    std::vector<LinkQuality> neighbors;
    int queue_occupancy = 0;
};

struct ConfBody {
    SimTime nsu_period{0};
    SimTime flowtable_lifetime{0};
    std::vector<FlowRule> default_rules;
};

struct LinkFailBody {
    NodeId a = kNoNode;
    NodeId b = kNoNode;
};

struct WiseBeaconBody {
    std::uint32_t hop_distance = 0;
    double quality = 0.0;
};

struct WiseJoinBody {
    NodeId node = kNoNode;
    NodeId next_hop = kNoNode;
};

// SDN-WISE match window: up to three per entry, all must hold.
struct WiseWindow {
    enum class Field : std::uint8_t { Src, Dst, Type, StateByte };
    enum class Rel : std::uint8_t { Eq, Ne, Lt, Gt };
    Field field = Field::Dst;
    Rel rel = Rel::Eq;
    int operand_index = 0; // state byte index when field == StateByte
    int value = 0;
};

struct WiseRule {
    std::vector<WiseWindow> windows; // 1..3
    enum class Action : std::uint8_t { Forward, Drop, ModifyState, ToController };
    Action action = Action::Forward;
    NodeId next_hop = kNoNode;
    int state_index = 0;
    int state_value = 0;
    SimTime ttl{0};
};

struct ConfigBody {
    std::vector<NodeId> accepted_ids;
    SimTime report_period{0};
    SimTime table_ttl{0};
};

struct OpenPathBody {
    // Full path; each traversed node installs forward entries for both
    // directions of its path segment.
    std::vector<NodeId> path;
    std::uint64_t flow_id = 0;
    std::uint64_t query_id = 0;
    NodeId flow_src = kNoNode;
    NodeId flow_dst = kNoNode;
};

struct RequestBody {
    NodeId src = kNoNode;
    NodeId dst = kNoNode;
    std::uint64_t flow_id = 0;
    std::uint64_t query_id = 0;
};

struct ResponseBody {
    std::uint64_t query_id = 0;
    std::uint64_t flow_id = 0;
    std::vector<WiseRule> rules;
    // Remaining descent path for per-hop delivery.
    std::vector<NodeId> route;
};

struct ReportBody {
    double battery_mJ = 0.0;
    double x = 0.0, y = 0.0;
    std::vector<LinkQuality> neighbors;
};

struct AppBody {
    std::uint64_t flow_id = 0;
    std::uint64_t packet_id = 0;
};

struct DevCtlBody {
    bool power_on = true;
};

using MsgBody = std::variant<std::monostate, DioBody, DaoBody, FtqBody, FtsBody,
                             NsuBody, ConfBody, LinkFailBody, WiseBeaconBody,
                             WiseJoinBody, ConfigBody, OpenPathBody, RequestBody,
                             ResponseBody, ReportBody, AppBody, DevCtlBody>;

// On-air unit. link_src/link_dst are per-hop; origin/dst are end to end.
struct Frame {
    MsgKind kind = MsgKind::AppData;
    NodeId link_src = kNoNode;
    NodeId link_dst = kNoNode;
    NodeId origin = kNoNode;
    NodeId dst = kNoNode;
    int bytes = 0;
    std::optional<Srh> srh;
    MsgBody body;
    SimTime created{0};
};

} // namespace meshsim
