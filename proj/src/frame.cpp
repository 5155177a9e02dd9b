#include "meshsim/frame.hpp"

namespace meshsim {

const char* msg_kind_name(MsgKind k) {
    switch (k) {
        case MsgKind::Dio: return "DIO";
        case MsgKind::Dis: return "DIS";
        case MsgKind::Dao: return "DAO";
        case MsgKind::Ftq: return "FTQ";
        case MsgKind::Fts: return "FTS";
        case MsgKind::Nsu: return "NSU";
        case MsgKind::Conf: return "CONF";
        case MsgKind::NoRoute: return "NO_ROUTE";
        case MsgKind::LinkFail: return "LINK_FAIL";
        case MsgKind::DevCtl: return "DEV_CTL";
        case MsgKind::WiseBeacon: return "WISE_BEACON";
        case MsgKind::WiseJoin: return "WISE_JOIN";
        case MsgKind::Config: return "CONFIG";
        case MsgKind::OpenPath: return "OPEN_PATH";
        case MsgKind::Request: return "REQUEST";
        case MsgKind::Response: return "RESPONSE";
        case MsgKind::Report: return "REPORT";
        case MsgKind::AppData: return "APP";
    }
    return "?";
}

bool is_control_kind(MsgKind k) {
    return k != MsgKind::AppData;
}

} // namespace meshsim
