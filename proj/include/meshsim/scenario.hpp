#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshsim/controller.hpp"
#include "meshsim/mac.hpp"
#include "meshsim/medium.hpp"
#include "meshsim/rpl.hpp"
#include "meshsim/usdn.hpp"
#include "meshsim/wise.hpp"

namespace meshsim {

struct TopologySpec {
    enum class Kind { Grid, Chain, Random } kind = Kind::Grid;
    int n = 50;
    double spacing_m = 20.0;
    double area_m = 300.0; // square side for random placement
    std::uint64_t seed = 1;
};

struct EnergyParams {
    double tx_current_mA = 17.4;
    double rx_current_mA = 18.8;
    double listen_current_mA = 18.8;
    double voltage_v = 3.0;
};

struct TrafficSpec {
    double bit_rate_bps = 9.0; // per-source application ceiling
    int payload_bytes = 16;
    int frame_overhead_bytes = 21;
    double flow_request_rate = 0.0; // aggregate new flows per second
    enum class Sources { AllNonSink, HopDistance, Count } sources = Sources::AllNonSink;
    int hop_distance = 0; // when sources == HopDistance
    int source_count = 0; // when sources == Count
    bool exponential_arrivals = false;
    SimTime start = SimTime::from_s(30);
};

struct FaultSpec {
    SimTime at{0};
    int fail_links = 0;
};

struct ScenarioConfig {
    std::string id = "scenario";
    TopologySpec topology;
    StackKind stack = StackKind::Usdn;
    WiseInstallMode wise_mode = WiseInstallMode::OpenPath;
    MediumConfig medium;
    MacConfig mac;
    RdcConfig rdc;
    EnergyParams energy;
    RplConfig rpl;
    UsdnConfig usdn;
    WiseConfig wise;
    ControllerPlacement placement;
    bool weighted_routes = false; // inverse-link-quality route weights
    SimTime duration = SimTime::from_s(300);
    TrafficSpec traffic;
    std::vector<FaultSpec> faults;
    int repetitions = 50;
    std::uint64_t base_seed = 1;
};

struct ScenarioError : std::runtime_error {
    explicit ScenarioError(std::vector<std::string> errs);
    std::vector<std::string> errors;
};

// Parses the line-oriented scenario format. Reports every violated
// invariant, not just the first. MESHSIM_BASE_SEED overrides base_seed.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text);
std::string serialize_scenario(const ScenarioConfig& cfg);

// Collects validation diagnostics; empty means valid.
std::vector<std::string> validate_scenario(const ScenarioConfig& cfg);

// Grid/chain lattice or seeded random placement (resampled until the
// neighbor graph is connected; throws after 1000 attempts).
std::vector<NodePosition> generate_topology(const TopologySpec& topo,
                                            const MediumConfig& medium);

// FNV-1a hash of the serialized scenario, for run manifests.
std::uint64_t scenario_hash(const ScenarioConfig& cfg);

} // namespace meshsim
