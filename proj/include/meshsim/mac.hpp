#pragma once

#include <cstdint>
#include <deque>
#include <functional>

#include "meshsim/frame.hpp"
#include "meshsim/kernel.hpp"
#include "meshsim/medium.hpp"
#include "meshsim/rng.hpp"

namespace meshsim {

struct MacConfig {
    int max_retries = 3;
    SimTime backoff_unit{320}; // us
    int min_backoff_exponent = 3; // 802.15.4 macMinBE
    int max_backoff_exponent = 5;
    int queue_capacity = 8;
    int max_cca_backoffs = 5;
    SimTime turnaround{192}; // inter-frame spacing, us
    int ack_bytes = 11;      // acks are instantaneous-airtime frames
};

struct RdcConfig {
    double channel_check_rate_hz = 8.0;
    bool strobe_enabled = true;
    SimTime listen_window{2000}; // per channel check, us
};

struct EnergyLedger {
    SimTime tx_time{0};
    SimTime rx_time{0};
    SimTime listen_time{0};
    double tx_current_mA = 17.4;     // CC2420-class defaults
    double rx_current_mA = 18.8;
    double listen_current_mA = 18.8;
    double voltage_v = 3.0;
};

// E = V * sum(I_state * t_state), in millijoules.
double energy_mJ(const EnergyLedger& ledger);

struct MacCounters {
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t queue_full_drops = 0;
    std::uint64_t link_drops = 0;           // retries exhausted by missing acks
    std::uint64_t channel_access_drops = 0; // retries exhausted by busy channel
    std::uint64_t retries = 0;
};

// CSMA/CA link layer with a duty-cycled radio (ContikiMAC-style RDC) and an
// energy ledger. Unicast success requires link-layer ack; failure after
// max_retries is reported upward as a link drop.
class Mac {
public:
    enum class SendResult { Accepted, QueueFull };

    using ReceiveFn = std::function<void(const Frame&)>;
    using SendDoneFn = std::function<void(const Frame&, bool ok)>;

    Mac(Kernel& kernel, RadioMedium& medium, NodeId id, MacConfig cfg,
        RdcConfig rdc, RngStream rng)
        : kernel_(&kernel), medium_(&medium), id_(id), cfg_(cfg), rdc_(rdc),
          rng_(rng) {}

    NodeId id() const { return id_; }

    void set_receive(ReceiveFn fn) { receive_ = std::move(fn); }
    void set_send_done(SendDoneFn fn) { send_done_ = std::move(fn); }

    // Starts the RDC wakeup cycle (when strobing is enabled).
    void start();

    SendResult send(Frame frame);

    // Entry point from the medium for successfully decoded frames.
    void handle_delivery(const Frame& frame);

    // Always-on accounting: listen = elapsed - tx - rx. Call once at run end.
    void finalize(SimTime elapsed);

    EnergyLedger& ledger() { return ledger_; }
    const EnergyLedger& ledger() const { return ledger_; }
    const MacCounters& counters() const { return counters_; }
    // True when the most recent send-done failure was a clear-channel
    // assessment exhaustion (local congestion) rather than a missing ack;
    // congestion says nothing about the link itself.
    bool last_fail_channel_access() const { return last_fail_channel_access_; }
    int queue_occupancy() const {
        return static_cast<int>(queue_.size()) + (busy_ ? 1 : 0);
    }

    const RdcConfig& rdc() const { return rdc_; }

    SimTime wake_interval() const {
        return SimTime::from_seconds(1.0 / rdc_.channel_check_rate_hz);
    }
    // Deterministic per-node wake phase; senders are assumed phase-aware.
    SimTime wake_phase(NodeId node) const;
    SimTime next_wake(NodeId node, SimTime now) const;

private:
    void start_next();
    void attempt(int attempt_no, int cca_backoffs, int backoff_exp,
                 bool wake_aligned = false);
    void do_transmit(int attempt_no, SimTime occupancy);
    void fail_current(bool channel_access);
    void succeed_current();
    void rdc_wakeup();

    Kernel* kernel_;
    RadioMedium* medium_;
    NodeId id_;
    MacConfig cfg_;
    RdcConfig rdc_;
    RngStream rng_;
    EnergyLedger ledger_;
    MacCounters counters_;
    ReceiveFn receive_;
    SendDoneFn send_done_;

    std::deque<Frame> queue_;
    bool busy_ = false;
    bool last_fail_channel_access_ = false;
    Frame current_;
};

} // namespace meshsim
