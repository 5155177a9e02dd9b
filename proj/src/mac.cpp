#include "meshsim/mac.hpp"

#include <algorithm>

namespace meshsim {

double energy_mJ(const EnergyLedger& l) {
    double tx_s = l.tx_time.seconds();
    double rx_s = l.rx_time.seconds();
    double listen_s = l.listen_time.seconds();
    // mA * V = mW; mW * s = mJ.
    return l.voltage_v * (l.tx_current_mA * tx_s + l.rx_current_mA * rx_s +
                          l.listen_current_mA * listen_s);
}

void Mac::start() {
    if (!rdc_.strobe_enabled) return;
    SimTime first = wake_phase(id_);
    kernel_->schedule(kernel_->now() + first, [this]() { rdc_wakeup(); });
}

void Mac::rdc_wakeup() {
    ledger_.listen_time += rdc_.listen_window;
    kernel_->schedule_in(wake_interval(), [this]() { rdc_wakeup(); });
}

SimTime Mac::wake_phase(NodeId node) const {
    std::uint64_t s = 0x5eed0000ULL + node;
    return SimTime{static_cast<std::int64_t>(splitmix64(s) %
                                             static_cast<std::uint64_t>(wake_interval().us))};
}

SimTime Mac::next_wake(NodeId node, SimTime now) const {
    std::int64_t interval = wake_interval().us;
    std::int64_t phase = wake_phase(node).us;
    std::int64_t k = (now.us - phase + interval - 1) / interval;
    if (k < 0) k = 0;
    return SimTime{phase + k * interval};
}

Mac::SendResult Mac::send(Frame frame) {
    if (static_cast<int>(queue_.size()) >= cfg_.queue_capacity) {
        ++counters_.queue_full_drops;
        return SendResult::QueueFull;
    }
    frame.link_src = id_;
    queue_.push_back(std::move(frame));
    if (!busy_) start_next();
    return SendResult::Accepted;
}

void Mac::start_next() {
    if (queue_.empty()) {
        busy_ = false;
        return;
    }
    busy_ = true;
    current_ = std::move(queue_.front());
    queue_.pop_front();
    kernel_->schedule_in(cfg_.turnaround, [this]() { attempt(0, 0, 0); });
}

void Mac::attempt(int attempt_no, int cca_backoffs, int backoff_exp,
                  bool wake_aligned) {
    // Phase-locked strobing: the sender knows the receiver's wake phase and
    // sleeps until just before the wake moment instead of strobing through
    // the whole interval; only a short burst spanning the receiver's check
    // window goes on the air. The random lead-in decorrelates senders that
    // target the same receiver, letting CCA serialize them.
    if (rdc_.strobe_enabled && current_.link_dst != kBroadcast && !wake_aligned) {
        SimTime wake = next_wake(current_.link_dst, kernel_->now());
        std::int64_t lead = static_cast<std::int64_t>(
            rng_.next_below(static_cast<std::uint64_t>(rdc_.listen_window.us)));
        SimTime wait{wake.us - lead - kernel_->now().us};
        if (wait.us > 0) {
            kernel_->schedule_in(wait, [this, attempt_no, cca_backoffs, backoff_exp]() {
                attempt(attempt_no, cca_backoffs, backoff_exp, true);
            });
            return;
        }
    }

    // Clear-channel assessment with exponential backoff. With duty cycling
    // on, a busy channel usually means a neighbor is mid-strobe, so the
    // backoff timebase is the wake interval (as in Contiki's CSMA layer):
    // sub-millisecond backoffs would all land inside the same strobe train
    // and exhaust the attempt budget against a single transmission.
    if (medium_->channel_busy_near(id_)) {
        SimTime unit = rdc_.strobe_enabled ? wake_interval() : cfg_.backoff_unit;
        bool realign = rdc_.strobe_enabled;
        if (cca_backoffs >= cfg_.max_cca_backoffs) {
            // Channel access failure consumes one retry.
            if (attempt_no >= cfg_.max_retries) {
                fail_current(true);
            } else {
                ++counters_.retries;
                kernel_->schedule_in(unit,
                                     [this, attempt_no]() { attempt(attempt_no + 1, 0, 0); });
            }
            return;
        }
        int be = std::clamp(backoff_exp + 1, cfg_.min_backoff_exponent,
                            cfg_.max_backoff_exponent);
        int slot_bits = rdc_.strobe_enabled ? std::min(cca_backoffs + 1, 2) : be;
        std::int64_t slots = rng_.next_below(1ULL << slot_bits) + 1;
        kernel_->schedule_in(SimTime{unit.us * slots},
                             [this, attempt_no, cca_backoffs, be, realign]() {
                                 attempt(attempt_no, cca_backoffs + 1, be, !realign);
                             });
        return;
    }

    SimTime airtime = medium_->airtime(current_.bytes);
    SimTime occupancy = airtime;
    if (rdc_.strobe_enabled) {
        if (current_.link_dst != kBroadcast) {
            // Short strobe burst spanning the receiver's listen window.
            occupancy = airtime + rdc_.listen_window;
        } else {
            // Broadcast strobes across a full wake interval so every
            // neighbor's check window sees a copy.
            occupancy = wake_interval();
        }
        if (occupancy > wake_interval())
            occupancy = std::max(airtime, wake_interval());
    }
    do_transmit(attempt_no, occupancy);
}

void Mac::do_transmit(int attempt_no, SimTime occupancy) {
    ledger_.tx_time += occupancy;
    ++counters_.frames_sent;
    bool unicast = current_.link_dst != kBroadcast;
    NodeId dest = current_.link_dst;
    // Only the final strobe copy — the one the awake receiver decodes — is
    // exposed to collisions; earlier copies only matter for carrier sense.
    medium_->transmit(id_, current_, occupancy,
                      [this, unicast, dest, attempt_no](const std::vector<TransmissionOutcome>& outs) {
        if (!unicast) {
            succeed_current();
            return;
        }
        bool delivered = false;
        for (const auto& o : outs)
            if (o.receiver == dest && o.result == RxResult::Delivered) delivered = true;
        if (delivered) {
            succeed_current();
        } else if (attempt_no >= cfg_.max_retries) {
            fail_current(false);
        } else {
            ++counters_.retries;
            int be = std::min(cfg_.min_backoff_exponent + attempt_no,
                              cfg_.max_backoff_exponent);
            std::int64_t slots = rng_.next_below(1ULL << be) + 1;
            kernel_->schedule_in(SimTime{cfg_.backoff_unit.us * slots},
                                 [this, attempt_no]() { attempt(attempt_no + 1, 0, 0); });
        }
    }, medium_->airtime(current_.bytes));
}

void Mac::fail_current(bool channel_access) {
    if (channel_access)
        ++counters_.channel_access_drops;
    else
        ++counters_.link_drops;
    last_fail_channel_access_ = channel_access;
    Frame f = std::move(current_);
    start_next();
    if (send_done_) send_done_(f, false);
}

void Mac::succeed_current() {
    Frame f = std::move(current_);
    start_next();
    if (send_done_) send_done_(f, true);
}

void Mac::handle_delivery(const Frame& frame) {
    if (frame.link_dst != id_ && frame.link_dst != kBroadcast) return;
    ledger_.rx_time += medium_->airtime(frame.bytes);
    ++counters_.frames_received;
    if (receive_) receive_(frame);
}

void Mac::finalize(SimTime elapsed) {
    if (!rdc_.strobe_enabled) {
        SimTime listen = elapsed - ledger_.tx_time - ledger_.rx_time;
        ledger_.listen_time = listen.us > 0 ? listen : SimTime{0};
    }
}

} // namespace meshsim
