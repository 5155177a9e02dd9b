#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>

#include "meshsim/time.hpp"

namespace meshsim {

// Deterministic discrete-event engine. Events are totally ordered by
// (fire_at, seq) where seq is the insertion sequence number, so races
// between same-timestamp events always resolve in scheduling order.
class Kernel {
public:
    struct Handle {
        std::int64_t at_us = -1;
        std::uint64_t seq = 0;
        bool valid() const { return at_us >= 0; }
    };

    // Throws std::invalid_argument when fire_at < now.
    Handle schedule(SimTime fire_at, std::function<void()> action) {
        if (fire_at < now_)
            throw std::invalid_argument("Kernel::schedule: fire_at is in the past");
        Handle h{fire_at.us, next_seq_++};
        queue_.emplace(Key{h.at_us, h.seq}, std::move(action));
        return h;
    }

    Handle schedule_in(SimTime delay, std::function<void()> action) {
        return schedule(now_ + delay, std::move(action));
    }

    // True if the event was still pending and is now removed.
    bool cancel(const Handle& h) {
        if (!h.valid()) return false;
        return queue_.erase(Key{h.at_us, h.seq}) > 0;
    }

    // Processes every event with fire_at <= horizon in (fire_at, seq) order.
    // Returns the number of events processed. The clock ends at the horizon
    // when the queue drains, otherwise at the last processed timestamp.
    std::size_t run_until(SimTime horizon) {
        std::size_t processed = 0;
        while (!queue_.empty()) {
            auto it = queue_.begin();
            if (it->first.at_us > horizon.us) break;
            now_ = SimTime{it->first.at_us};
            digest_ = mix(digest_, static_cast<std::uint64_t>(it->first.at_us),
                          it->first.seq);
            auto action = std::move(it->second);
            queue_.erase(it);
            action();
            ++processed;
        }
        if (queue_.empty() || processed == 0) now_ = horizon;
        return processed;
    }

    SimTime now() const { return now_; }
    bool empty() const { return queue_.empty(); }
    std::size_t pending() const { return queue_.size(); }

    // FNV-style digest over the processed (fire_at, seq) trace; equal-seed
    // runs must produce equal digests.
    std::uint64_t trace_digest() const { return digest_; }

private:
    struct Key {
        std::int64_t at_us;
        std::uint64_t seq;
        bool operator<(const Key& o) const {
            if (at_us != o.at_us) return at_us < o.at_us;
            return seq < o.seq;
        }
    };

    static std::uint64_t mix(std::uint64_t d, std::uint64_t a, std::uint64_t b) {
        d ^= a + 0x9e3779b97f4a7c15ULL + (d << 6) + (d >> 2);
        d ^= b + 0x9e3779b97f4a7c15ULL + (d << 6) + (d >> 2);
        return d;
    }

    std::map<Key, std::function<void()>> queue_;
    SimTime now_{0};
    std::uint64_t next_seq_ = 0;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
};

} // namespace meshsim
