#pragma once

#include <cstdint>
#include <compare>

namespace meshsim {

// Virtual clock value. Integer microseconds so runs are bit-reproducible
// across platforms; never use floating point for event timestamps.
struct SimTime {
    std::int64_t us = 0;

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return {us + o.us}; }
    constexpr SimTime operator-(SimTime o) const { return {us - o.us}; }
    SimTime& operator+=(SimTime o) { us += o.us; return *this; }

    constexpr double seconds() const { return static_cast<double>(us) / 1e6; }
    constexpr double millis() const { return static_cast<double>(us) / 1e3; }

    static constexpr SimTime from_us(std::int64_t v) { return {v}; }
    static constexpr SimTime from_ms(std::int64_t v) { return {v * 1000}; }
    static constexpr SimTime from_s(std::int64_t v) { return {v * 1000000}; }
    static constexpr SimTime from_seconds(double v) {
        return {static_cast<std::int64_t>(v * 1e6)};
    }
};

constexpr SimTime kTimeZero{0};

} // namespace meshsim
