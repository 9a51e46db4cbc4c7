#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixtac {

// Errors raised by I/O and contract violations across the library.
class MixtacError : public std::runtime_error {
public:
    explicit MixtacError(const std::string& what) : std::runtime_error(what) {}
};

// One asynchronous brightness-change record. Timestamps are integer
// microseconds so ordering and file round trips are exact; clock math in
// seconds happens in double on demand.
struct TimedEvent {
    std::uint64_t t_us = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1; // +1 or -1

    double t_s() const { return static_cast<double>(t_us) * 1e-6; }

    bool operator==(const TimedEvent&) const = default;
};

struct EventStream {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<TimedEvent> events;

    bool operator==(const EventStream&) const = default;
};

// Dense grayscale snapshot, row-major, intensities in [0,1].
struct Frame {
    std::uint64_t t_us = 0;
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const Frame&) const = default;
};

struct ForceSample {
    double t_s = 0.0;
    double fz_n = 0.0;

    bool operator==(const ForceSample&) const = default;
};

// Uniformly sampled ground-truth normal force.
struct ForceTrace {
    double rate_hz = 0.0;
    std::vector<ForceSample> samples;

    double t_begin() const { return samples.empty() ? 0.0 : samples.front().t_s; }
    double t_end() const { return samples.empty() ? 0.0 : samples.back().t_s; }

    bool operator==(const ForceTrace&) const = default;
};

// All events inside one fixed-width window [t_start, t_end).
struct EventPacket {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    std::vector<TimedEvent> events;
};

// One inter-frame interval: opening frame, M packets, force labels at
// packet end times plus per-packet increments.
struct Cycle {
    Frame guide_frame;
    std::vector<EventPacket> packets;
    std::vector<double> label_times;  // packet end times, seconds
    std::vector<double> labels;       // newtons at packet end times
    std::vector<double> increments;   // labels[m] - labels[m-1] (labels[-1] = cycle-start label)
    double start_label = 0.0;         // force at cycle start
};

// Estimator output at packet cadence; `corrected` marks samples where the
// frame-guided correction also entered the recurrent carry.
struct PredictionSample {
    double t_s = 0.0;
    double f_hat_n = 0.0;
    bool corrected = false;
};

struct PredictionTrace {
    std::vector<PredictionSample> samples;
};

struct ValidationReport {
    bool ok = true;
    std::string message;
    std::size_t index = 0; // offending event index when !ok
};

// Returns the first violation (out-of-order timestamp, out-of-bounds pixel,
// bad polarity) or ok. Violations are the return value, never exceptions.
ValidationReport validate_stream(const EventStream& stream);

// Linear interpolation of a force trace; throws if t is outside the span.
double interp_force(const ForceTrace& trace, double t_s);

} // namespace mixtac
