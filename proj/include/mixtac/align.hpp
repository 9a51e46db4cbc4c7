#pragma once

#include "mixtac/types.hpp"

namespace mixtac::align {

// One shared physical instant seen on both timelines.
struct AnchorPair {
    double t_event_s = 0.0;
    double t_force_s = 0.0;
};

// Linear clock relation t_force = a * t_event + b.
struct ClockMap {
    double a = 1.0; // drift factor, > 0
    double b = 0.0; // offset, seconds

    double to_force(double t_event_s) const { return a * t_event_s + b; }
    ClockMap inverse() const { return {1.0 / a, -b / a}; }
};

// Timestamp of the maximum force inside [t0, t1]; ties toward the earliest
// sample. Requires at least 3 samples in the window.
double detect_force_peak(const ForceTrace& trace, double t0, double t1);

// Event-rate trough: bin counts, moving-average over `smooth_bins`, return
// the centre of the minimum-rate bin restricted to the interior 80% of the
// window (edge bins see artifacts). Ties toward the earliest bin.
double detect_event_trough(const EventStream& stream, double t0, double t1,
                           double bin_s = 0.005, int smooth_bins = 3);

// Centre of the maximum-rate bin; brackets the impulse burst when only a
// coarse window is known (the clock offset can exceed the burst width).
double locate_burst(const EventStream& stream, double t0, double t1,
                    double bin_s = 0.005, int smooth_bins = 3);

// Exact two-point solve: a = (F2-F1)/(E2-E1), b = F1 - a*E1.
// Throws "degenerate anchors" on coincident event times, "non-causal map"
// when the solved a is not positive.
ClockMap solve_clock_map(const AnchorPair& p1, const AnchorPair& p2);

// Remap every event into the force clock, rounding to the nearest
// microsecond. Order is preserved (a > 0); negative results are an error.
EventStream apply_clock_map(const ClockMap& map, const EventStream& stream);

} // namespace mixtac::align
