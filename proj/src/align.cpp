#include "mixtac/align.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mixtac::align {

double detect_force_peak(const ForceTrace& trace, double t0, double t1) {
    if (!(t1 > t0)) throw MixtacError("detect_force_peak: empty window");
    double best = -1.0;
    double best_t = 0.0;
    std::size_t n = 0;
    for (const ForceSample& s : trace.samples) {
        if (s.t_s < t0 || s.t_s > t1) continue;
        ++n;
        if (s.fz_n > best) {
            best = s.fz_n;
            best_t = s.t_s;
        }
    }
    if (n < 3) throw MixtacError("detect_force_peak: window holds fewer than 3 samples");
    return best_t;
}

namespace {

// Smoothed per-bin event rates over [t0, t1]; shared by trough/burst search.
struct BinnedRates {
    std::vector<double> smoothed;
    double t0 = 0.0;
    double bin = 0.0;

    double center(std::size_t i) const { return t0 + (static_cast<double>(i) + 0.5) * bin; }
};

BinnedRates bin_rates(const EventStream& stream, double t0, double t1, double bin_s,
                      int smooth_bins) {
    if (!(t1 > t0)) throw MixtacError("event window is empty");
    if (bin_s <= 0.0 || smooth_bins < 1) throw MixtacError("bad binning parameters");
    if (t1 - t0 < smooth_bins * bin_s) {
        throw MixtacError("event window shorter than smooth*bin");
    }
    auto n_bins = static_cast<std::size_t>(std::floor((t1 - t0) / bin_s));
    // integer-microsecond binning keeps boundary events deterministic
    const auto t0_us = static_cast<std::int64_t>(std::llround(t0 * 1e6));
    const auto bin_us = static_cast<std::int64_t>(std::llround(bin_s * 1e6));
    if (bin_us < 1) throw MixtacError("bin below 1 us");
    std::vector<double> counts(n_bins, 0.0);
    for (const TimedEvent& e : stream.events) {
        auto rel = static_cast<std::int64_t>(e.t_us) - t0_us;
        if (rel < 0) continue;
        auto i = static_cast<std::size_t>(rel / bin_us);
        if (i < n_bins) counts[i] += 1.0;
    }
    BinnedRates out;
    out.t0 = t0;
    out.bin = bin_s;
    out.smoothed.resize(n_bins);
    int half = smooth_bins / 2;
    for (std::size_t i = 0; i < n_bins; ++i) {
        std::size_t lo = i >= static_cast<std::size_t>(half) ? i - half : 0;
        std::size_t hi = std::min(n_bins - 1, i + static_cast<std::size_t>(half));
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += counts[k];
        out.smoothed[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

} // namespace

double detect_event_trough(const EventStream& stream, double t0, double t1, double bin_s,
                           int smooth_bins) {
    BinnedRates rates = bin_rates(stream, t0, t1, bin_s, smooth_bins);
    double span = t1 - t0;
    double lo = t0 + 0.1 * span;
    double hi = t1 - 0.1 * span;
    double best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t best_i = -1;
    for (std::size_t i = 0; i < rates.smoothed.size(); ++i) {
        double c = rates.center(i);
        if (c < lo || c > hi) continue;
        if (rates.smoothed[i] < best) {
            best = rates.smoothed[i];
            best_i = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (best_i < 0) throw MixtacError("detect_event_trough: no interior bins");
    return rates.center(static_cast<std::size_t>(best_i));
}

double locate_burst(const EventStream& stream, double t0, double t1, double bin_s,
                    int smooth_bins) {
    BinnedRates rates = bin_rates(stream, t0, t1, bin_s, smooth_bins);
    double best = -1.0;
    for (double r : rates.smoothed) best = std::max(best, r);
    if (best <= 0.0) throw MixtacError("locate_burst: no events in window");
    // rate-weighted centroid of the above-threshold region; the burst's two
    // lobes are symmetric about the impulse apex
    double acc_t = 0.0, acc_w = 0.0;
    for (std::size_t i = 0; i < rates.smoothed.size(); ++i) {
        double w = rates.smoothed[i];
        if (w < 0.25 * best) continue;
        acc_t += w * rates.center(i);
        acc_w += w;
    }
    return acc_t / acc_w;
}

ClockMap solve_clock_map(const AnchorPair& p1, const AnchorPair& p2) {
    if (p1.t_event_s == p2.t_event_s) throw MixtacError("degenerate anchors");
    ClockMap map;
    map.a = (p2.t_force_s - p1.t_force_s) / (p2.t_event_s - p1.t_event_s);
    map.b = p1.t_force_s - map.a * p1.t_event_s;
    if (!(map.a > 0.0)) throw MixtacError("non-causal map (a <= 0)");
    return map;
}

EventStream apply_clock_map(const ClockMap& map, const EventStream& stream) {
    if (!(map.a > 0.0)) throw MixtacError("non-causal map (a <= 0)");
    EventStream out;
    out.width = stream.width;
    out.height = stream.height;
    out.events.reserve(stream.events.size());
    for (TimedEvent e : stream.events) {
        double t_force = map.a * e.t_s() + map.b;
        auto us = std::llround(t_force * 1e6);
        if (us < 0) {
            throw MixtacError("negative mapped timestamp for event at " +
                              std::to_string(e.t_s()) + " s");
        }
        e.t_us = static_cast<std::uint64_t>(us);
        out.events.push_back(e);
    }
    return out;
}

} // namespace mixtac::align
