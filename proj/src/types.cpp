#include "mixtac/types.hpp"

#include <algorithm>
#include <cmath>

namespace mixtac {

ValidationReport validate_stream(const EventStream& stream) {
    std::uint64_t prev_t = 0;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const TimedEvent& e = stream.events[i];
        if (i > 0 && e.t_us < prev_t) {
            return {false, "out of order at index " + std::to_string(i), i};
        }
        prev_t = e.t_us;
        if (e.x >= stream.width || e.y >= stream.height) {
            return {false,
                    "out of bounds at index " + std::to_string(i) + " (x=" +
                        std::to_string(e.x) + ", y=" + std::to_string(e.y) + ")",
                    i};
        }
        if (e.polarity != 1 && e.polarity != -1) {
            return {false, "bad polarity at index " + std::to_string(i), i};
        }
    }
    return {};
}

double interp_force(const ForceTrace& trace, double t_s) {
    const auto& s = trace.samples;
    if (s.size() < 2) throw MixtacError("force trace too short to interpolate");
    if (t_s < s.front().t_s - 1e-12 || t_s > s.back().t_s + 1e-12) {
        throw MixtacError("time " + std::to_string(t_s) + " outside force trace span [" +
                          std::to_string(s.front().t_s) + ", " + std::to_string(s.back().t_s) + "]");
    }
    t_s = std::clamp(t_s, s.front().t_s, s.back().t_s);
    auto it = std::lower_bound(s.begin(), s.end(), t_s,
                               [](const ForceSample& a, double t) { return a.t_s < t; });
    if (it == s.begin()) return it->fz_n;
    if (it == s.end()) return s.back().fz_n;
    const ForceSample& hi = *it;
    if (hi.t_s == t_s) return hi.fz_n; // exact at knots
    const ForceSample& lo = *(it - 1);
    double w = (t_s - lo.t_s) / (hi.t_s - lo.t_s);
    return lo.fz_n + w * (hi.fz_n - lo.fz_n);
}

} // namespace mixtac
