#include "mixtac/packetize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mixtac::packetize {

std::vector<SegmentedCycle> segment_cycles(const EventStream& stream,
                                           const std::vector<Frame>& frames,
                                           const PacketizeConfig& config) {
    if (frames.size() < 2) throw MixtacError("segment_cycles: fewer than 2 frames");
    if (config.delta_t_s <= 0.0) throw MixtacError("delta_t must be positive");
    for (std::size_t k = 1; k < frames.size(); ++k) {
        if (frames[k].t_us <= frames[k - 1].t_us) {
            throw MixtacError("frames not timestamp-sorted at index " + std::to_string(k));
        }
    }

    const auto delta_us = config.delta_t_s * 1e6;
    std::vector<SegmentedCycle> cycles;
    cycles.reserve(frames.size() - 1);

    // events are sorted; sweep once
    std::size_t ev = 0;
    const auto& events = stream.events;
    for (std::size_t k = 1; k < frames.size(); ++k) {
        const std::uint64_t t_prev = frames[k - 1].t_us;
        const std::uint64_t t_next = frames[k].t_us;
        const double interval = static_cast<double>(t_next - t_prev);
        const auto m_count = static_cast<std::int64_t>(std::llround(interval / delta_us));
        if (m_count < 1 ||
            std::abs(static_cast<double>(m_count) * delta_us - interval) > 0.01 * interval) {
            throw MixtacError("frame interval " + std::to_string(interval) +
                              " us is not an integer multiple of delta_t within 1%");
        }

        SegmentedCycle cycle;
        cycle.guide_frame = config.guide_is_closing_frame ? frames[k] : frames[k - 1];
        cycle.packets.reserve(m_count);
        while (ev < events.size() && events[ev].t_us < t_prev) ++ev;
        for (std::int64_t m = 1; m <= m_count; ++m) {
            std::uint64_t b0 = t_prev + static_cast<std::uint64_t>(std::llround(
                                            static_cast<double>(m - 1) * interval / m_count));
            std::uint64_t b1 = t_prev + static_cast<std::uint64_t>(std::llround(
                                            static_cast<double>(m) * interval / m_count));
            EventPacket packet;
            packet.t_start_s = static_cast<double>(b0) * 1e-6;
            packet.t_end_s = static_cast<double>(b1) * 1e-6;
            while (ev < events.size() && events[ev].t_us < b1) {
                packet.events.push_back(events[ev]);
                ++ev;
            }
            cycle.packets.push_back(std::move(packet));
        }
        cycles.push_back(std::move(cycle));
    }
    return cycles;
}

std::vector<Cycle> label_cycles(std::vector<SegmentedCycle> cycles, const ForceTrace& trace) {
    std::vector<Cycle> out;
    out.reserve(cycles.size());
    for (SegmentedCycle& sc : cycles) {
        Cycle c;
        c.guide_frame = std::move(sc.guide_frame);
        c.packets = std::move(sc.packets);
        if (c.packets.empty()) throw MixtacError("label_cycles: cycle without packets");
        c.start_label = interp_force(trace, c.packets.front().t_start_s);
        double prev = c.start_label;
        for (const EventPacket& p : c.packets) {
            double label = interp_force(trace, p.t_end_s);
            c.label_times.push_back(p.t_end_s);
            c.labels.push_back(label);
            c.increments.push_back(label - prev);
            prev = label;
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_cycle_index(const std::vector<Cycle>& cycles, const std::filesystem::path& csv_path) {
    std::ostringstream ss;
    ss << "cycle,t_start_us,t_end_us,n_packets,n_events\n";
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        const Cycle& c = cycles[i];
        std::size_t n_events = 0;
        for (const EventPacket& p : c.packets) n_events += p.events.size();
        ss << i << ',' << static_cast<std::uint64_t>(std::llround(c.packets.front().t_start_s * 1e6))
           << ',' << static_cast<std::uint64_t>(std::llround(c.packets.back().t_end_s * 1e6)) << ','
           << c.packets.size() << ',' << n_events << '\n';
    }
    std::ofstream out(csv_path);
    if (!out) throw MixtacError("cannot open " + csv_path.string());
    out << ss.str();
    if (!out.good()) throw MixtacError("I/O failure writing " + csv_path.string());
}

} // namespace mixtac::packetize
