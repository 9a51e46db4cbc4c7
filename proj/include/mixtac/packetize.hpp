#pragma once

#include "mixtac/types.hpp"

#include <filesystem>
#include <vector>

namespace mixtac::packetize {

struct PacketizeConfig {
    double delta_t_s = 0.002;
    double frame_rate_hz = 25.0;
    // The guide frame is the cycle-opening frame I_{k-1}; the closing frame
    // is only there for the ablation flag.
    bool guide_is_closing_frame = false;
};

struct SegmentedCycle {
    Frame guide_frame;
    std::vector<EventPacket> packets;
};

// Tiles every consecutive frame interval with M = round(interval / delta_t)
// half-open packets. Empty packets are kept so the output cadence is
// unconditional. Throws when frames are unsorted, fewer than 2, or an
// interval is not an integer multiple of delta_t within 1%.
std::vector<SegmentedCycle> segment_cycles(const EventStream& stream,
                                           const std::vector<Frame>& frames,
                                           const PacketizeConfig& config);

// Interpolates force labels at packet end times and per-packet increments.
// Throws when a packet end time is outside the trace span.
std::vector<Cycle> label_cycles(std::vector<SegmentedCycle> cycles, const ForceTrace& trace);

void write_cycle_index(const std::vector<Cycle>& cycles, const std::filesystem::path& csv_path);

} // namespace mixtac::packetize
