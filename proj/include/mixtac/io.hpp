#pragma once

#include "mixtac/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mixtac::io {

// Event file layout (little-endian):
//   8-byte magic "MXTEVT01"
//   u32 width, u32 height, u64 count
//   count records of {u64 t_us, u16 x, u16 y, i8 polarity, 3 pad bytes}
EventStream read_events(const std::filesystem::path& path);
void write_events(const EventStream& stream, const std::filesystem::path& path);

// Plain P5 PGM with the timestamp in a "# t_us=<n>" comment line.
// Intensities map [0,1] <-> [0,255]; writers must hand in values that are
// already multiples of 1/255 (the renderer quantizes) for exact round trips.
Frame read_frame(const std::filesystem::path& path);
void write_frame(const Frame& frame, const std::filesystem::path& path);

struct FrameIndexEntry {
    std::size_t frame_idx = 0;
    std::uint64_t t_us = 0;
    std::string path; // relative to the index file's directory
};

// frames.csv: header "frame_idx,t_us,path"
std::vector<FrameIndexEntry> read_frame_index(const std::filesystem::path& csv_path);
void write_frame_index(const std::vector<FrameIndexEntry>& entries,
                       const std::filesystem::path& csv_path);

// Loads every frame listed in the index, in index order.
std::vector<Frame> read_frame_sequence(const std::filesystem::path& csv_path);

// Writes frames as frames/frame_000000.pgm ... plus the index CSV.
void write_frame_sequence(const std::vector<Frame>& frames,
                          const std::filesystem::path& trial_dir);

// CSV with header "t_s,fz_n".
ForceTrace read_force(const std::filesystem::path& path, double rate_hz = 0.0);
void write_force(const ForceTrace& trace, const std::filesystem::path& path);

} // namespace mixtac::io
