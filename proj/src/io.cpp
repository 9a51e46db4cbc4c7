#include "mixtac/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mixtac::io {
namespace {

constexpr std::array<char, 8> kEventMagic = {'M', 'X', 'T', 'E', 'V', 'T', '0', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MixtacError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw MixtacError("I/O failure reading " + path.string());
    return ss.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MixtacError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw MixtacError("I/O failure writing " + path.string());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

EventStream read_events(const std::filesystem::path& path) {
    std::string raw = read_all(path);
    if (raw.size() < 24 || std::memcmp(raw.data(), kEventMagic.data(), 8) != 0) {
        throw MixtacError("not an event file: " + path.string());
    }
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    EventStream s;
    s.width = static_cast<std::uint16_t>(get_u32(p + 8));
    s.height = static_cast<std::uint16_t>(get_u32(p + 12));
    std::uint64_t count = get_u64(p + 16);
    if (raw.size() != 24 + count * 16) {
        throw MixtacError("truncated record in " + path.string() + " (have " +
                          std::to_string(raw.size() - 24) + " payload bytes, want " +
                          std::to_string(count * 16) + ")");
    }
    s.events.resize(count);
    const unsigned char* rec = p + 24;
    for (std::uint64_t i = 0; i < count; ++i, rec += 16) {
        TimedEvent& e = s.events[i];
        e.t_us = get_u64(rec);
        e.x = get_u16(rec + 8);
        e.y = get_u16(rec + 10);
        e.polarity = static_cast<std::int8_t>(rec[12]);
    }
    return s;
}

void write_events(const EventStream& stream, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(24 + stream.events.size() * 16);
    buf.append(kEventMagic.data(), 8);
    put_u32(buf, stream.width);
    put_u32(buf, stream.height);
    put_u64(buf, stream.events.size());
    for (const TimedEvent& e : stream.events) {
        put_u64(buf, e.t_us);
        put_u16(buf, e.x);
        put_u16(buf, e.y);
        buf.push_back(static_cast<char>(e.polarity));
        buf.append(3, '\0');
    }
    write_all(path, buf);
}

Frame read_frame(const std::filesystem::path& path) {
    std::string raw = read_all(path);
    std::size_t pos = 0;
    auto next_token = [&](bool* was_t_comment, std::uint64_t* t_out) -> std::string {
        // skip whitespace and comment lines; capture "# t_us=<n>"
        while (pos < raw.size()) {
            if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
                ++pos;
            } else if (raw[pos] == '#') {
                std::size_t eol = raw.find('\n', pos);
                std::string comment = raw.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
                if (comment.rfind("# t_us=", 0) == 0) {
                    *t_out = std::strtoull(comment.c_str() + 7, nullptr, 10);
                    *was_t_comment = true;
                }
                pos = (eol == std::string::npos) ? raw.size() : eol + 1;
            } else {
                break;
            }
        }
        std::size_t start = pos;
        while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
        return raw.substr(start, pos - start);
    };

    bool have_t = false;
    std::uint64_t t_us = 0;
    std::string magic = next_token(&have_t, &t_us);
    if (magic != "P5") throw MixtacError("not a P5 PGM: " + path.string());
    int width = std::stoi(next_token(&have_t, &t_us));
    int height = std::stoi(next_token(&have_t, &t_us));
    int maxval = std::stoi(next_token(&have_t, &t_us));
    if (maxval != 255) throw MixtacError("unsupported PGM maxval in " + path.string());
    ++pos; // single whitespace after maxval
    std::size_t npx = static_cast<std::size_t>(width) * height;
    if (raw.size() - pos < npx) throw MixtacError("truncated PGM payload in " + path.string());

    Frame f;
    f.t_us = t_us;
    f.width = width;
    f.height = height;
    f.pixels.resize(npx);
    for (std::size_t i = 0; i < npx; ++i) {
        f.pixels[i] = static_cast<unsigned char>(raw[pos + i]) / 255.0;
    }
    return f;
}

void write_frame(const Frame& frame, const std::filesystem::path& path) {
    std::string buf;
    buf += "P5\n# t_us=" + std::to_string(frame.t_us) + "\n";
    buf += std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    buf.reserve(buf.size() + frame.pixels.size());
    for (double v : frame.pixels) {
        long q = std::lround(v * 255.0);
        if (q < 0) q = 0;
        if (q > 255) q = 255;
        buf.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
    write_all(path, buf);
}

std::vector<FrameIndexEntry> read_frame_index(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw MixtacError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || line != "frame_idx,t_us,path") {
        throw MixtacError("bad frame index header in " + csv_path.string());
    }
    std::vector<FrameIndexEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        FrameIndexEntry e;
        std::size_t c1 = line.find(',');
        std::size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw MixtacError("bad frame index row: " + line);
        }
        e.frame_idx = std::stoull(line.substr(0, c1));
        e.t_us = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
        e.path = line.substr(c2 + 1);
        out.push_back(std::move(e));
    }
    return out;
}

void write_frame_index(const std::vector<FrameIndexEntry>& entries,
                       const std::filesystem::path& csv_path) {
    std::ostringstream ss;
    ss << "frame_idx,t_us,path\n";
    for (const auto& e : entries) {
        ss << e.frame_idx << ',' << e.t_us << ',' << e.path << '\n';
    }
    write_all(csv_path, ss.str());
}

std::vector<Frame> read_frame_sequence(const std::filesystem::path& csv_path) {
    auto entries = read_frame_index(csv_path);
    std::filesystem::path base = csv_path.parent_path();
    std::vector<Frame> frames;
    frames.reserve(entries.size());
    for (const auto& e : entries) {
        Frame f = read_frame(base / e.path);
        if (f.t_us != e.t_us) {
            throw MixtacError("frame timestamp mismatch between index and " + e.path);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_frame_sequence(const std::vector<Frame>& frames,
                          const std::filesystem::path& trial_dir) {
    std::filesystem::create_directories(trial_dir / "frames");
    std::vector<FrameIndexEntry> index;
    index.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        write_frame(frames[i], trial_dir / "frames" / name);
        index.push_back({i, frames[i].t_us, std::string("frames/") + name});
    }
    write_frame_index(index, trial_dir / "frames.csv");
}

ForceTrace read_force(const std::filesystem::path& path, double rate_hz) {
    std::ifstream in(path);
    if (!in) throw MixtacError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "t_s,fz_n") {
        throw MixtacError("bad force trace header in " + path.string());
    }
    ForceTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t c = line.find(',');
        if (c == std::string::npos) throw MixtacError("bad force row: " + line);
        ForceSample s;
        s.t_s = std::strtod(line.c_str(), nullptr);
        s.fz_n = std::strtod(line.c_str() + c + 1, nullptr);
        trace.samples.push_back(s);
    }
    if (rate_hz > 0.0) {
        trace.rate_hz = rate_hz;
    } else if (trace.samples.size() >= 2) {
        trace.rate_hz = (static_cast<double>(trace.samples.size()) - 1.0) /
                        (trace.samples.back().t_s - trace.samples.front().t_s);
    }
    return trace;
}

void write_force(const ForceTrace& trace, const std::filesystem::path& path) {
    std::ostringstream ss;
    ss << "t_s,fz_n\n";
    for (const ForceSample& s : trace.samples) {
        ss << format_double(s.t_s) << ',' << format_double(s.fz_n) << '\n';
    }
    write_all(path, ss.str());
}

} // namespace mixtac::io
