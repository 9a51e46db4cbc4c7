#include "mixtac/io.hpp"
#include "mixtac/types.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <fstream>

using namespace mixtac;

TEST_SUITE_BEGIN("core");

TEST_CASE("validate_stream accepts an empty stream") {
    EventStream s{64, 48, {}};
    CHECK(validate_stream(s).ok);
}

TEST_CASE("validate_stream flags out-of-order timestamps") {
    EventStream s{64, 48, {{5, 0, 0, 1}, {3, 1, 1, 1}}};
    auto report = validate_stream(s);
    CHECK_FALSE(report.ok);
    CHECK(report.index == 1);
    CHECK(report.message.find("out of order") != std::string::npos);
}

TEST_CASE("validate_stream flags out-of-bounds pixels") {
    EventStream s{64, 48, {{1, 64, 0, 1}}};
    auto report = validate_stream(s);
    CHECK_FALSE(report.ok);
    CHECK(report.message.find("out of bounds") != std::string::npos);
}

TEST_CASE("validate_stream catches a planted violation anywhere") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        EventStream s;
        s.width = 32;
        s.height = 24;
        s.events = testutil::random_events(40, 32, 24, 100000, rng);
        REQUIRE(validate_stream(s).ok);

        std::size_t victim = rng.below(s.events.size() - 1) + 1;
        switch (rng.below(3)) {
            case 0: s.events[victim].t_us = 0; break; // out of order (after index 0)
            case 1: s.events[victim].x = 32; break;
            default: s.events[victim].polarity = 0; break;
        }
        auto report = validate_stream(s);
        if (s.events[victim].t_us == 0 && victim > 0 && s.events[victim - 1].t_us == 0) {
            continue; // planted "0" can be legal if the stream starts at 0
        }
        CHECK_FALSE(report.ok);
    }
}

TEST_CASE("event file round trip is bit exact") {
    testutil::TempDir tmp("events");
    Rng rng(42);
    EventStream s;
    s.width = 346;
    s.height = 260;
    s.events = testutil::random_events(1000, 346, 260, 5'000'000, rng);

    auto path = tmp.path() / "events.bin";
    io::write_events(s, path);
    EventStream back = io::read_events(path);
    CHECK(back == s);
}

TEST_CASE("truncated event file is rejected") {
    testutil::TempDir tmp("events_trunc");
    Rng rng(1);
    EventStream s{16, 16, testutil::random_events(10, 16, 16, 1000, rng)};
    auto path = tmp.path() / "events.bin";
    io::write_events(s, path);

    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 7);
    CHECK_THROWS_WITH_AS(io::read_events(path), doctest::Contains("truncated record"),
                         MixtacError);
}

TEST_CASE("wrong magic bytes are rejected") {
    testutil::TempDir tmp("events_magic");
    auto path = tmp.path() / "bogus.bin";
    std::ofstream(path) << "NOTEVENTS-at-all-0000000000000000";
    CHECK_THROWS_WITH_AS(io::read_events(path), doctest::Contains("not an event file"),
                         MixtacError);
}

TEST_CASE("frame PGM round trip preserves quantized pixels and timestamp") {
    testutil::TempDir tmp("frames");
    Rng rng(3);
    Frame f;
    f.t_us = 123456789;
    f.width = 17;
    f.height = 9;
    f.pixels.resize(17 * 9);
    for (double& v : f.pixels) {
        v = static_cast<double>(rng.below(256)) / 255.0; // 8-bit grid
    }
    auto path = tmp.path() / "frame.pgm";
    io::write_frame(f, path);
    Frame back = io::read_frame(path);
    CHECK(back == f);
}

TEST_CASE("frame sequence index round trips") {
    testutil::TempDir tmp("frameseq");
    std::vector<Frame> frames;
    for (int k = 0; k < 3; ++k) {
        Frame f;
        f.t_us = static_cast<std::uint64_t>(k) * 40000;
        f.width = 8;
        f.height = 6;
        f.pixels.assign(48, k / 255.0);
        frames.push_back(f);
    }
    io::write_frame_sequence(frames, tmp.path());
    auto back = io::read_frame_sequence(tmp.path() / "frames.csv");
    CHECK(back == frames);
}

TEST_CASE("force trace CSV round trips exactly") {
    testutil::TempDir tmp("force");
    Rng rng(9);
    ForceTrace trace;
    trace.rate_hz = 800.0;
    for (int i = 0; i < 100; ++i) {
        trace.samples.push_back({i / 800.0, rng.uniform(0.0, 1.0)});
    }
    auto path = tmp.path() / "force.csv";
    io::write_force(trace, path);
    ForceTrace back = io::read_force(path, 800.0);
    CHECK(back == trace);
}

TEST_CASE("interp_force is exact at knots and linear between") {
    ForceTrace t;
    t.rate_hz = 2.0;
    t.samples = {{0.0, 1.0}, {0.5, 3.0}, {1.0, 2.0}};
    CHECK(interp_force(t, 0.5) == 3.0);
    CHECK(interp_force(t, 0.25) == doctest::Approx(2.0));
    CHECK(interp_force(t, 0.75) == doctest::Approx(2.5));
    CHECK_THROWS_AS(interp_force(t, 1.5), MixtacError);
}

TEST_SUITE_END();
