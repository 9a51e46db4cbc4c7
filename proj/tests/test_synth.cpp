#include "mixtac/synth.hpp"

#include "mixtac/analysis.hpp"
#include "mixtac/io.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <cmath>
#include <fstream>
#include <json.hpp>

using namespace mixtac;
using namespace mixtac::synth;

TEST_SUITE_BEGIN("synth");

TEST_CASE("hertz law basics") {
    CHECK(hertz_force(1.0, 0.0) == 0.0);
    CHECK(hertz_force(1.0, 0.25) == doctest::Approx(0.125).epsilon(1e-15)); // 0.25^1.5
    CHECK(hertz_depth(1.0, 0.125) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(hertz_force(2.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("press_hold profile ramps to the plateau and holds at least 25 s") {
    Scenario sc = default_scenario(ScenarioKind::press_hold, 1);
    ContactModel contact;
    ScenarioProfile profile = force_profile(sc, contact);
    CHECK(static_cast<double>(profile.force.samples.size()) ==
          doctest::Approx(sc.duration_s * 800).epsilon(1e-6));

    double plateau_start = sc.param("contact_start_s") + sc.param("ramp_s");
    CHECK(sc.duration_s - plateau_start >= 25.0);
    CHECK(interp_force(profile.force, plateau_start + 1.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(interp_force(profile.force, sc.duration_s - 0.1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(interp_force(profile.force, 0.1) == 0.0);
}

TEST_CASE("zero-depth scenario produces zero force everywhere") {
    Scenario sc = default_scenario(ScenarioKind::press_hold, 1);
    sc.duration_s = 2.0;
    sc.params["target_force_n"] = 0.0;
    ContactModel contact;
    ScenarioProfile profile = force_profile(sc, contact);
    for (const auto& s : profile.force.samples) CHECK(s.fz_n == 0.0);
    for (double d : profile.depth_mm) CHECK(d == 0.0);
}

TEST_CASE("drop_impact has exactly two local maxima above the plateau") {
    Scenario sc = default_scenario(ScenarioKind::drop_impact, 1);
    ContactModel contact;
    ScenarioProfile profile = force_profile(sc, contact);
    double plateau = sc.param("weight_g") * 1e-3 * 9.81;

    std::vector<std::pair<double, double>> series;
    for (const auto& s : profile.force.samples) series.emplace_back(s.t_s, s.fz_n);
    auto peaks = analysis::find_peaks(series, plateau + 0.05, 0.02);
    CHECK(peaks.size() == 2);
    CHECK(peaks[0] == doctest::Approx(sc.param("impact_time_s") + sc.param("peak1_width_s") / 2)
                          .epsilon(0.01));
}

TEST_CASE("vibration above the force Nyquist is rejected") {
    Scenario sc = default_scenario(ScenarioKind::vibration, 1);
    sc.params["freq_hz"] = 450.0;
    ContactModel contact;
    CHECK_THROWS_WITH_AS(force_profile(sc, contact), doctest::Contains("Nyquist"), MixtacError);
}

TEST_CASE("force profiles are non-negative and continuous") {
    ContactModel contact;
    for (auto kind : {ScenarioKind::press_hold, ScenarioKind::vibration,
                      ScenarioKind::drop_impact}) {
        Scenario sc = default_scenario(kind, 3);
        if (kind == ScenarioKind::press_hold) sc.duration_s = 5.0;
        ScenarioProfile profile = force_profile(sc, contact);

        // analytic slope limit per kind, N/s
        double slope = 0.0;
        double k_h = contact.effective_modulus;
        switch (kind) {
            case ScenarioKind::press_hold: {
                double d = hertz_depth(k_h, sc.param("target_force_n"));
                double ddot = d * M_PI / (2.0 * sc.param("ramp_s"));
                slope = 1.5 * k_h * std::sqrt(d) * ddot;
                break;
            }
            case ScenarioKind::vibration: {
                double dmax = sc.param("bias_mm") + sc.param("amp_mm");
                double ddot = sc.param("amp_mm") * 2.0 * M_PI * sc.param("freq_hz");
                slope = 1.5 * k_h * std::sqrt(dmax) * ddot;
                break;
            }
            case ScenarioKind::drop_impact:
                slope = sc.param("peak1_n") * M_PI / sc.param("peak1_width_s");
                break;
            default: break;
        }
        double bound = slope / 800.0 * 1.05 + 1e-9;
        double max_jump = 0.0;
        for (std::size_t i = 1; i < profile.force.samples.size(); ++i) {
            CHECK(profile.force.samples[i].fz_n >= 0.0);
            max_jump = std::max(max_jump, std::abs(profile.force.samples[i].fz_n -
                                                   profile.force.samples[i - 1].fz_n));
        }
        CAPTURE(to_string(kind));
        CHECK(max_jump <= bound);
    }
}

TEST_CASE("marker displacement is linear in depth inside the footprint") {
    ContactModel contact;
    contact.center_x = 32;
    contact.center_y = 24;
    Marker m{40.0, 24.0, 0.8};
    double x1, y1, x2, y2;
    displaced_marker(contact, m, 0.3, &x1, &y1);
    displaced_marker(contact, m, 0.6, &x2, &y2);
    CHECK((x1 - m.x0) * 2.0 == doctest::Approx(x2 - m.x0).epsilon(1e-12));
    CHECK(y1 == m.y0);
    CHECK(x1 > m.x0); // radially outward

    Marker outside{32.0 + contact.contact_radius_px() + 1.0, 24.0, 1.0};
    displaced_marker(contact, outside, 0.6, &x1, &y1);
    CHECK(x1 == outside.x0);
}

TEST_CASE("render at depth 0 matches the rest image") {
    Rng rng(12);
    MarkerField field = random_marker_field(64, 48, 40, rng);
    ContactModel contact;
    Frame rest = render_frame(field, contact, 0.0, 0.0, 64, 48);
    Frame again = render_frame(field, contact, 0.0, 1.0, 64, 48);
    CHECK(rest.pixels == again.pixels);
    for (double v : rest.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("rendered pixel sum matches the golden value for the default field") {
    Rng rng(2024);
    MarkerField field = random_marker_field(64, 48, 60, rng);
    ContactModel contact;
    contact.center_x = 32;
    contact.center_y = 24;
    Frame f = render_frame(field, contact, 0.5, 0.0, 64, 48);
    double sum = 0.0;
    for (double v : f.pixels) sum += v;
    // frozen from the first verified implementation
    CHECK(sum == doctest::Approx(2336.7215686275022).epsilon(1e-12));
}

TEST_CASE("emit_events: static scene with no noise is silent") {
    Rng rng(13);
    MarkerField field = random_marker_field(32, 24, 20, rng);
    ContactModel contact;
    DvsModel dvs{0.12, 200, 0.0};
    auto frame_fn = [&](double) { return render_frame(field, contact, 0.4, 0.0, 32, 24); };
    EventStream s = emit_events(frame_fn, dvs, 32, 24, 0.05, 9);
    CHECK(s.events.empty());
}

TEST_CASE("emit_events: single pixel step emits positive events at that pixel") {
    DvsModel dvs{0.2, 0, 0.0};
    auto frame_fn = [&](double t) {
        Frame f;
        f.width = 4;
        f.height = 4;
        f.pixels.assign(16, 0.5);
        f.at(2, 1) = t < 0.005 ? 0.2 : 0.8;
        return f;
    };
    EventStream s = emit_events(frame_fn, dvs, 4, 4, 0.02, 9);
    REQUIRE(!s.events.empty());
    for (const auto& e : s.events) {
        CHECK(e.x == 2);
        CHECK(e.y == 1);
        CHECK(e.polarity == 1);
    }
}

TEST_CASE("emit_events is deterministic per seed") {
    Rng rng(14);
    MarkerField field = random_marker_field(24, 16, 12, rng);
    ContactModel contact;
    contact.center_x = 12;
    contact.center_y = 8;
    DvsModel dvs{0.1, 200, 5.0};
    auto frame_fn = [&](double t) {
        return render_frame(field, contact, 0.5 * t / 0.05, t, 24, 16);
    };
    EventStream a = emit_events(frame_fn, dvs, 24, 16, 0.05, 42);
    EventStream b = emit_events(frame_fn, dvs, 24, 16, 0.05, 42);
    EventStream c = emit_events(frame_fn, dvs, 24, 16, 0.05, 43);
    CHECK(a == b);
    CHECK(a.events != c.events);
}

TEST_CASE("SceneDvs reproduces emit_events bit-exactly on a moving scene") {
    Rng rng(15);
    MarkerField field = random_marker_field(32, 24, 15, rng);
    ContactModel contact;
    contact.center_x = 16;
    contact.center_y = 12;
    DvsModel dvs{0.08, 300, 2.0};
    auto depth_fn = [](double t) { return t < 0.01 ? 0.0 : 0.8 * (t - 0.01) / 0.04; };

    auto frame_fn = [&](double t) {
        return render_frame(field, contact, depth_fn(t), t, 32, 24);
    };
    EventStream generic = emit_events(frame_fn, dvs, 32, 24, 0.05, 77);

    SceneDvs scene(field, contact, dvs, 32, 24);
    std::vector<TimedEvent> signal;
    for (std::uint64_t k = 0; k <= 500; ++k) {
        scene.step(k, depth_fn(static_cast<double>(k) / 10000.0), 0.0, 0.0, &signal);
    }
    Rng noise_rng(77);
    EventStream fast;
    fast.width = 32;
    fast.height = 24;
    fast.events = merge_events(std::move(signal), noise_events(dvs, 32, 24, 0.05, noise_rng));
    CHECK(fast == generic);
}

TEST_CASE("event count grows with indentation speed") {
    Rng rng(16);
    MarkerField field = random_marker_field(48, 36, 30, rng);
    ContactModel contact;
    contact.center_x = 24;
    contact.center_y = 18;
    DvsModel dvs{0.1, 200, 0.0};
    auto count_for = [&](double slope) {
        auto frame_fn = [&](double t) {
            return render_frame(field, contact, slope * t, t, 48, 36);
        };
        return emit_events(frame_fn, dvs, 48, 36, 0.1, 5).events.size();
    };
    auto slow = count_for(4.0);
    auto fast = count_for(8.0);
    CHECK(fast >= slow);
    CHECK(slow > 0);
}

TEST_CASE("generate_dataset writes the documented layout with valid streams") {
    testutil::TempDir tmp("dataset");
    TrialSpec base;
    base.scenario = default_scenario(ScenarioKind::press_hold);
    base.scenario.duration_s = 25.0;
    base.sensor_width = 32;
    base.sensor_height = 24;
    base.marker_count = 20;
    base.contact.center_x = 16;
    base.contact.center_y = 12;
    auto trials = make_trial_set(ScenarioKind::press_hold, 2, 5, base);
    generate_dataset(trials, tmp.path(), 1);

    std::ifstream mf(tmp.path() / "manifest.json");
    REQUIRE(mf.good());
    auto manifest = nlohmann::json::parse(mf);
    REQUIRE(manifest.at("trials").size() == 2);
    CHECK(manifest["trials"][0]["seed"] != manifest["trials"][1]["seed"]);

    for (const auto& t : manifest["trials"]) {
        auto dir = tmp.path() / t.at("name").get<std::string>();
        EventStream events = io::read_events(dir / "events.bin");
        CHECK(validate_stream(events).ok);
        auto frames = io::read_frame_index(dir / "frames.csv");
        CHECK(std::llabs(static_cast<long long>(frames.size()) - 625) <= 1);
        ForceTrace force = io::read_force(dir / "force.csv");
        CHECK(force.samples.size() == 20000); // 25 s at 800 Hz
        CHECK(std::filesystem::exists(dir / "manifest.json"));
    }
}

TEST_CASE("generate_dataset is bit-deterministic per seed") {
    testutil::TempDir tmp("determinism");
    TrialSpec base;
    base.scenario = default_scenario(ScenarioKind::vibration);
    base.scenario.duration_s = 1.5;
    base.sensor_width = 32;
    base.sensor_height = 24;
    base.marker_count = 15;
    base.contact.center_x = 16;
    base.contact.center_y = 12;
    auto trials = make_trial_set(ScenarioKind::vibration, 1, 5, base);
    generate_dataset(trials, tmp.path() / "a", 1);
    generate_dataset(trials, tmp.path() / "b", 1);

    auto bytes = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(bytes(tmp.path() / "a/trial_000/events.bin") ==
          bytes(tmp.path() / "b/trial_000/events.bin"));
    CHECK(bytes(tmp.path() / "a/trial_000/force.csv") ==
          bytes(tmp.path() / "b/trial_000/force.csv"));
}

TEST_SUITE_END();
