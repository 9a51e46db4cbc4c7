#include "mixtac/slipctl.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <cmath>
#include <fstream>

using namespace mixtac;
using namespace mixtac::slipctl;

TEST_SUITE_BEGIN("slipctl");

namespace {

SlipTrialConfig base_config(double duration = 2.2) {
    SlipTrialConfig cfg;
    cfg.object = object_preset("box");
    cfg.scenario = synth::default_scenario(synth::ScenarioKind::slip_disturbance, 1);
    cfg.scenario.duration_s = duration;
    cfg.contact.center_x = cfg.sensor_width / 2.0;
    cfg.contact.center_y = cfg.sensor_height / 2.0;
    return cfg;
}

} // namespace

TEST_CASE("control_step boundary and proportional response") {
    SlipController ctrl{4.0, 0.001, 0.001};
    CHECK(control_step(ctrl, 4.0) == 0.0);  // at threshold: no detection
    CHECK(control_step(ctrl, 0.0) == 0.0);
    CHECK(control_step(ctrl, 14.0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK_THROWS_AS(control_step(ctrl, -1.0), MixtacError);
}

TEST_CASE("object presets scale friction with contact area") {
    auto sphere = object_preset("rigid_sphere");
    auto cup = object_preset("deformable_cup");
    auto box = object_preset("box");
    CHECK(sphere.mu < cup.mu);
    CHECK(cup.mu < box.mu);
    CHECK(sphere.suite_trials == 20);
    CHECK(cup.suite_trials == 20);
    CHECK(box.suite_trials == 15);
    CHECK_THROWS_AS(object_preset("banana"), MixtacError);
}

TEST_CASE("no disturbance keeps the plant in equilibrium with zero action") {
    SlipTrialConfig cfg = base_config(1.8);
    cfg.scenario.params["disturb_time_s"] = 5.0; // never fires inside the trial
    cfg.dvs.noise_rate = 0.0;
    SlipLog log = run_slip_trial(cfg, 3);
    CHECK(log.final_slip_mm == 0.0);
    for (const auto& r : log.records) {
        CHECK(r.delta_d_mm == 0.0);
        CHECK(r.slip_mm == 0.0);
        CHECK_FALSE(r.slipping);
    }
    CHECK(log.detection_latency_s < 0.0);
}

TEST_CASE("disabled controller lets slip grow monotonically to the end") {
    SlipTrialConfig cfg = base_config();
    cfg.controller_enabled = false;
    SlipLog log = run_slip_trial(cfg, 4);
    CHECK(log.final_slip_mm > 1.0);
    double prev = -1.0;
    for (const auto& r : log.records) {
        CHECK(r.slip_mm >= prev);
        prev = r.slip_mm;
        CHECK(r.delta_d_mm == 0.0);
    }
    CHECK(log.final_slip_mm == log.max_slip_mm);
}

TEST_CASE("uncontrolled slip is monotone in the disturbance magnitude") {
    SlipTrialConfig cfg = base_config();
    cfg.controller_enabled = false;
    cfg.scenario.params["weight_g"] = 50.0;
    double small = run_slip_trial(cfg, 5).final_slip_mm;
    cfg.scenario.params["weight_g"] = 150.0;
    double large = run_slip_trial(cfg, 5).final_slip_mm;
    CHECK(small <= large);
}

TEST_CASE("closed loop never reduces the normal force") {
    SlipTrialConfig cfg = base_config();
    SlipLog log = run_slip_trial(cfg, 6);
    double prev = 0.0;
    for (const auto& r : log.records) {
        CHECK(r.delta_d_mm >= 0.0);
        CHECK(r.normal_force_n >= prev);
        prev = r.normal_force_n;
    }
}

TEST_CASE("controller detects quickly and caps slip well under the uncontrolled run") {
    SlipTrialConfig on = base_config();
    SlipLog controlled = run_slip_trial(on, 7);
    SlipTrialConfig off = base_config();
    off.controller_enabled = false;
    SlipLog uncontrolled = run_slip_trial(off, 7);

    CHECK(controlled.detection_latency_s >= 0.0);
    CHECK(controlled.detection_latency_s <= 0.020);
    CHECK(controlled.final_slip_mm < uncontrolled.final_slip_mm / 5.0);
    CHECK(controlled.settle_time_s >= 0.0);
}

TEST_CASE("slip log CSV has the documented columns") {
    testutil::TempDir tmp("sliplog");
    SlipTrialConfig cfg = base_config(1.6);
    cfg.scenario.params["disturb_time_s"] = 1.2;
    SlipLog log = run_slip_trial(cfg, 8);
    write_slip_log(log, tmp.path() / "log.csv");
    std::ifstream in(tmp.path() / "log.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t_s,n_t,delta_d_mm,normal_force_n,slip_mm,slipping");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == log.records.size());
}

TEST_SUITE_END();
