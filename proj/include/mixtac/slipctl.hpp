#pragma once

#include "mixtac/synth.hpp"
#include "mixtac/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mixtac::slipctl {

// Proportional event-density controller: advance by k*(N_t - N_th) when the
// 1 ms event count exceeds the background threshold.
struct SlipController {
    double n_th = 4.0;            // events per window
    double k_mm_per_event = 0.001;
    double window_s = 0.001;
};

double control_step(const SlipController& ctrl, double n_t);

// 1-D Coulomb plant: the object is pressed against a vertical wall, gravity
// pulls it down, friction capacity is mu * normal_force. The arm advance
// maps to normal force through a contact stiffness.
struct FrictionPlant {
    double object_mass_g = 200.0;
    double mu = 0.7;
    double normal_force_n = 0.0; // set to the critical grip at trial start
    double gravity = 9.81;
    double advance_stiffness_n_per_mm = 2.0;
};

struct ObjectPreset {
    std::string name;
    double mass_g = 200.0;
    double mu = 0.7;      // contact-area scaling: sphere smallest
    int suite_trials = 15;
};

ObjectPreset object_preset(const std::string& name); // rigid_sphere | deformable_cup | box

struct SlipWindowRecord {
    double t_s = 0.0;
    double n_t = 0.0;
    double delta_d_mm = 0.0;
    double normal_force_n = 0.0;
    double slip_mm = 0.0;
    bool slipping = false;
};

struct SlipLog {
    std::vector<SlipWindowRecord> records; // 1 ms cadence
    double n_th = 0.0;                     // calibrated threshold
    double onset_s = 0.0;                  // disturbance time
    double detection_latency_s = -1.0;     // first exceedance minus onset, -1 if never
    double settle_time_s = -1.0;           // first post-detection window with |v| < 0.01 mm/s
    double final_slip_mm = 0.0;
    double max_slip_mm = 0.0;
};

struct SlipTrialConfig {
    ObjectPreset object;
    synth::Scenario scenario;  // slip_disturbance kind
    double k_mm_per_event = 0.001;
    bool controller_enabled = true;
    double calibration_prefix_s = 1.0; // quiescent window statistics -> n_th
    int sensor_width = 48;
    int sensor_height = 36;
    int marker_count = 30;
    synth::DvsModel dvs{0.12, 200, 1.0};
    synth::ContactModel contact;
    double advance_stiffness_n_per_mm = 2.0;
};

SlipLog run_slip_trial(const SlipTrialConfig& config, std::uint64_t seed);

void write_slip_log(const SlipLog& log, const std::filesystem::path& csv_path);

struct ObjectSuiteRow {
    std::string object;
    int trials = 0;
    double mean_slip_mm = 0.0;
    double stddev_slip_mm = 0.0;
    double mean_latency_s = 0.0;
};

// Repeated seeded trials per object preset (20/20/15).
std::vector<ObjectSuiteRow> object_suite(const SlipTrialConfig& base, std::uint64_t seed,
                                         int threads = 1);

void write_object_suite_csv(const std::vector<ObjectSuiteRow>& rows,
                            const std::filesystem::path& csv_path);

} // namespace mixtac::slipctl
