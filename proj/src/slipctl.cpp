#include "mixtac/slipctl.hpp"

#include "mixtac/threads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mixtac::slipctl {

double control_step(const SlipController& ctrl, double n_t) {
    if (n_t < 0.0) throw MixtacError("control_step: negative event count");
    if (n_t > ctrl.n_th) return ctrl.k_mm_per_event * (n_t - ctrl.n_th);
    return 0.0;
}

ObjectPreset object_preset(const std::string& name) {
    // mu scales with contact area: the rigid sphere touches at nearly a point
    if (name == "rigid_sphere" || name == "sphere" || name == "ball") {
        return {"rigid_sphere", 150.0, 0.30, 20};
    }
    if (name == "deformable_cup" || name == "cup") {
        return {"deformable_cup", 120.0, 0.55, 20};
    }
    if (name == "box") {
        return {"box", 200.0, 0.70, 15};
    }
    throw MixtacError("unknown object preset: " + name);
}

SlipLog run_slip_trial(const SlipTrialConfig& config, std::uint64_t seed) {
    const synth::Scenario& sc = config.scenario;
    if (sc.kind != synth::ScenarioKind::slip_disturbance) {
        throw MixtacError("run_slip_trial needs a slip_disturbance scenario");
    }
    const double t_disturb = sc.param("disturb_time_s");
    const double weight_kg = sc.param("weight_g") * 1e-3;
    const double drop_m = sc.param("drop_cm") * 1e-2;
    const double duration = sc.duration_s;
    if (t_disturb <= config.calibration_prefix_s) {
        throw MixtacError("disturbance must come after the calibration prefix");
    }

    FrictionPlant plant;
    plant.object_mass_g = config.object.mass_g;
    plant.mu = config.object.mu;
    plant.advance_stiffness_n_per_mm = config.advance_stiffness_n_per_mm;
    const double m_obj = plant.object_mass_g * 1e-3;
    // critical grip: friction capacity exactly balances the object weight
    plant.normal_force_n = m_obj * plant.gravity / plant.mu;

    Rng field_rng(Rng::derive_seed(seed, 1));
    synth::MarkerField field = synth::random_marker_field(config.sensor_width,
                                                          config.sensor_height,
                                                          config.marker_count, field_rng);
    synth::SceneDvs scene(field, config.contact, config.dvs, config.sensor_width,
                          config.sensor_height);
    Rng noise_rng(Rng::derive_seed(seed, 2));
    std::vector<TimedEvent> noise = synth::noise_events(config.dvs, config.sensor_width,
                                                        config.sensor_height, duration,
                                                        noise_rng);

    const double clock = 10000.0;
    const double dt = 1.0 / clock;
    const auto n_steps = static_cast<std::uint64_t>(std::llround(duration * clock));
    const auto window_steps = static_cast<std::uint64_t>(std::llround(clock * 0.001));

    SlipLog log;
    log.onset_s = t_disturb;

    SlipController ctrl;
    ctrl.k_mm_per_event = config.k_mm_per_event;
    ctrl.n_th = 0.0; // calibrated from the quiescent prefix below

    double slip_mm = 0.0;
    double vel_mm_s = 0.0;
    double load_n = m_obj * plant.gravity;
    double mass = m_obj;
    bool disturbed = false;
    bool calibrated = false;
    bool detected = false;

    std::vector<double> calib_counts;
    std::vector<TimedEvent> events;
    std::size_t noise_i = 0;
    std::uint64_t window_count = 0;

    for (std::uint64_t k = 0; k <= n_steps; ++k) {
        double t = static_cast<double>(k) / clock;

        if (!disturbed && t >= t_disturb) {
            // the dropped weight lands: extra load plus an impact impulse
            double v_impact = std::sqrt(2.0 * plant.gravity * drop_m);
            vel_mm_s += weight_kg * v_impact / (m_obj + weight_kg) * 1e3;
            mass = m_obj + weight_kg;
            load_n = mass * plant.gravity;
            disturbed = true;
        }

        // Coulomb friction, semi-implicit Euler
        double capacity = plant.mu * plant.normal_force_n;
        bool slipping = vel_mm_s > 1e-12 || load_n > capacity;
        if (slipping) {
            double accel_mm_s2 = (load_n - capacity) / mass * 1e3;
            vel_mm_s += accel_mm_s2 * dt;
            if (vel_mm_s < 0.0) vel_mm_s = 0.0;
            slip_mm += vel_mm_s * dt;
        }

        double shift_px = slip_mm * config.contact.px_per_mm;
        scene.step(k, 0.6, 0.0, shift_px, &events);

        if (k > 0 && k % window_steps == 0) {
            auto t_us = static_cast<std::uint64_t>(std::llround(t * 1e6));
            while (noise_i < noise.size() && noise[noise_i].t_us < t_us) {
                events.push_back(noise[noise_i]);
                ++noise_i;
            }
            double n_t = static_cast<double>(events.size());
            events.clear();

            double delta_d = 0.0;
            if (!calibrated) {
                if (t < config.calibration_prefix_s) {
                    calib_counts.push_back(n_t);
                } else {
                    double mean = 0.0, var = 0.0;
                    for (double c : calib_counts) mean += c;
                    mean /= std::max<std::size_t>(1, calib_counts.size());
                    for (double c : calib_counts) var += (c - mean) * (c - mean);
                    var /= std::max<std::size_t>(1, calib_counts.size());
                    ctrl.n_th = mean + 3.0 * std::sqrt(var);
                    log.n_th = ctrl.n_th;
                    calibrated = true;
                }
            }
            if (calibrated) {
                if (config.controller_enabled) {
                    delta_d = control_step(ctrl, n_t);
                    plant.normal_force_n += plant.advance_stiffness_n_per_mm * delta_d;
                }
                if (!detected && disturbed && n_t > ctrl.n_th) {
                    detected = true;
                    log.detection_latency_s = t - t_disturb;
                }
                if (detected && log.settle_time_s < 0.0 && vel_mm_s < 0.01) {
                    log.settle_time_s = t - t_disturb;
                }
            }

            log.records.push_back({t, n_t, delta_d, plant.normal_force_n, slip_mm,
                                   vel_mm_s > 1e-12});
            ++window_count;
        }

        if (!std::isfinite(slip_mm) || !std::isfinite(plant.normal_force_n)) {
            throw MixtacError("non-finite plant state at t=" + std::to_string(t));
        }
    }

    log.final_slip_mm = slip_mm;
    log.max_slip_mm = slip_mm;
    for (const auto& r : log.records) log.max_slip_mm = std::max(log.max_slip_mm, r.slip_mm);
    return log;
}

void write_slip_log(const SlipLog& log, const std::filesystem::path& csv_path) {
    std::ostringstream ss;
    ss << "t_s,n_t,delta_d_mm,normal_force_n,slip_mm,slipping\n";
    for (const auto& r : log.records) {
        ss << r.t_s << ',' << r.n_t << ',' << r.delta_d_mm << ',' << r.normal_force_n << ','
           << r.slip_mm << ',' << (r.slipping ? 1 : 0) << '\n';
    }
    std::ofstream out(csv_path);
    if (!out) throw MixtacError("cannot open " + csv_path.string());
    out << ss.str();
    if (!out.good()) throw MixtacError("I/O failure writing " + csv_path.string());
}

std::vector<ObjectSuiteRow> object_suite(const SlipTrialConfig& base, std::uint64_t seed,
                                         int threads) {
    const std::vector<std::string> names = {"rigid_sphere", "deformable_cup", "box"};
    std::vector<ObjectSuiteRow> rows;
    for (std::size_t oi = 0; oi < names.size(); ++oi) {
        ObjectPreset preset = object_preset(names[oi]);
        std::vector<double> slips(preset.suite_trials, 0.0);
        std::vector<double> latencies(preset.suite_trials, 0.0);
        SlipTrialConfig config = base;
        config.object = preset;
        parallel_for(static_cast<std::size_t>(preset.suite_trials), threads, [&](std::size_t i) {
            SlipLog log = run_slip_trial(config, Rng::derive_seed(seed, 10000 * (oi + 1) + i));
            slips[i] = log.final_slip_mm;
            latencies[i] = std::max(0.0, log.detection_latency_s);
        });
        ObjectSuiteRow row;
        row.object = names[oi];
        row.trials = preset.suite_trials;
        double mean = 0.0;
        for (double s : slips) mean += s;
        mean /= static_cast<double>(slips.size());
        double var = 0.0;
        for (double s : slips) var += (s - mean) * (s - mean);
        var /= static_cast<double>(slips.size());
        row.mean_slip_mm = mean;
        row.stddev_slip_mm = std::sqrt(var);
        double lat = 0.0;
        for (double l : latencies) lat += l;
        row.mean_latency_s = lat / static_cast<double>(latencies.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_object_suite_csv(const std::vector<ObjectSuiteRow>& rows,
                            const std::filesystem::path& csv_path) {
    std::ostringstream ss;
    ss << "object,trials,mean_slip_mm,stddev_slip_mm,mean_latency_s\n";
    for (const auto& r : rows) {
        ss << r.object << ',' << r.trials << ',' << r.mean_slip_mm << ',' << r.stddev_slip_mm
           << ',' << r.mean_latency_s << '\n';
    }
    std::ofstream out(csv_path);
    if (!out) throw MixtacError("cannot open " + csv_path.string());
    out << ss.str();
    if (!out.good()) throw MixtacError("I/O failure writing " + csv_path.string());
}

} // namespace mixtac::slipctl
