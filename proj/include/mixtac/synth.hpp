#pragma once

#include "mixtac/rng.hpp"
#include "mixtac/types.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mixtac::synth {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

struct Marker {
    double x0 = 0.0;          // rest position, pixels
    double y0 = 0.0;
    double depth_weight = 1.0; // [0,1], how strongly this marker follows depth
};

struct MarkerField {
    std::vector<Marker> markers;
    double blob_sigma = 1.3;  // pixels
    double background = 0.92; // intensity
    double blob_depth = 0.8;  // peak darkening under a marker
};

MarkerField random_marker_field(int width, int height, int count, Rng& rng);

// Hertz-type contact: F = k_h * d^{3/2}; markers inside the footprint move
// radially outward from the contact centre.
struct ContactModel {
    double effective_modulus = 1.0; // k_h, N per mm^1.5 (1 N at 1 mm)
    double indenter_radius_mm = 4.5;
    double center_x = 32.0; // pixels
    double center_y = 24.0;
    double spread_gain = 5.0; // pixels per mm of depth at the footprint centre
    double px_per_mm = 5.5;

    double contact_radius_px() const { return indenter_radius_mm * px_per_mm; }
};

double hertz_force(double k_h, double depth_mm);
double hertz_depth(double k_h, double force_n); // inverse

// Displaced position of one marker at the given indentation depth.
// Falloff is linear: 1 at the centre, 0 at the contact radius.
void displaced_marker(const ContactModel& contact, const Marker& m, double depth_mm,
                      double* x, double* y);

struct DvsModel {
    double contrast_threshold = 0.12; // log-intensity units
    std::uint64_t refractory_us = 200;
    double noise_rate = 0.5; // events per pixel per second
};

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class ScenarioKind { press_hold, vibration, drop_impact, slip_disturbance };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct Scenario {
    ScenarioKind kind = ScenarioKind::press_hold;
    double duration_s = 0.0; // default_scenario fills the per-kind value
    std::uint64_t seed = 0;
    std::map<std::string, double> params; // per-kind knobs, defaulted below

    double param(const std::string& key) const;
};

// Fills in the per-kind defaults (see implementation for the full table).
Scenario default_scenario(ScenarioKind kind, std::uint64_t seed = 0);

struct ScenarioProfile {
    double clock_hz = 10000.0;
    std::vector<double> depth_mm; // sampled at clock_hz from t = 0
    ForceTrace force;             // F = k_h * d^{3/2} at the force rate

    double depth_at(double t_s) const;
};

// Ground-truth depth trajectory and force trace for one scenario.
// Throws on invalid parameters (e.g. vibration above the force Nyquist).
ScenarioProfile force_profile(const Scenario& scenario, const ContactModel& contact,
                              double force_rate_hz = 800.0);

// ---------------------------------------------------------------------------
// Rendering and event emission
// ---------------------------------------------------------------------------

// Fresh render: background minus Gaussian blobs at displaced positions,
// clamped to [0,1] and quantized to 8-bit levels (APS output).
Frame render_frame(const MarkerField& field, const ContactModel& contact,
                   double depth_mm, double t_s, int width, int height);

// Generic DVS emission: per-pixel log-intensity references scanned against
// frame_fn on the internal clock, plus seeded Poisson noise events.
EventStream emit_events(const std::function<Frame(double)>& frame_fn, const DvsModel& dvs,
                        int width, int height, double duration_s, std::uint64_t seed,
                        double clock_hz = 10000.0);

// Incremental scene simulator: identical event semantics to emit_events over
// render_frame, but only marker patches are recomputed and scanned. slipctl
// drives it step by step with a rigid field shift.
class SceneDvs {
public:
    SceneDvs(const MarkerField& field, const ContactModel& contact, const DvsModel& dvs,
             int width, int height, double clock_hz = 10000.0);

    // Advance to step k (time k / clock_hz); appends signal events.
    void step(std::uint64_t k, double depth_mm, double shift_x_px, double shift_y_px,
              std::vector<TimedEvent>* out);

    const Frame& frame() const { return frame_; }
    int width() const { return width_; }
    int height() const { return height_; }

private:
    void render_patches(double depth_mm, double shift_x, double shift_y,
                        std::vector<std::uint32_t>* dirty);

    MarkerField field_;
    ContactModel contact_;
    DvsModel dvs_;
    int width_, height_;
    double clock_hz_;
    Frame frame_;
    std::vector<double> ref_log_;
    std::vector<std::int64_t> last_event_us_; // -inf sentinel when never fired
    std::vector<std::uint32_t> stamp_;
    std::uint32_t stamp_gen_ = 0;
    std::vector<double> prev_px_, prev_py_; // marker positions at last render
    std::vector<std::uint32_t> pending_;    // refractory-skipped pixels to re-check
    double last_depth_ = -1.0, last_sx_ = 0.0, last_sy_ = 0.0;
    bool rendered_ = false;
};

// Seeded Poisson background: uniformly placed in time and pixel, random sign.
std::vector<TimedEvent> noise_events(const DvsModel& dvs, int width, int height,
                                     double duration_s, Rng& rng);

// Merge two t-sorted event vectors (stable: a wins ties).
std::vector<TimedEvent> merge_events(std::vector<TimedEvent> a, std::vector<TimedEvent> b);

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct TrialSpec {
    Scenario scenario;
    int sensor_width = 64;
    int sensor_height = 48;
    int marker_count = 60;
    double frame_rate_hz = 25.0;
    double force_rate_hz = 800.0;
    ContactModel contact;
    DvsModel dvs;
    bool inject_impulses = true;
    double impulse_force_n = 0.8;
    double impulse_width_s = 0.040;
    double impulse_margin_s = 0.35; // centres at margin and duration - margin
    std::optional<std::pair<double, double>> plant_clock; // (a, b): events written in their own clock
};

// Writes trial_<n>/{events.bin, frames/, frames.csv, force.csv, manifest.json}
// plus a dataset manifest. Trials are independent and seeded, so generation
// may run on several workers with identical output.
void generate_dataset(const std::vector<TrialSpec>& trials,
                      const std::filesystem::path& out_dir, int threads = 1);

// Convenience: n trials of one scenario kind with derived per-trial seeds and
// (for training variety) per-trial parameter jitter.
std::vector<TrialSpec> make_trial_set(ScenarioKind kind, int n_trials, std::uint64_t seed,
                                      const TrialSpec& base, bool jitter = true);

} // namespace mixtac::synth
