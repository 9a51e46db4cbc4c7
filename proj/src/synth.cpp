#include "mixtac/synth.hpp"

#include "mixtac/threads.hpp"
#include "mixtac/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace mixtac::synth {

namespace {

constexpr double kLogEps = 1e-3; // inside log() so black pixels stay finite

double smooth01(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(M_PI * u));
}

double half_sine(double t, double t0, double width) {
    if (t < t0 || t > t0 + width) return 0.0;
    return std::sin(M_PI * (t - t0) / width);
}

} // namespace

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

MarkerField random_marker_field(int width, int height, int count, Rng& rng) {
    MarkerField field;
    double margin = 4.0 * field.blob_sigma + 1.0;
    for (int i = 0; i < count; ++i) {
        Marker m;
        m.x0 = rng.uniform(margin, width - margin);
        m.y0 = rng.uniform(margin, height - margin);
        m.depth_weight = rng.uniform(0.35, 1.0);
        field.markers.push_back(m);
    }
    return field;
}

double hertz_force(double k_h, double depth_mm) {
    if (depth_mm <= 0.0) return 0.0;
    return k_h * depth_mm * std::sqrt(depth_mm);
}

double hertz_depth(double k_h, double force_n) {
    if (force_n <= 0.0) return 0.0;
    return std::pow(force_n / k_h, 2.0 / 3.0);
}

void displaced_marker(const ContactModel& contact, const Marker& m, double depth_mm,
                      double* x, double* y) {
    double dx = m.x0 - contact.center_x;
    double dy = m.y0 - contact.center_y;
    double r = std::sqrt(dx * dx + dy * dy);
    double radius = contact.contact_radius_px();
    if (depth_mm <= 0.0 || r <= 0.0 || r >= radius) {
        *x = m.x0;
        *y = m.y0;
        return;
    }
    double falloff = 1.0 - r / radius;
    double disp = contact.spread_gain * depth_mm * m.depth_weight * falloff;
    *x = m.x0 + dx / r * disp;
    *y = m.y0 + dy / r * disp;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::press_hold: return "press_hold";
        case ScenarioKind::vibration: return "vibration";
        case ScenarioKind::drop_impact: return "drop_impact";
        case ScenarioKind::slip_disturbance: return "slip_disturbance";
    }
    return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "press_hold") return ScenarioKind::press_hold;
    if (name == "vibration") return ScenarioKind::vibration;
    if (name == "drop_impact") return ScenarioKind::drop_impact;
    if (name == "slip_disturbance") return ScenarioKind::slip_disturbance;
    throw MixtacError("unknown scenario kind: " + name);
}

double Scenario::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw MixtacError("missing scenario parameter: " + key);
    return it->second;
}

Scenario default_scenario(ScenarioKind kind, std::uint64_t seed) {
    Scenario s;
    s.kind = kind;
    s.seed = seed;
    switch (kind) {
        case ScenarioKind::press_hold:
            s.duration_s = 28.0;
            s.params = {{"target_force_n", 1.0}, {"contact_start_s", 0.8}, {"ramp_s", 1.5}};
            break;
        case ScenarioKind::vibration:
            s.duration_s = 2.5;
            s.params = {{"freq_hz", 150.0}, {"bias_mm", 0.38},   {"amp_mm", 0.5},
                        {"contact_start_s", 0.25}, {"ramp_s", 0.2}};
            break;
        case ScenarioKind::drop_impact:
            s.duration_s = 6.0;
            s.params = {{"impact_time_s", 1.2}, {"weight_g", 20.0},
                        {"peak1_n", 0.9},       {"peak1_width_s", 0.06},
                        {"bounce_gap_s", 0.12}, {"peak2_n", 0.45},
                        {"peak2_width_s", 0.05}, {"settle_gap_s", 0.05},
                        {"settle_ramp_s", 0.25}};
            break;
        case ScenarioKind::slip_disturbance:
            s.duration_s = 3.0;
            s.params = {{"disturb_time_s", 1.5}, {"weight_g", 100.0}, {"drop_cm", 5.0},
                        {"base_force_n", 2.0},   {"step_n", 1.0}};
            break;
    }
    return s;
}

namespace {

// Analytic indentation depth for a scenario; force-space kinds go through the
// inverse Hertz law so the emitted force trace matches exactly.
std::function<double(double)> scenario_depth_fn(const Scenario& sc, const ContactModel& contact,
                                                double force_rate_hz) {
    const double k_h = contact.effective_modulus;
    switch (sc.kind) {
        case ScenarioKind::press_hold: {
            double plateau = hertz_depth(k_h, sc.param("target_force_n"));
            double start = sc.param("contact_start_s");
            double ramp = sc.param("ramp_s");
            return [=](double t) { return plateau * smooth01((t - start) / ramp); };
        }
        case ScenarioKind::vibration: {
            double f = sc.param("freq_hz");
            if (f <= 0.0) throw MixtacError("vibration frequency must be positive");
            if (f > force_rate_hz / 2.0) {
                throw MixtacError("vibration frequency " + std::to_string(f) +
                                  " Hz above force-trace Nyquist " +
                                  std::to_string(force_rate_hz / 2.0) + " Hz");
            }
            double bias = sc.param("bias_mm");
            double amp = sc.param("amp_mm");
            double start = sc.param("contact_start_s");
            double ramp = sc.param("ramp_s");
            double osc0 = start + ramp;
            return [=](double t) {
                if (t < osc0) return bias * smooth01((t - start) / ramp);
                return std::max(0.0, bias + amp * std::sin(2.0 * M_PI * f * (t - osc0)));
            };
        }
        case ScenarioKind::drop_impact: {
            double t1 = sc.param("impact_time_s");
            double w1 = sc.param("peak1_width_s");
            double p1 = sc.param("peak1_n");
            double gap = sc.param("bounce_gap_s");
            double w2 = sc.param("peak2_width_s");
            double p2 = sc.param("peak2_n");
            double sg = sc.param("settle_gap_s");
            double sr = sc.param("settle_ramp_s");
            double plateau = sc.param("weight_g") * 1e-3 * 9.81;
            double t2 = t1 + w1 + gap;
            double ts = t2 + w2 + sg;
            return [=](double t) {
                double force = p1 * half_sine(t, t1, w1) + p2 * half_sine(t, t2, w2);
                if (t >= ts) force = std::max(force, plateau * smooth01((t - ts) / sr));
                return hertz_depth(k_h, force);
            };
        }
        case ScenarioKind::slip_disturbance: {
            double base = sc.param("base_force_n");
            double td = sc.param("disturb_time_s");
            double step = sc.param("step_n");
            return [=](double t) {
                double force = base + step * smooth01((t - td) / 0.005);
                return hertz_depth(k_h, force);
            };
        }
    }
    throw MixtacError("unhandled scenario kind");
}

} // namespace

double ScenarioProfile::depth_at(double t_s) const {
    double idx = t_s * clock_hz;
    if (idx <= 0.0) return depth_mm.front();
    auto n = static_cast<double>(depth_mm.size() - 1);
    if (idx >= n) return depth_mm.back();
    std::size_t i = static_cast<std::size_t>(idx);
    double w = idx - static_cast<double>(i);
    return depth_mm[i] * (1.0 - w) + depth_mm[i + 1] * w;
}

ScenarioProfile force_profile(const Scenario& scenario, const ContactModel& contact,
                              double force_rate_hz) {
    if (scenario.duration_s <= 0.0) throw MixtacError("scenario duration must be positive");
    auto depth_fn = scenario_depth_fn(scenario, contact, force_rate_hz);

    ScenarioProfile profile;
    auto n_steps = static_cast<std::size_t>(std::llround(scenario.duration_s * profile.clock_hz));
    profile.depth_mm.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        profile.depth_mm[k] = depth_fn(static_cast<double>(k) / profile.clock_hz);
    }

    profile.force.rate_hz = force_rate_hz;
    auto n_force = static_cast<std::size_t>(std::llround(scenario.duration_s * force_rate_hz));
    profile.force.samples.resize(n_force);
    for (std::size_t i = 0; i < n_force; ++i) {
        double t = static_cast<double>(i) / force_rate_hz;
        profile.force.samples[i] = {t, hertz_force(contact.effective_modulus, depth_fn(t))};
    }
    return profile;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

// Subtract one Gaussian blob into the buffer (separable, 4-sigma support).
void draw_blob(std::vector<double>& px, int width, int height, double mx, double my,
               double sigma, double depth) {
    double R = 4.0 * sigma;
    int x0 = std::max(0, static_cast<int>(std::ceil(mx - R)));
    int x1 = std::min(width - 1, static_cast<int>(std::floor(mx + R)));
    int y0 = std::max(0, static_cast<int>(std::ceil(my - R)));
    int y1 = std::min(height - 1, static_cast<int>(std::floor(my + R)));
    if (x0 > x1 || y0 > y1) return;
    double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    double gx[64];
    int nx = x1 - x0 + 1;
    for (int i = 0; i < nx && i < 64; ++i) {
        double d = (x0 + i) - mx;
        gx[i] = std::exp(-d * d * inv2s2);
    }
    for (int y = y0; y <= y1; ++y) {
        double dy = y - my;
        double gy = depth * std::exp(-dy * dy * inv2s2);
        double* row = px.data() + static_cast<std::size_t>(y) * width;
        for (int i = 0; i < nx; ++i) row[x0 + i] -= gy * gx[i];
    }
}

void render_into(std::vector<double>& px, const MarkerField& field, const ContactModel& contact,
                 double depth_mm, double shift_x, double shift_y, int width, int height) {
    std::fill(px.begin(), px.end(), field.background);
    for (const Marker& m : field.markers) {
        double x, y;
        displaced_marker(contact, m, depth_mm, &x, &y);
        draw_blob(px, width, height, x + shift_x, y + shift_y, field.blob_sigma, field.blob_depth);
    }
    for (double& v : px) {
        long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        v = static_cast<double>(q) / 255.0;
    }
}

} // namespace

Frame render_frame(const MarkerField& field, const ContactModel& contact, double depth_mm,
                   double t_s, int width, int height) {
    if (depth_mm < 0.0) throw MixtacError("render_frame: negative depth");
    if (field.blob_sigma <= 0.0) throw MixtacError("blob_sigma must be positive");
    Frame f;
    f.t_us = static_cast<std::uint64_t>(std::llround(t_s * 1e6));
    f.width = width;
    f.height = height;
    f.pixels.resize(static_cast<std::size_t>(width) * height);
    render_into(f.pixels, field, contact, depth_mm, 0.0, 0.0, width, height);
    return f;
}

// ---------------------------------------------------------------------------
// Event emission
// ---------------------------------------------------------------------------

EventStream emit_events(const std::function<Frame(double)>& frame_fn, const DvsModel& dvs,
                        int width, int height, double duration_s, std::uint64_t seed,
                        double clock_hz) {
    if (duration_s <= 0.0) throw MixtacError("emit_events: duration must be positive");
    if (dvs.contrast_threshold <= 0.0) throw MixtacError("contrast_threshold must be positive");
    if (dvs.noise_rate < 0.0) throw MixtacError("noise_rate must be non-negative");

    const std::size_t npx = static_cast<std::size_t>(width) * height;
    std::vector<double> ref(npx);
    std::vector<std::int64_t> last(npx, std::numeric_limits<std::int64_t>::min() / 2);
    std::vector<TimedEvent> signal;

    auto n_steps = static_cast<std::uint64_t>(std::llround(duration_s * clock_hz));
    for (std::uint64_t k = 0; k <= n_steps; ++k) {
        double t = static_cast<double>(k) / clock_hz;
        Frame f = frame_fn(t);
        if (f.width != width || f.height != height) {
            throw MixtacError("emit_events: frame size changed mid-stream");
        }
        if (k == 0) {
            for (std::size_t i = 0; i < npx; ++i) ref[i] = std::log(f.pixels[i] + kLogEps);
            continue;
        }
        auto t_us = static_cast<std::int64_t>(std::llround(t * 1e6));
        for (std::size_t i = 0; i < npx; ++i) {
            if (t_us - last[i] < static_cast<std::int64_t>(dvs.refractory_us)) continue;
            double L = std::log(f.pixels[i] + kLogEps);
            double d = L - ref[i];
            if (std::abs(d) >= dvs.contrast_threshold) {
                signal.push_back({static_cast<std::uint64_t>(t_us),
                                  static_cast<std::uint16_t>(i % width),
                                  static_cast<std::uint16_t>(i / width),
                                  static_cast<std::int8_t>(d > 0 ? 1 : -1)});
                ref[i] = L;
                last[i] = t_us;
            }
        }
    }

    Rng rng(seed);
    std::vector<TimedEvent> noise = noise_events(dvs, width, height, duration_s, rng);

    EventStream out;
    out.width = static_cast<std::uint16_t>(width);
    out.height = static_cast<std::uint16_t>(height);
    out.events = merge_events(std::move(signal), std::move(noise));
    return out;
}

std::vector<TimedEvent> noise_events(const DvsModel& dvs, int width, int height,
                                     double duration_s, Rng& rng) {
    std::vector<TimedEvent> noise;
    if (dvs.noise_rate <= 0.0) return noise;
    const std::size_t npx = static_cast<std::size_t>(width) * height;
    std::uint64_t count = rng.poisson(dvs.noise_rate * static_cast<double>(npx) * duration_s);
    noise.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        TimedEvent e;
        e.t_us = static_cast<std::uint64_t>(std::llround(rng.uniform01() * duration_s * 1e6));
        std::uint64_t px = rng.below(npx);
        e.x = static_cast<std::uint16_t>(px % static_cast<std::size_t>(width));
        e.y = static_cast<std::uint16_t>(px / static_cast<std::size_t>(width));
        e.polarity = rng.uniform01() < 0.5 ? static_cast<std::int8_t>(1) : static_cast<std::int8_t>(-1);
        noise.push_back(e);
    }
    std::stable_sort(noise.begin(), noise.end(),
                     [](const TimedEvent& a, const TimedEvent& b) { return a.t_us < b.t_us; });
    return noise;
}

std::vector<TimedEvent> merge_events(std::vector<TimedEvent> a, std::vector<TimedEvent> b) {
    if (b.empty()) return a;
    if (a.empty()) return b;
    std::vector<TimedEvent> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
               [](const TimedEvent& x, const TimedEvent& y) { return x.t_us < y.t_us; });
    return out;
}

// ---------------------------------------------------------------------------
// SceneDvs
// ---------------------------------------------------------------------------

SceneDvs::SceneDvs(const MarkerField& field, const ContactModel& contact, const DvsModel& dvs,
                   int width, int height, double clock_hz)
    : field_(field), contact_(contact), dvs_(dvs), width_(width), height_(height),
      clock_hz_(clock_hz) {
    if (dvs.contrast_threshold <= 0.0) throw MixtacError("contrast_threshold must be positive");
    const std::size_t npx = static_cast<std::size_t>(width) * height;
    frame_.width = width;
    frame_.height = height;
    frame_.pixels.assign(npx, field.background);
    ref_log_.assign(npx, 0.0);
    last_event_us_.assign(npx, std::numeric_limits<std::int64_t>::min() / 2);
    stamp_.assign(npx, 0);
    prev_px_.assign(field.markers.size(), -1e9);
    prev_py_.assign(field.markers.size(), -1e9);
}

void SceneDvs::render_patches(double depth_mm, double shift_x, double shift_y,
                              std::vector<std::uint32_t>* dirty) {
    // dirty = union of old and new 4-sigma patches of every marker, then a
    // full fresh render (same arithmetic as render_frame)
    ++stamp_gen_;
    const double R = 4.0 * field_.blob_sigma;
    auto mark_rect = [&](double cx, double cy) {
        int x0 = std::max(0, static_cast<int>(std::ceil(cx - R)));
        int x1 = std::min(width_ - 1, static_cast<int>(std::floor(cx + R)));
        int y0 = std::max(0, static_cast<int>(std::ceil(cy - R)));
        int y1 = std::min(height_ - 1, static_cast<int>(std::floor(cy + R)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                auto i = static_cast<std::uint32_t>(y * width_ + x);
                if (stamp_[i] != stamp_gen_) {
                    stamp_[i] = stamp_gen_;
                    dirty->push_back(i);
                }
            }
        }
    };
    for (std::size_t m = 0; m < field_.markers.size(); ++m) {
        double x, y;
        displaced_marker(contact_, field_.markers[m], depth_mm, &x, &y);
        x += shift_x;
        y += shift_y;
        if (rendered_) mark_rect(prev_px_[m], prev_py_[m]);
        mark_rect(x, y);
        prev_px_[m] = x;
        prev_py_[m] = y;
    }
    render_into(frame_.pixels, field_, contact_, depth_mm, shift_x, shift_y, width_, height_);
}

void SceneDvs::step(std::uint64_t k, double depth_mm, double shift_x_px, double shift_y_px,
                    std::vector<TimedEvent>* out) {
    double t = static_cast<double>(k) / clock_hz_;
    auto t_us = static_cast<std::int64_t>(std::llround(t * 1e6));
    frame_.t_us = static_cast<std::uint64_t>(t_us);

    bool moved = !rendered_ || depth_mm != last_depth_ || shift_x_px != last_sx_ ||
                 shift_y_px != last_sy_;
    std::vector<std::uint32_t> dirty;
    if (moved) {
        render_patches(depth_mm, shift_x_px, shift_y_px, &dirty);
        last_depth_ = depth_mm;
        last_sx_ = shift_x_px;
        last_sy_ = shift_y_px;
    }

    if (!rendered_) {
        // first step only initializes the per-pixel references
        for (std::size_t i = 0; i < frame_.pixels.size(); ++i) {
            ref_log_[i] = std::log(frame_.pixels[i] + kLogEps);
        }
        rendered_ = true;
        return;
    }

    auto scan_px = [&](std::uint32_t i) {
        if (t_us - last_event_us_[i] < static_cast<std::int64_t>(dvs_.refractory_us)) {
            pending_.push_back(i); // re-check once the refractory period ends
            return;
        }
        double L = std::log(frame_.pixels[i] + kLogEps);
        double d = L - ref_log_[i];
        if (std::abs(d) >= dvs_.contrast_threshold) {
            out->push_back({static_cast<std::uint64_t>(t_us),
                            static_cast<std::uint16_t>(i % width_),
                            static_cast<std::uint16_t>(i / width_),
                            static_cast<std::int8_t>(d > 0 ? 1 : -1)});
            ref_log_[i] = L;
            last_event_us_[i] = t_us;
        }
    };

    // pixels whose intensity may have changed this step, plus ones skipped
    // earlier because of refractory holdoff; scanned in raster order so the
    // within-step event order matches a full-frame scan
    std::vector<std::uint32_t> recheck;
    recheck.swap(pending_);
    ++stamp_gen_;
    std::vector<std::uint32_t> scan;
    scan.reserve(dirty.size() + recheck.size());
    for (std::uint32_t i : dirty) {
        if (stamp_[i] == stamp_gen_) continue;
        stamp_[i] = stamp_gen_;
        scan.push_back(i);
    }
    for (std::uint32_t i : recheck) {
        if (stamp_[i] == stamp_gen_) continue;
        stamp_[i] = stamp_gen_;
        scan.push_back(i);
    }
    std::sort(scan.begin(), scan.end());
    for (std::uint32_t i : scan) scan_px(i);
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

namespace {

nlohmann::json contact_to_json(const ContactModel& c) {
    return {{"effective_modulus", c.effective_modulus},
            {"indenter_radius_mm", c.indenter_radius_mm},
            {"center_x", c.center_x},
            {"center_y", c.center_y},
            {"spread_gain", c.spread_gain},
            {"px_per_mm", c.px_per_mm}};
}

nlohmann::json dvs_to_json(const DvsModel& d) {
    return {{"contrast_threshold", d.contrast_threshold},
            {"refractory_us", d.refractory_us},
            {"noise_rate", d.noise_rate}};
}

void generate_trial(const TrialSpec& spec, const std::filesystem::path& trial_dir) {
    std::filesystem::create_directories(trial_dir);
    const Scenario& sc = spec.scenario;
    const double duration = sc.duration_s;
    const double clock = 10000.0;

    Rng field_rng(Rng::derive_seed(sc.seed, 1));
    MarkerField field =
        random_marker_field(spec.sensor_width, spec.sensor_height, spec.marker_count, field_rng);

    auto scenario_fn = scenario_depth_fn(sc, spec.contact, spec.force_rate_hz);
    double imp_depth = hertz_depth(spec.contact.effective_modulus, spec.impulse_force_n);
    double imp1 = spec.impulse_margin_s - spec.impulse_width_s / 2.0;
    double imp2 = duration - spec.impulse_margin_s - spec.impulse_width_s / 2.0;
    auto depth_fn = [&](double t) {
        double d = scenario_fn(t);
        if (spec.inject_impulses) {
            d += imp_depth * half_sine(t, imp1, spec.impulse_width_s);
            d += imp_depth * half_sine(t, imp2, spec.impulse_width_s);
        }
        return d;
    };

    // events
    SceneDvs scene(field, spec.contact, spec.dvs, spec.sensor_width, spec.sensor_height, clock);
    std::vector<TimedEvent> signal;
    auto n_steps = static_cast<std::uint64_t>(std::llround(duration * clock));
    for (std::uint64_t k = 0; k <= n_steps; ++k) {
        scene.step(k, depth_fn(static_cast<double>(k) / clock), 0.0, 0.0, &signal);
    }
    Rng noise_rng(Rng::derive_seed(sc.seed, 2));
    EventStream stream;
    stream.width = static_cast<std::uint16_t>(spec.sensor_width);
    stream.height = static_cast<std::uint16_t>(spec.sensor_height);
    stream.events = merge_events(
        std::move(signal),
        noise_events(spec.dvs, spec.sensor_width, spec.sensor_height, duration, noise_rng));

    if (spec.plant_clock) {
        // events are recorded in the camera's own clock: t_event = (t_force - b)/a;
        // pre-start samples (negative times) never existed on that clock
        auto [a, b] = *spec.plant_clock;
        std::vector<TimedEvent> remapped;
        remapped.reserve(stream.events.size());
        for (TimedEvent e : stream.events) {
            double t_event = (e.t_s() - b) / a;
            if (t_event < 0.0) continue;
            e.t_us = static_cast<std::uint64_t>(std::llround(t_event * 1e6));
            remapped.push_back(e);
        }
        stream.events = std::move(remapped);
    }
    io::write_events(stream, trial_dir / "events.bin");

    // frames at the configured rate
    std::vector<Frame> frames;
    auto n_frames = static_cast<std::uint64_t>(std::floor(duration * spec.frame_rate_hz)) + 1;
    frames.reserve(n_frames);
    for (std::uint64_t k = 0; k < n_frames; ++k) {
        double t = static_cast<double>(k) / spec.frame_rate_hz;
        frames.push_back(render_frame(field, spec.contact, depth_fn(t), t, spec.sensor_width,
                                      spec.sensor_height));
    }
    io::write_frame_sequence(frames, trial_dir);

    // force trace
    ForceTrace force;
    force.rate_hz = spec.force_rate_hz;
    auto n_force = static_cast<std::size_t>(std::llround(duration * spec.force_rate_hz));
    force.samples.resize(n_force);
    for (std::size_t i = 0; i < n_force; ++i) {
        double t = static_cast<double>(i) / spec.force_rate_hz;
        force.samples[i] = {t, hertz_force(spec.contact.effective_modulus, depth_fn(t))};
    }
    io::write_force(force, trial_dir / "force.csv");

    nlohmann::json manifest = {
        {"scenario",
         {{"kind", to_string(sc.kind)},
          {"duration_s", sc.duration_s},
          {"seed", sc.seed},
          {"params", sc.params}}},
        {"sensor", {{"width", spec.sensor_width}, {"height", spec.sensor_height}}},
        {"marker_count", spec.marker_count},
        {"frame_rate_hz", spec.frame_rate_hz},
        {"force_rate_hz", spec.force_rate_hz},
        {"contact", contact_to_json(spec.contact)},
        {"dvs", dvs_to_json(spec.dvs)},
        {"n_events", stream.events.size()},
        {"n_frames", frames.size()}};
    if (spec.inject_impulses) {
        manifest["impulses"] = {{"force_n", spec.impulse_force_n},
                                {"width_s", spec.impulse_width_s},
                                {"center1_s", spec.impulse_margin_s},
                                {"center2_s", duration - spec.impulse_margin_s}};
    }
    if (spec.plant_clock) {
        manifest["planted_clock"] = {{"a", spec.plant_clock->first},
                                     {"b", spec.plant_clock->second}};
    }
    std::ofstream mf(trial_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf.good()) throw MixtacError("failed to write trial manifest");
}

} // namespace

void generate_dataset(const std::vector<TrialSpec>& trials,
                      const std::filesystem::path& out_dir, int threads) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> names(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "trial_%03zu", i);
        names[i] = buf;
    }
    parallel_for(trials.size(), threads,
                 [&](std::size_t i) { generate_trial(trials[i], out_dir / names[i]); });

    nlohmann::json manifest;
    manifest["trials"] = nlohmann::json::array();
    for (std::size_t i = 0; i < trials.size(); ++i) {
        manifest["trials"].push_back({{"name", names[i]},
                                      {"kind", to_string(trials[i].scenario.kind)},
                                      {"seed", trials[i].scenario.seed},
                                      {"duration_s", trials[i].scenario.duration_s}});
    }
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf.good()) throw MixtacError("failed to write dataset manifest");
}

std::vector<TrialSpec> make_trial_set(ScenarioKind kind, int n_trials, std::uint64_t seed,
                                      const TrialSpec& base, bool with_jitter) {
    std::vector<TrialSpec> trials;
    trials.reserve(n_trials);
    for (int i = 0; i < n_trials; ++i) {
        TrialSpec spec = base;
        if (spec.scenario.params.empty()) spec.scenario = default_scenario(kind);
        if (base.scenario.duration_s > 0.0) spec.scenario.duration_s = base.scenario.duration_s;
        spec.scenario.kind = kind;
        spec.scenario.seed = Rng::derive_seed(seed, static_cast<std::uint64_t>(i));
        if (!with_jitter) {
            trials.push_back(std::move(spec));
            continue;
        }
        // per-trial variety so plateau levels / tones / peaks span the range
        Rng jitter(Rng::derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
        switch (kind) {
            case ScenarioKind::press_hold:
                spec.scenario.params["target_force_n"] = 0.15 + 0.85 * jitter.uniform01();
                break;
            case ScenarioKind::vibration: {
                spec.scenario.params["freq_hz"] = jitter.uniform(8.0, 26.0);
                spec.scenario.params["bias_mm"] = jitter.uniform(0.3, 0.5);
                spec.scenario.params["amp_mm"] = spec.scenario.params["bias_mm"] *
                                                 jitter.uniform(1.1, 1.5);
                break;
            }
            case ScenarioKind::drop_impact: {
                double p1 = jitter.uniform(0.7, 1.0);
                spec.scenario.params["peak1_n"] = p1;
                spec.scenario.params["peak2_n"] = p1 * jitter.uniform(0.4, 0.6);
                spec.scenario.params["impact_time_s"] = jitter.uniform(1.0, 1.6);
                break;
            }
            case ScenarioKind::slip_disturbance:
                break;
        }
        trials.push_back(std::move(spec));
    }
    return trials;
}

} // namespace mixtac::synth
