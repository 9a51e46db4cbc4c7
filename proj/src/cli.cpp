#include "mixtac/cli.hpp"

#include "mixtac/align.hpp"
#include "mixtac/analysis.hpp"
#include "mixtac/fger.hpp"
#include "mixtac/io.hpp"
#include "mixtac/packetize.hpp"
#include "mixtac/slipctl.hpp"
#include "mixtac/synth.hpp"
#include "mixtac/threads.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace mixtac::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Every run drops a manifest next to its outputs; a manifest is enough to
// re-run the command (see `mixtac replay`).
void write_run_manifest(const std::string& command, const json& config,
                        std::uint64_t seed, double wall_s,
                        const std::filesystem::path& where) {
    json manifest = {{"command", command},
                     {"config", config},
                     {"seed", seed},
                     {"versions", {{"mixtac", kVersion}}},
                     {"wall_time_s", wall_s}};
    std::filesystem::path path = where;
    if (std::filesystem::is_directory(where)) {
        path = where / "run_manifest.json";
    } else {
        path = where.string() + ".run.json";
    }
    std::ofstream out(path);
    out << manifest.dump(2) << "\n";
    if (!out.good()) throw MixtacError("failed to write run manifest " + path.string());
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<double> parse_tone_spec(const std::string& text) {
    // "50:250:25" or "50,75,100"
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
        if (parts.size() != 3 || parts[2] <= 0.0) throw MixtacError("bad tone range: " + text);
        std::vector<double> tones;
        for (double f = parts[0]; f <= parts[1] + 1e-9; f += parts[2]) tones.push_back(f);
        return tones;
    }
    return parse_csv_doubles(text);
}

void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw CLI::ValidationError("path does not exist: " + p.string());
}

PredictionTrace read_pred_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MixtacError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_s,f_hat_n", 0) != 0) {
        throw MixtacError("bad prediction header in " + path.string());
    }
    PredictionTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto vals = parse_csv_doubles(line);
        if (vals.size() < 2) throw MixtacError("bad prediction row: " + line);
        trace.samples.push_back({vals[0], vals[1], vals.size() > 2 && vals[2] != 0.0});
    }
    return trace;
}

void write_pred_csv(const PredictionTrace& trace, const std::filesystem::path& path) {
    std::ostringstream ss;
    ss << "t_s,f_hat_n,corrected\n";
    char buf[80];
    for (const PredictionSample& s : trace.samples) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.9g,%d\n", s.t_s, s.f_hat_n, s.corrected ? 1 : 0);
        ss << buf;
    }
    std::ofstream out(path);
    if (!out) throw MixtacError("cannot open " + path.string());
    out << ss.str();
    if (!out.good()) throw MixtacError("I/O failure writing " + path.string());
}

// zero-order hold onto a fixed grid, for cadence-fair model comparisons
PredictionTrace hold_resample(const PredictionTrace& trace, double delta_t, double t0, double t1) {
    PredictionTrace out;
    if (trace.samples.empty()) return out;
    std::size_t i = 0;
    for (double t = t0; t <= t1 + 1e-12; t += delta_t) {
        while (i + 1 < trace.samples.size() && trace.samples[i + 1].t_s <= t + 1e-12) ++i;
        if (trace.samples[i].t_s > t + 1e-9) continue; // before the first update
        out.samples.push_back({t, trace.samples[i].f_hat_n, trace.samples[i].corrected});
    }
    return out;
}

json metrics_to_json(const analysis::MetricReport& m) {
    return {{"mae_n", m.mae_n}, {"rmse_n", m.rmse_n}, {"r2", m.r2}, {"n", m.n}};
}

json rolling_to_json(const std::vector<analysis::RollingMaeBin>& bins, double window_s) {
    json rb = json::array();
    for (const auto& b : bins) {
        rb.push_back({{"t0", b.t0}, {"t1", b.t1}, {"median", b.median}, {"n", b.n}});
    }
    return {{"window_s", window_s}, {"bins", rb}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string scenario = "press_hold";
    int trials = 1;
    std::string out;
    std::uint64_t seed = 1;
    double duration = 0.0;
    int sensor_width = 64, sensor_height = 48, markers = 60;
    double frame_rate = 25.0, force_rate = 800.0;
    double contrast = 0.12, noise_rate = 0.5;
    std::uint64_t refractory_us = 200;
    bool no_impulses = false;
    bool no_jitter = false;
    std::string plant_clock; // "a,b"
    std::vector<std::string> params;
    int threads = 0;
};

json simulate_config_json(const SimulateArgs& a) {
    return {{"scenario", a.scenario}, {"trials", a.trials}, {"out", a.out},
            {"seed", a.seed},         {"duration", a.duration},
            {"sensor-width", a.sensor_width}, {"sensor-height", a.sensor_height},
            {"markers", a.markers},   {"frame-rate", a.frame_rate},
            {"force-rate", a.force_rate}, {"contrast", a.contrast},
            {"noise-rate", a.noise_rate}, {"refractory-us", a.refractory_us},
            {"no-impulses", a.no_impulses}, {"no-jitter", a.no_jitter},
            {"plant-clock", a.plant_clock}, {"param", a.params}};
}

int cmd_simulate(const SimulateArgs& a) {
    Timer timer;
    synth::TrialSpec base;
    base.scenario = synth::default_scenario(synth::scenario_kind_from_string(a.scenario));
    if (a.duration > 0.0) base.scenario.duration_s = a.duration;
    base.sensor_width = a.sensor_width;
    base.sensor_height = a.sensor_height;
    base.marker_count = a.markers;
    base.frame_rate_hz = a.frame_rate;
    base.force_rate_hz = a.force_rate;
    base.contact.center_x = a.sensor_width / 2.0;
    base.contact.center_y = a.sensor_height / 2.0;
    base.dvs = {a.contrast, a.refractory_us, a.noise_rate};
    base.inject_impulses = !a.no_impulses;
    if (!a.plant_clock.empty()) {
        auto ab = parse_csv_doubles(a.plant_clock);
        if (ab.size() != 2 || ab[0] <= 0.0) throw MixtacError("bad --plant-clock (want a,b with a > 0)");
        base.plant_clock = {ab[0], ab[1]};
    }

    auto trials = synth::make_trial_set(base.scenario.kind, a.trials, a.seed, base,
                                        /*jitter=*/!a.no_jitter);
    for (auto& t : trials) {
        for (const std::string& kv : a.params) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw MixtacError("bad --param (want key=value): " + kv);
            t.scenario.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        }
    }
    synth::generate_dataset(trials, a.out, thread_budget(a.threads));
    write_run_manifest("simulate", simulate_config_json(a), a.seed, timer.seconds(), a.out);
    std::cout << "wrote " << trials.size() << " trial(s) to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

struct AlignArgs {
    std::string events, force, out;
    std::string windows; // t0,t1,t2,t3
    double bin = 0.005;
    int smooth = 3;
    double impulse_width = 0.04;
};

int cmd_align(const AlignArgs& a) {
    Timer timer;
    auto ws = parse_csv_doubles(a.windows);
    if (ws.size() != 4) throw MixtacError("--impulse-windows wants t0,t1,t2,t3");

    EventStream events = io::read_events(a.events);
    ForceTrace force = io::read_force(a.force);

    auto event_anchor = [&](double t0, double t1) {
        double lo = t0, hi = t1;
        if (hi - lo > 3.0 * a.impulse_width) {
            // coarse window: bracket the burst first so the trough search sees
            // only the high-zero-high profile
            double center = align::locate_burst(events, t0, t1, a.bin, a.smooth);
            lo = center - 0.625 * a.impulse_width;
            hi = center + 0.625 * a.impulse_width;
        }
        return align::detect_event_trough(events, lo, hi, a.bin, a.smooth);
    };

    align::AnchorPair p1{event_anchor(ws[0], ws[1]), align::detect_force_peak(force, ws[0], ws[1])};
    align::AnchorPair p2{event_anchor(ws[2], ws[3]), align::detect_force_peak(force, ws[2], ws[3])};
    align::ClockMap map = align::solve_clock_map(p1, p2);
    std::cout << "a=" << std::setprecision(12) << map.a << " b=" << map.b << "\n";

    if (!a.out.empty()) {
        io::write_events(align::apply_clock_map(map, events), a.out);
        json cfg = {{"events", a.events}, {"force", a.force}, {"impulse-windows", a.windows},
                    {"bin", a.bin},       {"smooth", a.smooth}, {"out", a.out},
                    {"impulse-width", a.impulse_width}};
        write_run_manifest("align", cfg, 0, timer.seconds(), a.out);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// packetize
// ---------------------------------------------------------------------------

struct PacketizeArgs {
    std::string trial;
    double delta_t = 0.002;
    bool guide_next = false;
    std::string out;
};

int cmd_packetize(const PacketizeArgs& a) {
    Timer timer;
    packetize::PacketizeConfig pc;
    pc.delta_t_s = a.delta_t;
    pc.guide_is_closing_frame = a.guide_next;
    fger::TrialData trial = fger::load_trial(a.trial, pc);
    std::filesystem::path out = a.out.empty() ? std::filesystem::path(a.trial) / "cycles.idx"
                                              : std::filesystem::path(a.out);
    packetize::write_cycle_index(trial.cycles, out);
    json cfg = {{"trial", a.trial}, {"delta-t", a.delta_t}, {"guide-next", a.guide_next},
                {"out", out.string()}};
    write_run_manifest("packetize", cfg, 0, timer.seconds(), out);
    std::cout << "wrote " << trial.cycles.size() << " cycles to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train / ablate
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data, out;
    std::string variant = "fusion";
    int epochs = 50, batch = 128;
    double lr = 1e-4, weight_decay = 0.01, lambda = 0.2, val_fraction = 0.2;
    double delta_t = 0.002;
    std::uint64_t seed = 1;
    int threads = 0;
    bool correct_every_packet = false;
    int event_hidden = 32, de = 32, df = 32, hidden = 64, head_hidden = 32, channels = 6;
    int raster_feature = 16;
};

json train_config_json(const TrainArgs& a) {
    return {{"data", a.data},     {"out", a.out},       {"variant", a.variant},
            {"epochs", a.epochs}, {"batch", a.batch},   {"lr", a.lr},
            {"weight-decay", a.weight_decay}, {"lambda", a.lambda},
            {"val-fraction", a.val_fraction}, {"delta-t", a.delta_t},
            {"seed", a.seed},     {"correct-every-packet", a.correct_every_packet},
            {"event-hidden", a.event_hidden}, {"de", a.de}, {"df", a.df},
            {"hidden", a.hidden}, {"head-hidden", a.head_hidden},
            {"channels", a.channels}, {"raster-feature", a.raster_feature}};
}

int cmd_train(const TrainArgs& a) {
    Timer timer;
    packetize::PacketizeConfig pc;
    pc.delta_t_s = a.delta_t;
    auto trials = fger::load_dataset(a.data, pc);
    if (trials.empty()) throw MixtacError("dataset has no trials");

    fger::TrainConfig cfg;
    cfg.variant = fger::variant_from_string(a.variant);
    cfg.model.event_enc = {a.event_hidden, a.de};
    cfg.model.frame_enc.width = trials.front().frames.front().width;
    cfg.model.frame_enc.height = trials.front().frames.front().height;
    cfg.model.frame_enc.channels = a.channels;
    cfg.model.frame_enc.out = a.df;
    cfg.model.lstm_hidden = a.hidden;
    cfg.model.head_hidden = a.head_hidden;
    cfg.model.raster_feature = a.raster_feature;
    cfg.model.delta_t_s = a.delta_t;
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.weight_decay = a.weight_decay;
    cfg.lambda = a.lambda;
    cfg.val_fraction = a.val_fraction;
    cfg.seed = a.seed;
    cfg.threads = thread_budget(a.threads);
    cfg.correct_every_packet = a.correct_every_packet;

    fger::TrainResult result = fger::train_model(trials, cfg, a.out);

    std::ofstream curve(a.out + ".curve.csv");
    curve << "epoch,train_loss,val_mae\n";
    for (const auto& s : result.curve) {
        curve << s.epoch << ',' << s.train_loss << ',' << s.val_mae << '\n';
    }
    write_run_manifest("train", train_config_json(a), a.seed, timer.seconds(), a.out);
    std::cout << "final val MAE " << result.final_val_mae << " N over "
              << result.val_trials.size() << " held-out trial(s)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval / report
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, data, report, trial, pred_out;
    double delta_t = 0.002;
    bool hold_grid = false;
    bool correct_every_packet = false;
};

int cmd_eval(const EvalArgs& a) {
    Timer timer;
    fger::LoadedModel model(a.ckpt);
    packetize::PacketizeConfig pc;
    pc.delta_t_s = model.config().delta_t_s;
    auto trials = fger::load_dataset(a.data, pc);

    PredictionTrace pooled_pred;
    std::vector<analysis::RollingMaeSeries> rolling;
    json per_trial = json::object();
    double grid0 = 0.0;
    for (const auto& trial : trials) {
        if (!a.trial.empty() && trial.name != a.trial) continue;
        PredictionTrace pred = model.predict(trial, a.correct_every_packet);
        if (a.hold_grid && !pred.samples.empty()) {
            pred = hold_resample(pred, model.config().delta_t_s, pred.samples.front().t_s,
                                 std::min(pred.samples.back().t_s, trial.force.t_end()));
        }
        if (!a.pred_out.empty()) {
            std::filesystem::create_directories(a.pred_out);
            write_pred_csv(pred, std::filesystem::path(a.pred_out) / (trial.name + ".pred.csv"));
        }
        analysis::MetricReport m = analysis::metrics(pred, trial.force);
        per_trial[trial.name] = metrics_to_json(m);
        rolling.push_back(analysis::rolling_mae(pred, trial.force));
        // pool with a per-trial time offset so concatenated samples stay sorted
        for (PredictionSample s : pred.samples) {
            s.t_s += grid0;
            pooled_pred.samples.push_back(s);
        }
        grid0 += trial.force.t_end() + 1.0;
    }
    if (pooled_pred.samples.empty()) throw MixtacError("no trials evaluated");

    // pooled metrics need a shifted truth too; rebuild per-trial and average
    double mae = 0.0, rmse = 0.0, r2 = 0.0;
    std::size_t n = 0, count = 0;
    for (auto& [name, m] : per_trial.items()) {
        mae += m["mae_n"].get<double>();
        rmse += m["rmse_n"].get<double>();
        r2 += m["r2"].get<double>();
        n += m["n"].get<std::size_t>();
        ++count;
    }
    json report = {{"mae_n", mae / count},
                   {"rmse_n", rmse / count},
                   {"r2", r2 / count},
                   {"n", n},
                   {"rolling", rolling_to_json(analysis::pool_rolling_bins(rolling), 0.5)},
                   {"trials", per_trial},
                   {"variant", fger::to_string(model.variant())}};
    std::ofstream out(a.report);
    if (!out) throw MixtacError("cannot open " + a.report);
    out << report.dump(2) << "\n";
    json cfg = {{"ckpt", a.ckpt}, {"data", a.data}, {"report", a.report}, {"trial", a.trial},
                {"pred-out", a.pred_out}, {"hold-grid", a.hold_grid},
                {"correct-every-packet", a.correct_every_packet}};
    write_run_manifest("eval", cfg, 0, timer.seconds(), a.report);
    std::cout << "mae " << mae / count << " N, rmse " << rmse / count << " N\n";
    return 0;
}

struct ReportArgs {
    std::string pred, truth, out;
};

int cmd_report(const ReportArgs& a) {
    Timer timer;
    PredictionTrace pred = read_pred_csv(a.pred);
    ForceTrace truth = io::read_force(a.truth);
    analysis::MetricReport m = analysis::metrics(pred, truth);
    auto rolling = analysis::rolling_mae(pred, truth);
    json report = metrics_to_json(m);
    report["rolling"] = rolling_to_json(rolling.bins, rolling.window_s);
    std::ofstream out(a.out);
    if (!out) throw MixtacError("cannot open " + a.out);
    out << report.dump(2) << "\n";
    json cfg = {{"pred", a.pred}, {"truth", a.truth}, {"out", a.out}};
    write_run_manifest("report", cfg, 0, timer.seconds(), a.out);
    std::cout << "mae " << m.mae_n << " N, rmse " << m.rmse_n << " N, r2 " << m.r2 << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// vibration
// ---------------------------------------------------------------------------

struct VibrationArgs {
    std::string trial;
    std::string tones;
    std::string out = "sweep.csv";
    double span = 2.2;
    std::uint64_t seed = 1;
    double bin = 0.002;
};

int cmd_vibration(const VibrationArgs& a) {
    Timer timer;
    if (!a.tones.empty()) {
        auto tones = parse_tone_spec(a.tones);
        synth::ContactModel contact;
        synth::DvsModel dvs{0.12, 200, 0.2};
        auto make_trial = [&](double tone) {
            synth::Scenario sc = synth::default_scenario(synth::ScenarioKind::vibration, a.seed);
            sc.duration_s = a.span + 0.5;
            sc.params["freq_hz"] = tone;
            Rng field_rng(Rng::derive_seed(a.seed, 1));
            synth::MarkerField field = synth::random_marker_field(64, 48, 60, field_rng);
            synth::ScenarioProfile profile = synth::force_profile(sc, contact);
            synth::SceneDvs scene(field, contact, dvs, 64, 48);
            std::vector<TimedEvent> signal;
            auto n = static_cast<std::uint64_t>(std::llround(sc.duration_s * 10000.0));
            for (std::uint64_t k = 0; k <= n; ++k) {
                scene.step(k, profile.depth_at(static_cast<double>(k) / 10000.0), 0.0, 0.0,
                           &signal);
            }
            Rng noise_rng(Rng::derive_seed(a.seed, 2));
            EventStream stream;
            stream.width = 64;
            stream.height = 48;
            stream.events = synth::merge_events(
                std::move(signal), synth::noise_events(dvs, 64, 48, sc.duration_s, noise_rng));
            // drop the settle-in prefix so the analysis span is pure tone
            double t0 = sc.param("contact_start_s") + sc.param("ramp_s") + 0.05;
            std::vector<TimedEvent> kept;
            for (TimedEvent e : stream.events) {
                if (e.t_s() < t0) continue;
                e.t_us -= static_cast<std::uint64_t>(std::llround(t0 * 1e6));
                kept.push_back(e);
            }
            stream.events = std::move(kept);
            return stream;
        };
        analysis::SweepResult sweep = analysis::sweep_vibration(make_trial, tones, a.span, a.bin);
        analysis::write_sweep_csv(sweep, a.out);
        json cfg = {{"tones", a.tones}, {"out", a.out}, {"span", a.span}, {"seed", a.seed},
                    {"bin", a.bin}};
        write_run_manifest("vibration", cfg, a.seed, timer.seconds(), a.out);
        std::cout << (sweep.diagonal_pass ? "diagonal pass" : "diagonal FAIL") << " over "
                  << sweep.rows.size() << " tones\n";
        return sweep.diagonal_pass ? 0 : 2;
    }
    if (a.trial.empty()) throw MixtacError("vibration needs --trial or --tones");
    EventStream events = io::read_events(std::filesystem::path(a.trial) / "events.bin");
    if (events.events.empty()) throw MixtacError("trial has no events");
    double t1 = events.events.back().t_s();
    analysis::VibrationSpectrum spec = analysis::vibration_spectrum(events, 0.0, t1, a.bin);
    std::ostringstream ss;
    ss << "freq_hz,magnitude\n";
    for (std::size_t i = 0; i < spec.freq_hz.size(); ++i) {
        ss << spec.freq_hz[i] << ',' << spec.magnitude[i] << '\n';
    }
    std::ofstream out(a.out);
    out << ss.str();
    if (spec.dominant_hz) {
        std::cout << "dominant " << *spec.dominant_hz << " Hz\n";
    } else {
        std::cout << "no dominant tone\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// slip
// ---------------------------------------------------------------------------

struct SlipArgs {
    std::string object = "box";
    double k = 0.001;
    std::uint64_t seed = 1;
    std::string out = "slip_log.csv";
    std::string suite;
    bool no_controller = false;
    double duration = 3.0;
    int threads = 0;
};

int cmd_slip(const SlipArgs& a) {
    Timer timer;
    slipctl::SlipTrialConfig config;
    config.object = slipctl::object_preset(a.object);
    config.scenario = synth::default_scenario(synth::ScenarioKind::slip_disturbance, a.seed);
    config.scenario.duration_s = a.duration;
    config.k_mm_per_event = a.k;
    config.controller_enabled = !a.no_controller;
    config.contact.center_x = config.sensor_width / 2.0;
    config.contact.center_y = config.sensor_height / 2.0;

    json cfg = {{"object", a.object}, {"k", a.k},
                {"seed", a.seed},     {"out", a.out},
                {"suite", a.suite},   {"no-controller", a.no_controller},
                {"duration", a.duration}};
    if (!a.suite.empty()) {
        auto rows = slipctl::object_suite(config, a.seed, thread_budget(a.threads));
        slipctl::write_object_suite_csv(rows, a.suite);
        write_run_manifest("slip", cfg, a.seed, timer.seconds(), a.suite);
        for (const auto& r : rows) {
            std::cout << r.object << " mean slip " << r.mean_slip_mm << " mm over " << r.trials
                      << " trials\n";
        }
        return 0;
    }
    slipctl::SlipLog log = slipctl::run_slip_trial(config, a.seed);
    slipctl::write_slip_log(log, a.out);
    write_run_manifest("slip", cfg, a.seed, timer.seconds(), a.out);
    std::cout << "final slip " << log.final_slip_mm << " mm, detection latency "
              << log.detection_latency_s * 1e3 << " ms\n";
    return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
    std::ifstream in(manifest_path);
    if (!in) throw MixtacError("cannot open " + manifest_path);
    json manifest = json::parse(in);
    std::vector<std::string> args;
    args.push_back(manifest.at("command").get<std::string>());
    for (auto& [key, value] : manifest.at("config").items()) {
        if (key == "out" && !out_override.empty()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
        } else if (value.is_string()) {
            if (!value.get<std::string>().empty()) {
                args.push_back("--" + key);
                args.push_back(value.get<std::string>());
            }
        } else if (value.is_array()) {
            for (const auto& v : value) {
                args.push_back("--" + key);
                args.push_back(v.get<std::string>());
            }
        } else {
            args.push_back("--" + key);
            args.push_back(value.dump());
        }
    }
    if (!out_override.empty()) {
        args.push_back("--out");
        args.push_back(out_override);
    }
    return dispatch(args);
}

// ---------------------------------------------------------------------------
// top level
// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"mixtac: synthetic event-frame tactile sensing pipeline"};
    app.require_subcommand(1);
    app.set_config("--config"); // flat key=value files; explicit flags win

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    simulate->add_option("--scenario", sim.scenario)
        ->check(CLI::IsMember({"press_hold", "vibration", "drop_impact", "slip_disturbance"}));
    simulate->add_option("--trials", sim.trials)->check(CLI::PositiveNumber);
    simulate->add_option("--out", sim.out)->required();
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--duration", sim.duration);
    simulate->add_option("--sensor-width", sim.sensor_width);
    simulate->add_option("--sensor-height", sim.sensor_height);
    simulate->add_option("--markers", sim.markers);
    simulate->add_option("--frame-rate", sim.frame_rate);
    simulate->add_option("--force-rate", sim.force_rate);
    simulate->add_option("--contrast", sim.contrast);
    simulate->add_option("--noise-rate", sim.noise_rate);
    simulate->add_option("--refractory-us", sim.refractory_us);
    simulate->add_flag("--no-impulses", sim.no_impulses);
    simulate->add_flag("--no-jitter", sim.no_jitter);
    simulate->add_option("--plant-clock", sim.plant_clock);
    simulate->add_option("--param", sim.params);
    simulate->add_option("--threads", sim.threads);

    AlignArgs al;
    auto* alignc = app.add_subcommand("align", "recover the event/force clock map");
    alignc->add_option("--events", al.events)->required();
    alignc->add_option("--force", al.force)->required();
    alignc->add_option("--impulse-windows", al.windows)->required();
    alignc->add_option("--bin", al.bin);
    alignc->add_option("--smooth", al.smooth);
    alignc->add_option("--impulse-width", al.impulse_width);
    alignc->add_option("--out", al.out);

    PacketizeArgs pk;
    auto* packet = app.add_subcommand("packetize", "segment a trial into labeled cycles");
    packet->add_option("--trial", pk.trial)->required();
    packet->add_option("--delta-t", pk.delta_t);
    packet->add_flag("--guide-next", pk.guide_next);
    packet->add_option("--out", pk.out);

    TrainArgs tr;
    auto add_train_options = [&](CLI::App* cmd, bool require_variant) {
        cmd->add_option("--data", tr.data)->required();
        cmd->add_option("--out", tr.out)->required();
        auto* v = cmd->add_option("--variant", tr.variant)
                      ->check(CLI::IsMember({"fusion", "events", "frames", "baseline"}));
        if (require_variant) v->required();
        cmd->add_option("--epochs", tr.epochs);
        cmd->add_option("--batch", tr.batch);
        cmd->add_option("--lr", tr.lr);
        cmd->add_option("--weight-decay", tr.weight_decay);
        cmd->add_option("--lambda", tr.lambda);
        cmd->add_option("--val-fraction", tr.val_fraction);
        cmd->add_option("--delta-t", tr.delta_t);
        cmd->add_option("--seed", tr.seed);
        cmd->add_option("--threads", tr.threads);
        cmd->add_flag("--correct-every-packet", tr.correct_every_packet);
        cmd->add_option("--event-hidden", tr.event_hidden);
        cmd->add_option("--de", tr.de);
        cmd->add_option("--df", tr.df);
        cmd->add_option("--hidden", tr.hidden);
        cmd->add_option("--head-hidden", tr.head_hidden);
        cmd->add_option("--channels", tr.channels);
        cmd->add_option("--raster-feature", tr.raster_feature);
    };
    auto* train = app.add_subcommand("train", "train the fusion estimator");
    add_train_options(train, false);
    auto* ablate = app.add_subcommand("ablate", "train a comparison variant");
    add_train_options(ablate, true);

    EvalArgs ev;
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    evalc->add_option("--ckpt", ev.ckpt)->required();
    evalc->add_option("--data", ev.data)->required();
    evalc->add_option("--report", ev.report)->required();
    evalc->add_option("--trial", ev.trial);
    evalc->add_option("--pred-out", ev.pred_out);
    evalc->add_flag("--hold-grid", ev.hold_grid);
    evalc->add_flag("--correct-every-packet", ev.correct_every_packet);

    VibrationArgs vb;
    auto* vib = app.add_subcommand("vibration", "spectrum of a trial or a tone sweep");
    vib->add_option("--trial", vb.trial);
    vib->add_option("--tones", vb.tones);
    vib->add_option("--out", vb.out);
    vib->add_option("--span", vb.span);
    vib->add_option("--seed", vb.seed);
    vib->add_option("--bin", vb.bin);

    SlipArgs sl;
    auto* slip = app.add_subcommand("slip", "closed-loop slip control simulation");
    slip->add_option("--object", sl.object);
    slip->add_option("--k", sl.k);
    slip->add_option("--seed", sl.seed);
    slip->add_option("--out", sl.out);
    slip->add_option("--suite", sl.suite);
    slip->add_flag("--no-controller", sl.no_controller);
    slip->add_option("--duration", sl.duration);
    slip->add_option("--threads", sl.threads);

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "metrics from prediction and truth CSVs");
    report->add_option("--pred", rp.pred)->required();
    report->add_option("--truth", rp.truth)->required();
    report->add_option("--out", rp.out)->required();

    std::string replay_manifest, replay_out;
    auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
    replay->add_option("manifest", replay_manifest)->required();
    replay->add_option("--out", replay_out);

    // CLI11 parses back-to-front
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        // validation before any work
        if (*alignc) { require_file(al.events); require_file(al.force); }
        if (*packet) require_file(pk.trial);
        if (*train || *ablate) require_file(tr.data);
        if (*evalc) { require_file(ev.ckpt); require_file(ev.data); }
        if (*report) { require_file(rp.pred); require_file(rp.truth); }
        if (*replay) require_file(replay_manifest);
        if (!vb.trial.empty()) require_file(vb.trial);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*alignc) return cmd_align(al);
        if (*packet) return cmd_packetize(pk);
        if (*train || *ablate) return cmd_train(tr);
        if (*evalc) return cmd_eval(ev);
        if (*vib) return cmd_vibration(vb);
        if (*slip) return cmd_slip(sl);
        if (*report) return cmd_report(rp);
        if (*replay) return cmd_replay(replay_manifest, replay_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

} // namespace mixtac::cli
