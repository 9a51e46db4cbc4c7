#include "mixtac/fger.hpp"

#include "mixtac/io.hpp"
#include "mixtac/threads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mixtac::fger {

// ---------------------------------------------------------------------------
// Config / variant plumbing
// ---------------------------------------------------------------------------

nlohmann::json FgerConfig::to_json() const {
    return {{"event_hidden", event_enc.hidden},
            {"event_out", event_enc.out},
            {"frame_width", frame_enc.width},
            {"frame_height", frame_enc.height},
            {"frame_channels", frame_enc.channels},
            {"frame_out", frame_enc.out},
            {"lstm_hidden", lstm_hidden},
            {"head_hidden", head_hidden},
            {"raster_feature", raster_feature},
            {"delta_t_s", delta_t_s}};
}

FgerConfig FgerConfig::from_json(const nlohmann::json& j) {
    FgerConfig c;
    c.event_enc.hidden = j.at("event_hidden");
    c.event_enc.out = j.at("event_out");
    c.frame_enc.width = j.at("frame_width");
    c.frame_enc.height = j.at("frame_height");
    c.frame_enc.channels = j.at("frame_channels");
    c.frame_enc.out = j.at("frame_out");
    c.lstm_hidden = j.at("lstm_hidden");
    c.head_hidden = j.at("head_hidden");
    c.raster_feature = j.at("raster_feature");
    c.delta_t_s = j.at("delta_t_s");
    return c;
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::fusion: return "fusion";
        case Variant::events_only: return "events";
        case Variant::frames_only: return "frames";
        case Variant::baseline: return "baseline";
    }
    return "?";
}

Variant variant_from_string(const std::string& name) {
    if (name == "fusion") return Variant::fusion;
    if (name == "events" || name == "events_only") return Variant::events_only;
    if (name == "frames" || name == "frames_only") return Variant::frames_only;
    if (name == "baseline") return Variant::baseline;
    throw MixtacError("unknown model variant: " + name);
}

// ---------------------------------------------------------------------------
// FgerNet
// ---------------------------------------------------------------------------

namespace {
nn::RecurrentConfig lstm_config(const FgerConfig& cfg) {
    return {cfg.event_enc.out + 1, cfg.lstm_hidden};
}
} // namespace

FgerNet::FgerNet(const FgerConfig& cfg, Variant variant)
    : cfg_(cfg), variant_(variant),
      event_enc_(store_, "event_enc", cfg.event_enc),
      frame_enc_(variant == Variant::fusion
                     ? std::make_unique<nn::FrameEncoder>(store_, "frame_enc", cfg.frame_enc)
                     : nullptr),
      lstm_(store_, "lstm", lstm_config(cfg)),
      head_df_(store_, "head_df", {cfg.lstm_hidden, cfg.head_hidden, 1}),
      head_corr_(variant == Variant::fusion
                     ? std::make_unique<nn::Mlp>(store_, "head_corr",
                                                 std::vector<int>{1 + cfg.frame_enc.out,
                                                                  cfg.head_hidden, 1})
                     : nullptr) {
    if (variant != Variant::fusion && variant != Variant::events_only) {
        throw MixtacError("FgerNet builds only the fusion and events-only variants");
    }
}

void FgerNet::init_params(std::uint64_t seed) {
    Rng rng(seed);
    event_enc_.init(rng);
    if (frame_enc_) frame_enc_->init(rng);
    lstm_.init(rng);
    head_df_.init(rng);
    if (head_corr_) head_corr_->init(rng);
}

FgerState FgerNet::initial_state() const {
    FgerState s;
    s.h.assign(cfg_.lstm_hidden, 0.0);
    s.c.assign(cfg_.lstm_hidden, 0.0);
    s.f_hat = 0.0;
    return s;
}

FgerNet::CycleResult FgerNet::run_cycle(const Frame& guide,
                                        const std::vector<EventPacket>& packets,
                                        const FgerState& in_state, RunMode mode,
                                        bool correct_every_packet) const {
    if (packets.empty()) throw MixtacError("run_cycle: empty packet sequence");
    const nn::NormStats norm{cfg_.frame_enc.width, cfg_.frame_enc.height};
    const bool fused = variant_ == Variant::fusion;

    nn::Vec f_frame;
    if (fused) f_frame = frame_enc_->forward(guide, nullptr);

    CycleResult res;
    res.state = in_state;
    nn::Vec& h = res.state.h;
    nn::Vec& c = res.state.c;
    double f = in_state.f_hat;
    double last_corr = 0.0;

    for (std::size_t m = 0; m < packets.size(); ++m) {
        nn::Vec fe = event_enc_.forward(packets[m], norm, nullptr);
        nn::Vec x = fe;
        x.push_back(f);
        nn::Vec h_next, c_next;
        lstm_.forward(x, h, c, &h_next, &c_next, nullptr);
        h = std::move(h_next);
        c = std::move(c_next);
        double df = head_df_.forward(h, nullptr)[0];
        f += df;
        if (!std::isfinite(f)) {
            throw MixtacError("non-finite estimate at packet " + std::to_string(m));
        }
        res.increments.push_back(df);

        if (fused && mode == RunMode::infer) {
            nn::Vec fusion{f};
            fusion.insert(fusion.end(), f_frame.begin(), f_frame.end());
            last_corr = head_corr_->forward(fusion, nullptr)[0];
            bool is_last = (m + 1 == packets.size());
            res.trace.push_back({packets[m].t_end_s, f + last_corr,
                                 correct_every_packet || is_last});
            if (correct_every_packet) f += last_corr;
        } else {
            res.trace.push_back({packets[m].t_end_s, f, false});
        }
    }

    res.f_uncorrected = f;
    if (fused) {
        if (mode == RunMode::infer && !correct_every_packet) {
            // carry uses the end-of-cycle correction computed at the last packet
            res.correction = last_corr;
            f += last_corr;
        } else if (mode == RunMode::train) {
            nn::Vec fusion{f};
            fusion.insert(fusion.end(), f_frame.begin(), f_frame.end());
            res.correction = head_corr_->forward(fusion, nullptr)[0];
            f += res.correction;
            res.trace.back() = {packets.back().t_end_s, f, true};
        } else {
            res.correction = last_corr; // already folded in per packet
        }
    }
    res.state.f_hat = f;
    return res;
}

double FgerNet::train_cycle(const Cycle& cycle, FgerState* state, double lambda) {
    const auto& packets = cycle.packets;
    if (packets.empty()) throw MixtacError("train_cycle: empty cycle");
    if (cycle.labels.size() != packets.size()) {
        throw MixtacError("train_cycle: labels do not match packets");
    }
    const auto M = packets.size();
    const nn::NormStats norm{cfg_.frame_enc.width, cfg_.frame_enc.height};
    const bool fused = variant_ == Variant::fusion;

    // forward with caches
    nn::FrameEncoder::Cache fcache;
    nn::Vec f_frame;
    if (fused) f_frame = frame_enc_->forward(cycle.guide_frame, &fcache);

    std::vector<nn::EventEncoder::Cache> ecache(M);
    std::vector<nn::LstmCell::Cache> lcache(M);
    std::vector<nn::Mlp::Cache> dcache(M);
    std::vector<double> f_seq(M + 1);
    f_seq[0] = state->f_hat;

    nn::Vec h = state->h;
    nn::Vec c = state->c;
    for (std::size_t m = 0; m < M; ++m) {
        nn::Vec fe = event_enc_.forward(packets[m], norm, &ecache[m]);
        nn::Vec x = fe;
        x.push_back(f_seq[m]);
        nn::Vec h_next, c_next;
        lstm_.forward(x, h, c, &h_next, &c_next, &lcache[m]);
        h = std::move(h_next);
        c = std::move(c_next);
        double df = head_df_.forward(h, &dcache[m])[0];
        f_seq[m + 1] = f_seq[m] + df;
        if (!std::isfinite(f_seq[m + 1])) {
            throw MixtacError("non-finite estimate at packet " + std::to_string(m));
        }
    }

    double f_final = f_seq[M];
    nn::Mlp::Cache ccache;
    double corr = 0.0;
    if (fused) {
        nn::Vec fusion{f_seq[M]};
        fusion.insert(fusion.end(), f_frame.begin(), f_frame.end());
        corr = head_corr_->forward(fusion, &ccache)[0];
        f_final = f_seq[M] + corr;
    }

    const double y_final = cycle.labels.back();
    double loss = (f_final - y_final) * (f_final - y_final);
    double inter = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double e = f_seq[m + 1] - cycle.labels[m];
        inter += e * e;
    }
    loss += lambda * inter / static_cast<double>(M);

    // backward
    const double lam2 = 2.0 * lambda / static_cast<double>(M);
    double dfinal = 2.0 * (f_final - y_final);
    nn::Vec df_frame;
    double g;
    if (fused) {
        nn::Vec dfus = head_corr_->backward(ccache, {dfinal});
        g = dfinal + dfus[0];
        df_frame.assign(dfus.begin() + 1, dfus.end());
    } else {
        g = dfinal;
    }

    const int H = cfg_.lstm_hidden;
    const int De = cfg_.event_enc.out;
    nn::Vec dh_next(H, 0.0), dc_next(H, 0.0);
    for (std::size_t m = M; m-- > 0;) {
        g += lam2 * (f_seq[m + 1] - cycle.labels[m]);
        nn::Vec dh = head_df_.backward(dcache[m], {g});
        for (int k = 0; k < H; ++k) dh[k] += dh_next[k];
        nn::Vec dx, dh_prev, dc_prev;
        lstm_.backward(lcache[m], dh, dc_next, &dx, &dh_prev, &dc_prev);
        event_enc_.backward(ecache[m], nn::Vec(dx.begin(), dx.begin() + De));
        g += dx[De];
        dh_next = std::move(dh_prev);
        dc_next = std::move(dc_prev);
    }
    if (fused) frame_enc_->backward(fcache, df_frame);

    state->h = std::move(h);
    state->c = std::move(c);
    state->f_hat = f_final;
    return loss;
}

double FgerNet::cycle_loss(const Cycle& cycle, const FgerState& state, double lambda) const {
    const auto& packets = cycle.packets;
    const auto M = packets.size();
    const nn::NormStats norm{cfg_.frame_enc.width, cfg_.frame_enc.height};
    const bool fused = variant_ == Variant::fusion;

    nn::Vec f_frame;
    if (fused) f_frame = frame_enc_->forward(cycle.guide_frame, nullptr);
    nn::Vec h = state.h;
    nn::Vec c = state.c;
    double f = state.f_hat;
    double inter = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        nn::Vec fe = event_enc_.forward(packets[m], norm, nullptr);
        nn::Vec x = fe;
        x.push_back(f);
        nn::Vec h_next, c_next;
        lstm_.forward(x, h, c, &h_next, &c_next, nullptr);
        h = std::move(h_next);
        c = std::move(c_next);
        f += head_df_.forward(h, nullptr)[0];
        double e = f - cycle.labels[m];
        inter += e * e;
    }
    double f_final = f;
    if (fused) {
        nn::Vec fusion{f};
        fusion.insert(fusion.end(), f_frame.begin(), f_frame.end());
        f_final = f + head_corr_->forward(fusion, nullptr)[0];
    }
    double e = f_final - cycle.labels.back();
    return e * e + lambda * inter / static_cast<double>(M);
}

PredictionTrace FgerNet::predict(const std::vector<Cycle>& cycles,
                                 bool correct_every_packet) const {
    PredictionTrace trace;
    FgerState state = initial_state();
    for (const Cycle& cycle : cycles) {
        CycleResult res =
            run_cycle(cycle.guide_frame, cycle.packets, state, RunMode::infer,
                      correct_every_packet);
        state = std::move(res.state);
        trace.samples.insert(trace.samples.end(), res.trace.begin(), res.trace.end());
    }
    return trace;
}

// ---------------------------------------------------------------------------
// FramesOnlyNet
// ---------------------------------------------------------------------------

FramesOnlyNet::FramesOnlyNet(const FgerConfig& cfg)
    : cfg_(cfg), enc_(store_, "frame_enc", cfg.frame_enc),
      head_(store_, "head_frame", {cfg.frame_enc.out, cfg.head_hidden, 1}) {}

void FramesOnlyNet::init_params(std::uint64_t seed) {
    Rng rng(seed);
    enc_.init(rng);
    head_.init(rng);
}

double FramesOnlyNet::predict_frame(const Frame& frame) const {
    return head_.forward(enc_.forward(frame, nullptr), nullptr)[0];
}

double FramesOnlyNet::train_frame(const Frame& frame, double label) {
    nn::FrameEncoder::Cache fcache;
    nn::Mlp::Cache hcache;
    nn::Vec feat = enc_.forward(frame, &fcache);
    double y = head_.forward(feat, &hcache)[0];
    double err = y - label;
    nn::Vec dfeat = head_.backward(hcache, {2.0 * err});
    enc_.backward(fcache, dfeat);
    return err * err;
}

PredictionTrace FramesOnlyNet::predict(const std::vector<Frame>& frames) const {
    PredictionTrace trace;
    trace.samples.reserve(frames.size());
    for (const Frame& f : frames) {
        trace.samples.push_back({static_cast<double>(f.t_us) * 1e-6, predict_frame(f), false});
    }
    return trace;
}

// ---------------------------------------------------------------------------
// BaselineNet
// ---------------------------------------------------------------------------

namespace {
nn::FrameEncoderConfig raster_config(const FgerConfig& cfg) {
    nn::FrameEncoderConfig rc = cfg.frame_enc;
    rc.in_channels = 2;
    rc.out = cfg.raster_feature;
    return rc;
}
} // namespace

BaselineNet::BaselineNet(const FgerConfig& cfg)
    : cfg_(cfg), frame_enc_(store_, "frame_enc", cfg.frame_enc),
      raster_enc_(store_, "raster_enc", raster_config(cfg)),
      head_(store_, "head_fusion",
            {cfg.frame_enc.out + cfg.raster_feature, cfg.head_hidden, 1}) {}

void BaselineNet::init_params(std::uint64_t seed) {
    Rng rng(seed);
    frame_enc_.init(rng);
    raster_enc_.init(rng);
    head_.init(rng);
}

nn::Vec BaselineNet::build_raster(const std::vector<EventPacket>& packets, int width,
                                  int height) {
    nn::Vec raster(2 * static_cast<std::size_t>(width) * height, 0.0);
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    for (const EventPacket& p : packets) {
        for (const TimedEvent& e : p.events) {
            std::size_t i = static_cast<std::size_t>(e.y) * width + e.x;
            raster[(e.polarity > 0 ? 0 : plane) + i] += 1.0;
        }
    }
    return raster;
}

double BaselineNet::predict_cycle(const Cycle& cycle) const {
    nn::Vec raster = build_raster(cycle.packets, cfg_.frame_enc.width, cfg_.frame_enc.height);
    for (double& v : raster) v *= raster_scale_;
    nn::Vec rf = raster_enc_.forward_raw(raster, nullptr);
    nn::Vec ff = frame_enc_.forward(cycle.guide_frame, nullptr);
    nn::Vec cat = ff;
    cat.insert(cat.end(), rf.begin(), rf.end());
    return head_.forward(cat, nullptr)[0];
}

double BaselineNet::train_cycle(const Cycle& cycle) {
    nn::Vec raster = build_raster(cycle.packets, cfg_.frame_enc.width, cfg_.frame_enc.height);
    for (double& v : raster) v *= raster_scale_;
    nn::FrameEncoder::Cache rcache, fcache;
    nn::Mlp::Cache hcache;
    nn::Vec rf = raster_enc_.forward_raw(raster, &rcache);
    nn::Vec ff = frame_enc_.forward(cycle.guide_frame, &fcache);
    nn::Vec cat = ff;
    cat.insert(cat.end(), rf.begin(), rf.end());
    double y = head_.forward(cat, &hcache)[0];
    double err = y - cycle.labels.back();
    nn::Vec dcat = head_.backward(hcache, {2.0 * err});
    nn::Vec dff(dcat.begin(), dcat.begin() + cfg_.frame_enc.out);
    nn::Vec drf(dcat.begin() + cfg_.frame_enc.out, dcat.end());
    frame_enc_.backward(fcache, dff);
    raster_enc_.backward(rcache, drf);
    return err * err;
}

PredictionTrace BaselineNet::predict(const std::vector<Cycle>& cycles) const {
    PredictionTrace trace;
    trace.samples.reserve(cycles.size());
    for (const Cycle& c : cycles) {
        trace.samples.push_back({c.packets.back().t_end_s, predict_cycle(c), false});
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Data loading and splits
// ---------------------------------------------------------------------------

TrialData load_trial(const std::filesystem::path& trial_dir,
                     const packetize::PacketizeConfig& pconfig) {
    TrialData data;
    data.name = trial_dir.filename().string();
    EventStream stream = io::read_events(trial_dir / "events.bin");
    data.frames = io::read_frame_sequence(trial_dir / "frames.csv");
    data.force = io::read_force(trial_dir / "force.csv");
    auto segmented = packetize::segment_cycles(stream, data.frames, pconfig);
    // the last frame interval may extend past the final force sample; keep
    // only cycles that can be labeled
    double span_end = data.force.t_end();
    while (!segmented.empty() && segmented.back().packets.back().t_end_s > span_end) {
        segmented.pop_back();
    }
    data.cycles = packetize::label_cycles(std::move(segmented), data.force);
    return data;
}

std::vector<TrialData> load_dataset(const std::filesystem::path& dataset_dir,
                                    const packetize::PacketizeConfig& pconfig) {
    std::ifstream mf(dataset_dir / "manifest.json");
    if (!mf) throw MixtacError("cannot open dataset manifest in " + dataset_dir.string());
    nlohmann::json manifest = nlohmann::json::parse(mf);
    std::vector<TrialData> trials;
    for (const auto& t : manifest.at("trials")) {
        trials.push_back(load_trial(dataset_dir / t.at("name").get<std::string>(), pconfig));
    }
    return trials;
}

Split trial_split(std::size_t n_trials, double val_fraction, std::uint64_t seed) {
    if (n_trials < 2) throw MixtacError("need at least 2 trials for a trajectory-level split");
    std::vector<std::size_t> idx(n_trials);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(Rng::derive_seed(seed, 0xdeadu));
    for (std::size_t i = n_trials - 1; i > 0; --i) {
        std::size_t j = rng.below(i + 1);
        std::swap(idx[i], idx[j]);
    }
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_trials)));
    n_val = std::clamp<std::size_t>(n_val, 1, n_trials - 1);
    Split split;
    split.val_idx.assign(idx.begin(), idx.begin() + n_val);
    split.train_idx.assign(idx.begin() + n_val, idx.end());
    std::sort(split.val_idx.begin(), split.val_idx.end());
    std::sort(split.train_idx.begin(), split.train_idx.end());
    for (std::size_t v : split.val_idx) {
        if (std::binary_search(split.train_idx.begin(), split.train_idx.end(), v)) {
            throw MixtacError("split leakage: trial in both sets");
        }
    }
    return split;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

// One model instance of any variant behind a uniform surface.
struct ModelAny {
    Variant variant;
    std::unique_ptr<FgerNet> fger;
    std::unique_ptr<FramesOnlyNet> frames;
    std::unique_ptr<BaselineNet> baseline;

    static ModelAny make(Variant v, const FgerConfig& cfg) {
        ModelAny m;
        m.variant = v;
        switch (v) {
            case Variant::fusion:
            case Variant::events_only:
                m.fger = std::make_unique<FgerNet>(cfg, v);
                break;
            case Variant::frames_only:
                m.frames = std::make_unique<FramesOnlyNet>(cfg);
                break;
            case Variant::baseline:
                m.baseline = std::make_unique<BaselineNet>(cfg);
                break;
        }
        return m;
    }

    nn::ParamStore& store() {
        if (fger) return fger->store();
        if (frames) return frames->store();
        return baseline->store();
    }

    void init_params(std::uint64_t seed) {
        if (fger) fger->init_params(seed);
        else if (frames) frames->init_params(seed);
        else baseline->init_params(seed);
    }

    std::size_t n_positions(const TrialData& trial) const {
        return variant == Variant::frames_only ? trial.frames.size() : trial.cycles.size();
    }

    double train_position(const TrialData& trial, std::size_t pos, FgerState* state,
                          const TrainConfig& cfg) {
        switch (variant) {
            case Variant::fusion:
            case Variant::events_only:
                return fger->train_cycle(trial.cycles[pos], state, cfg.lambda);
            case Variant::frames_only: {
                const Frame& f = trial.frames[pos];
                double label = interp_force(trial.force,
                                            std::min(static_cast<double>(f.t_us) * 1e-6,
                                                     trial.force.t_end()));
                return frames->train_frame(f, label);
            }
            case Variant::baseline:
                return baseline->train_cycle(trial.cycles[pos]);
        }
        return 0.0;
    }

    PredictionTrace predict(const TrialData& trial, bool correct_every_packet) const {
        switch (variant) {
            case Variant::fusion:
            case Variant::events_only:
                return fger->predict(trial.cycles, correct_every_packet);
            case Variant::frames_only:
                return frames->predict(trial.frames);
            case Variant::baseline:
                return baseline->predict(trial.cycles);
        }
        return {};
    }
};

double trace_mae(const PredictionTrace& trace, const ForceTrace& truth) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const PredictionSample& s : trace.samples) {
        if (s.t_s < truth.t_begin() || s.t_s > truth.t_end()) continue;
        acc += std::abs(s.f_hat_n - interp_force(truth, s.t_s));
        ++n;
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

} // namespace

TrainResult train_model(const std::vector<TrialData>& trials, const TrainConfig& cfg,
                        const std::filesystem::path& ckpt_path) {
    Split split = trial_split(trials.size(), cfg.val_fraction, cfg.seed);
    TrainResult result;
    for (std::size_t i : split.train_idx) result.train_trials.push_back(trials[i].name);
    for (std::size_t i : split.val_idx) result.val_trials.push_back(trials[i].name);
    for (const std::string& name : result.val_trials) {
        if (std::find(result.train_trials.begin(), result.train_trials.end(), name) !=
            result.train_trials.end()) {
            throw MixtacError("split leakage: trial " + name + " in both sets");
        }
    }

    ModelAny main = ModelAny::make(cfg.variant, cfg.model);
    main.init_params(cfg.seed);
    nn::AdamW opt(main.store(),
                  {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

    const std::size_t T = split.train_idx.size();
    // one gradient buffer per training trial: the batch reduce runs in trial
    // order, so results are identical for any worker count
    std::vector<ModelAny> replicas;
    replicas.reserve(T);
    for (std::size_t i = 0; i < T; ++i) {
        replicas.push_back(ModelAny::make(cfg.variant, cfg.model));
        replicas[i].store().copy_values_from(main.store());
    }

    std::size_t max_len = 0;
    for (std::size_t i : split.train_idx) {
        max_len = std::max(max_len, main.n_positions(trials[i]));
    }

    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(cfg.batch) /
                                                 static_cast<double>(T))));
    const int threads = thread_budget(cfg.threads);

    nlohmann::json meta = {{"format", "mixtac-ckpt-1"},
                           {"variant", to_string(cfg.variant)},
                           {"seed", cfg.seed},
                           {"config", cfg.model.to_json()},
                           {"train",
                            {{"epochs", cfg.epochs},
                             {"batch", cfg.batch},
                             {"lr", cfg.lr},
                             {"weight_decay", cfg.weight_decay},
                             {"lambda", cfg.lambda},
                             {"correct_every_packet", cfg.correct_every_packet}}},
                           {"split", {{"train", result.train_trials}, {"val", result.val_trials}}}};

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<FgerState> states(T);
        for (std::size_t i = 0; i < T; ++i) {
            states[i] = main.fger ? main.fger->initial_state() : FgerState{};
        }
        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;

        for (std::size_t p0 = 0; p0 < max_len; p0 += stride) {
            std::vector<double> losses(T, 0.0);
            std::vector<std::size_t> counts(T, 0);
            parallel_for(T, threads, [&](std::size_t wi) {
                const TrialData& trial = trials[split.train_idx[wi]];
                std::size_t len = replicas[wi].n_positions(trial);
                for (std::size_t p = p0; p < std::min(p0 + stride, len); ++p) {
                    losses[wi] += replicas[wi].train_position(trial, p, &states[wi], cfg);
                    ++counts[wi];
                }
            });
            std::size_t batch_count = 0;
            main.store().zero_grads();
            for (std::size_t wi = 0; wi < T; ++wi) {
                main.store().accumulate_grads_from(replicas[wi].store());
                batch_count += counts[wi];
                epoch_loss += losses[wi];
            }
            if (batch_count == 0) continue;
            epoch_count += batch_count;
            main.store().scale_grads(1.0 / static_cast<double>(batch_count));
            opt.step();
            for (std::size_t wi = 0; wi < T; ++wi) {
                replicas[wi].store().copy_values_from(main.store());
                replicas[wi].store().zero_grads();
            }
        }

        double val_mae = 0.0;
        for (std::size_t i : split.val_idx) {
            val_mae += trace_mae(main.predict(trials[i], cfg.correct_every_packet),
                                 trials[i].force);
        }
        val_mae /= static_cast<double>(split.val_idx.size());

        EpochStats stats{epoch, epoch_count ? epoch_loss / static_cast<double>(epoch_count) : 0.0,
                         val_mae};
        result.curve.push_back(stats);
        result.final_val_mae = val_mae;

        meta["epoch"] = epoch;
        meta["val_mae"] = val_mae;
        nn::save_checkpoint(main.store(), meta, ckpt_path);
    }
    return result;
}

// ---------------------------------------------------------------------------
// LoadedModel
// ---------------------------------------------------------------------------

LoadedModel::LoadedModel(const std::filesystem::path& ckpt_path) {
    meta_ = nn::read_checkpoint_meta(ckpt_path);
    variant_ = variant_from_string(meta_.at("variant").get<std::string>());
    cfg_ = FgerConfig::from_json(meta_.at("config"));
    switch (variant_) {
        case Variant::fusion:
        case Variant::events_only:
            fger_ = std::make_unique<FgerNet>(cfg_, variant_);
            nn::load_checkpoint(fger_->store(), ckpt_path);
            break;
        case Variant::frames_only:
            frames_ = std::make_unique<FramesOnlyNet>(cfg_);
            nn::load_checkpoint(frames_->store(), ckpt_path);
            break;
        case Variant::baseline:
            baseline_ = std::make_unique<BaselineNet>(cfg_);
            nn::load_checkpoint(baseline_->store(), ckpt_path);
            break;
    }
}

PredictionTrace LoadedModel::predict(const TrialData& trial, bool correct_every_packet) const {
    if (variant_ != Variant::frames_only) {
        if (trial.cycles.empty()) throw MixtacError("trial has no cycles");
        double width = trial.cycles.front().packets.front().t_end_s -
                       trial.cycles.front().packets.front().t_start_s;
        if (std::abs(width - cfg_.delta_t_s) > 1e-6 + 1e-9) {
            throw MixtacError("delta_t mismatch: checkpoint " + std::to_string(cfg_.delta_t_s) +
                              " s vs trial packets " + std::to_string(width) + " s");
        }
    }
    switch (variant_) {
        case Variant::fusion:
        case Variant::events_only:
            return fger_->predict(trial.cycles, correct_every_packet);
        case Variant::frames_only:
            return frames_->predict(trial.frames);
        case Variant::baseline:
            return baseline_->predict(trial.cycles);
    }
    return {};
}

} // namespace mixtac::fger
