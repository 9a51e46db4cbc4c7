#pragma once

#include "mixtac/nn.hpp"
#include "mixtac/packetize.hpp"
#include "mixtac/types.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace mixtac::fger {

struct FgerConfig {
    nn::EventEncoderConfig event_enc;  // pointwise MLP widths (hidden, D_e)
    nn::FrameEncoderConfig frame_enc;  // sensor dims, channels, D_f
    int lstm_hidden = 64;
    int head_hidden = 32;
    int raster_feature = 16;   // baseline event-raster branch width
    double delta_t_s = 0.002;

    nlohmann::json to_json() const;
    static FgerConfig from_json(const nlohmann::json& j);
};

// Recurrent carry across packets and cycles.
struct FgerState {
    nn::Vec h;
    nn::Vec c;
    double f_hat = 0.0;
};

enum class Variant { fusion, events_only, frames_only, baseline };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

enum class RunMode { train, infer };

// ---------------------------------------------------------------------------
// The recurrent estimator (full fusion network, or the events-only ablation
// when constructed without the frame-guided correction).
//
// Per cycle: f_frame = frame_enc(guide) once; per packet m:
//   f_e = event_enc(P_m); x = [f_e ; f_hat]; (h,c) = lstm(x,h,c);
//   df = head_df(h); f_hat += df.
// Fusion closes the cycle with corr = head_corr([f_hat ; f_frame]) and
// carries f_hat + corr into the next cycle. In infer mode the corrected
// value is additionally emitted at every packet; `correct_every_packet`
// makes that corrected value also overwrite the carry mid-cycle.
// ---------------------------------------------------------------------------
class FgerNet {
public:
    FgerNet(const FgerConfig& cfg, Variant variant);
    FgerNet(const FgerNet&) = delete;
    FgerNet& operator=(const FgerNet&) = delete;

    void init_params(std::uint64_t seed);

    nn::ParamStore& store() { return store_; }
    const nn::ParamStore& store() const { return store_; }
    const FgerConfig& config() const { return cfg_; }
    Variant variant() const { return variant_; }

    FgerState initial_state() const;

    struct CycleResult {
        std::vector<PredictionSample> trace;
        std::vector<double> increments; // head_df outputs, one per packet
        double f_uncorrected = 0.0;     // accumulated estimate before correction
        double correction = 0.0;        // 0 for events_only
        FgerState state;
    };

    CycleResult run_cycle(const Frame& guide, const std::vector<EventPacket>& packets,
                          const FgerState& in_state, RunMode mode,
                          bool correct_every_packet = false) const;

    // Forward + backward of the per-cycle loss
    //   (f_final - y_M)^2 + lambda * mean_m (f_hat_m - y_m)^2
    // with the incoming state treated as constant (one-cycle truncation).
    // Gradients accumulate into the store; the state advances as in run_cycle.
    double train_cycle(const Cycle& cycle, FgerState* state, double lambda);

    // Loss only, state untouched.
    double cycle_loss(const Cycle& cycle, const FgerState& state, double lambda) const;

    PredictionTrace predict(const std::vector<Cycle>& cycles,
                            bool correct_every_packet = false) const;

private:
    FgerConfig cfg_;
    Variant variant_;
    nn::ParamStore store_;
    nn::EventEncoder event_enc_;
    std::unique_ptr<nn::FrameEncoder> frame_enc_; // absent in events_only
    nn::LstmCell lstm_;
    nn::Mlp head_df_;
    std::unique_ptr<nn::Mlp> head_corr_;
};

// ---------------------------------------------------------------------------
// Frames-only ablation: frame encoder into a regression head, one prediction
// per frame.
// ---------------------------------------------------------------------------
class FramesOnlyNet {
public:
    explicit FramesOnlyNet(const FgerConfig& cfg);
    FramesOnlyNet(const FramesOnlyNet&) = delete;

    void init_params(std::uint64_t seed);
    nn::ParamStore& store() { return store_; }
    const FgerConfig& config() const { return cfg_; }

    double predict_frame(const Frame& frame) const;
    double train_frame(const Frame& frame, double label);
    PredictionTrace predict(const std::vector<Frame>& frames) const;

private:
    FgerConfig cfg_;
    nn::ParamStore store_;
    nn::FrameEncoder enc_;
    nn::Mlp head_;
};

// ---------------------------------------------------------------------------
// Feature-level fusion baseline: the cycle's events rasterized into a
// two-channel polarity count image, a second convolutional branch, channel
// concatenation, MLP regression; one prediction per cycle.
// ---------------------------------------------------------------------------
class BaselineNet {
public:
    explicit BaselineNet(const FgerConfig& cfg);
    BaselineNet(const BaselineNet&) = delete;

    void init_params(std::uint64_t seed);
    nn::ParamStore& store() { return store_; }
    const FgerConfig& config() const { return cfg_; }

    // Raw per-pixel counts, channel 0 = positive, channel 1 = negative.
    static nn::Vec build_raster(const std::vector<EventPacket>& packets, int width, int height);

    double predict_cycle(const Cycle& cycle) const;
    double train_cycle(const Cycle& cycle); // squared error at the cycle end
    PredictionTrace predict(const std::vector<Cycle>& cycles) const;

private:
    FgerConfig cfg_;
    nn::ParamStore store_;
    nn::FrameEncoder frame_enc_;
    nn::FrameEncoder raster_enc_;
    nn::Mlp head_;
    double raster_scale_ = 0.125; // counts are divided by 8 at the input
};

// ---------------------------------------------------------------------------
// Data loading, splits, training
// ---------------------------------------------------------------------------

struct TrialData {
    std::string name;
    std::vector<Cycle> cycles;
    std::vector<Frame> frames;
    ForceTrace force;
};

TrialData load_trial(const std::filesystem::path& trial_dir,
                     const packetize::PacketizeConfig& pconfig);
std::vector<TrialData> load_dataset(const std::filesystem::path& dataset_dir,
                                    const packetize::PacketizeConfig& pconfig);

struct Split {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
};

// Trajectory-level split; throws if the two sides are not disjoint.
Split trial_split(std::size_t n_trials, double val_fraction, std::uint64_t seed);

struct TrainConfig {
    Variant variant = Variant::fusion;
    FgerConfig model;
    int epochs = 50;
    int batch = 128;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double lambda = 0.2;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    int threads = 1;
    bool correct_every_packet = false;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
    std::vector<std::string> train_trials;
    std::vector<std::string> val_trials;
    double final_val_mae = 0.0;
};

// Trains the requested variant and writes the checkpoint (updated every
// epoch with the running validation MAE). Deterministic for a fixed seed and
// any thread count: per-trial gradient buffers are reduced in trial order.
TrainResult train_model(const std::vector<TrialData>& trials, const TrainConfig& cfg,
                        const std::filesystem::path& ckpt_path);

// A checkpointed model of any variant, ready for prediction.
class LoadedModel {
public:
    explicit LoadedModel(const std::filesystem::path& ckpt_path);

    Variant variant() const { return variant_; }
    const FgerConfig& config() const { return cfg_; }
    const nlohmann::json& meta() const { return meta_; }

    // Throws on a delta_t mismatch between checkpoint and trial packets.
    PredictionTrace predict(const TrialData& trial, bool correct_every_packet = false) const;

private:
    Variant variant_;
    FgerConfig cfg_;
    nlohmann::json meta_;
    std::unique_ptr<FgerNet> fger_;
    std::unique_ptr<FramesOnlyNet> frames_;
    std::unique_ptr<BaselineNet> baseline_;
};

} // namespace mixtac::fger
