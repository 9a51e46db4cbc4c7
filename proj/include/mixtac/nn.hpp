#pragma once

#include "mixtac/rng.hpp"
#include "mixtac/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mixtac::nn {

using Vec = std::vector<double>;

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<std::size_t> shape);
    std::size_t size() const { return data.size(); }
};

// Named parameters with matching gradient slots. Registration order is the
// canonical order for checkpoints and optimizer state, so construction must
// be deterministic.
class ParamStore {
public:
    std::size_t add(const std::string& name, std::vector<std::size_t> shape);

    std::size_t index_of(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& value(std::size_t idx) { return values_[idx]; }
    const Tensor& value(std::size_t idx) const { return values_[idx]; }
    Tensor& grad(std::size_t idx) { return grads_[idx]; }
    const Tensor& grad(std::size_t idx) const { return grads_[idx]; }

    Tensor& value(const std::string& name) { return values_[index_of(name)]; }
    const Tensor& value(const std::string& name) const { return values_[index_of(name)]; }
    Tensor& grad(const std::string& name) { return grads_[index_of(name)]; }

    const std::vector<std::string>& names() const { return order_; }
    std::size_t count() const { return values_.size(); }
    std::size_t total_values() const;

    void zero_grads();
    void scale_grads(double factor);

    // Adds src grads into ours; shapes must agree (fixed-order batch reduce).
    void accumulate_grads_from(const ParamStore& src);
    void copy_values_from(const ParamStore& src);

    std::uint64_t step = 0;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
};

// Uniform in +-sqrt(6/(fan_in+fan_out)).
void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------------------
// Event encoder: per-event normalization, shared pointwise MLP
// (4 -> hidden -> out, tanh on both layers), coordinate-wise max over the
// packet. Empty packets map to the zero vector.
// ---------------------------------------------------------------------------

struct NormStats {
    int sensor_width = 0;
    int sensor_height = 0;
};

struct EventEncoderConfig {
    int hidden = 32;
    int out = 32; // D_e
};

class EventEncoder {
public:
    EventEncoder(ParamStore& store, std::string prefix, EventEncoderConfig cfg);
    void init(Rng& rng);

    struct Cache {
        std::size_t n = 0;
        Vec in;           // n x 4
        Vec hidden;       // n x H, post-tanh
        Vec feature;      // D, post-tanh max
        std::vector<std::ptrdiff_t> argmax; // D, event index or -1
    };

    Vec forward(const EventPacket& packet, const NormStats& norm, Cache* cache) const;
    void backward(const Cache& cache, const Vec& dout) const;

    const EventEncoderConfig& config() const { return cfg_; }

private:
    ParamStore* store_;
    EventEncoderConfig cfg_;
    std::size_t w1_, b1_, w2_, b2_;
};

// ---------------------------------------------------------------------------
// Frame encoder: conv 3x3/stride 2 -> tanh -> 2x2 average pool ->
// conv 3x3 with identity skip -> tanh -> global average pool -> dense.
// ---------------------------------------------------------------------------

struct FrameEncoderConfig {
    int width = 64;
    int height = 48;
    int channels = 6;
    int in_channels = 1;
    int out = 32; // D_f
};

class FrameEncoder {
public:
    FrameEncoder(ParamStore& store, std::string prefix, FrameEncoderConfig cfg);
    void init(Rng& rng);

    struct Cache {
        Vec input; // in_channels x H x W
        Vec a1;    // C x H1 x W1 post-tanh
        Vec pooled;// C x H2 x W2
        Vec a2;    // C x H2 x W2 post-tanh
        Vec gap;   // C
    };

    // Raw channel-major input (in_channels * height * width).
    Vec forward_raw(const Vec& chw, Cache* cache) const;
    Vec forward(const Frame& frame, Cache* cache) const;
    void backward(const Cache& cache, const Vec& dout) const;

    const FrameEncoderConfig& config() const { return cfg_; }
    int pooled_h() const;
    int pooled_w() const;

private:
    ParamStore* store_;
    FrameEncoderConfig cfg_;
    std::size_t c1w_, c1b_, c2w_, c2b_, pw_, pb_;
    int h1_, w1_, h2_, w2_;
};

// ---------------------------------------------------------------------------
// LSTM cell, gate order (i, f, g, o), sigmoid gates, tanh candidate.
// ---------------------------------------------------------------------------

struct RecurrentConfig {
    int input = 33; // D_e + 1
    int hidden = 64;
};

class LstmCell {
public:
    LstmCell(ParamStore& store, std::string prefix, RecurrentConfig cfg);
    void init(Rng& rng); // forget-gate bias starts at 1

    struct Cache {
        Vec x, h_prev, c_prev;
        Vec i, f, g, o; // post-activation gates
        Vec c, tanh_c;
    };

    void forward(const Vec& x, const Vec& h_prev, const Vec& c_prev,
                 Vec* h_out, Vec* c_out, Cache* cache) const;
    // dh/dc are gradients w.r.t. this step's outputs; returns grads w.r.t.
    // inputs via the out parameters (accumulated, callers zero them).
    void backward(const Cache& cache, const Vec& dh, const Vec& dc,
                  Vec* dx, Vec* dh_prev, Vec* dc_prev) const;

    const RecurrentConfig& config() const { return cfg_; }

private:
    ParamStore* store_;
    RecurrentConfig cfg_;
    std::size_t w_ih_, w_hh_, b_;
};

// ---------------------------------------------------------------------------
// Plain MLP: affine layers with tanh between them, affine (unbounded) output.
// widths = {in, hidden..., out}; a two-entry widths list is a single affine.
// ---------------------------------------------------------------------------

class Mlp {
public:
    Mlp(ParamStore& store, std::string prefix, std::vector<int> widths);
    void init(Rng& rng);

    struct Cache {
        std::vector<Vec> acts; // acts[0] = input, acts[i] = output of layer i (post-tanh except last)
    };

    Vec forward(const Vec& in, Cache* cache) const;
    Vec backward(const Cache& cache, const Vec& dout) const; // returns d(in)

    int in_width() const { return widths_.front(); }
    int out_width() const { return widths_.back(); }

private:
    ParamStore* store_;
    std::vector<int> widths_;
    std::vector<std::size_t> w_, b_;
};

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay and bias-corrected moments.
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
public:
    AdamW(ParamStore& store, AdamWConfig cfg);

    // Applies one update from the store's gradient slots and bumps the step
    // counter. Throws MixtacError naming the parameter on a non-finite grad.
    void step();

    const AdamWConfig& config() const { return cfg_; }

private:
    ParamStore* store_;
    AdamWConfig cfg_;
    std::vector<Vec> m_, v_;
};

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest (names, shapes, config, seed, step) followed by
// one little-endian f64 blob in manifest order.
// ---------------------------------------------------------------------------

void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::filesystem::path& path);

// Loads values into an already-constructed store; every manifest entry must
// match an existing parameter's shape. Returns the manifest.
nlohmann::json load_checkpoint(ParamStore& store, const std::filesystem::path& path);

// Reads just the manifest (for config validation before building a model).
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

} // namespace mixtac::nn
