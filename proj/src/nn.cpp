#include "mixtac/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mixtac::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b, W row-major [rows x cols]
inline void matvec(const double* w, const double* b, const double* x,
                   int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        double acc = b ? b[r] : 0.0;
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

// dW += dy (outer) x ; db += dy ; dx += W^T dy
inline void matvec_backward(const double* w, const double* x, const double* dy,
                            int rows, int cols, double* dw, double* db, double* dx) {
    for (int r = 0; r < rows; ++r) {
        double d = dy[r];
        if (db) db[r] += d;
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        double* dwr = dw ? dw + static_cast<std::size_t>(r) * cols : nullptr;
        for (int c = 0; c < cols; ++c) {
            if (dwr) dwr[c] += d * x[c];
            if (dx) dx[c] += d * wr[c];
        }
    }
}

// 3x3 convolution, padding 1.
void conv3x3(const double* x, int ci_n, int h, int w,
             const double* wgt, const double* bias, int co_n, int stride,
             double* y, int oh, int ow) {
    for (int co = 0; co < co_n; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias[co];
                int iy0 = oy * stride - 1;
                int ix0 = ox * stride - 1;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const double* xc = x + static_cast<std::size_t>(ci) * h * w;
                    const double* wc = wgt + ((static_cast<std::size_t>(co) * ci_n + ci) * 9);
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* row = xc + static_cast<std::size_t>(iy) * w;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += wc[ky * 3 + kx] * row[ix];
                        }
                    }
                }
                y[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
            }
        }
    }
}

void conv3x3_backward(const double* x, int ci_n, int h, int w,
                      const double* wgt, int co_n, int stride,
                      const double* dy, int oh, int ow,
                      double* dwgt, double* dbias, double* dx) {
    for (int co = 0; co < co_n; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double d = dy[(static_cast<std::size_t>(co) * oh + oy) * ow + ox];
                if (d == 0.0) continue;
                dbias[co] += d;
                int iy0 = oy * stride - 1;
                int ix0 = ox * stride - 1;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const double* xc = x + static_cast<std::size_t>(ci) * h * w;
                    double* dxc = dx ? dx + static_cast<std::size_t>(ci) * h * w : nullptr;
                    const double* wc = wgt + ((static_cast<std::size_t>(co) * ci_n + ci) * 9);
                    double* dwc = dwgt + ((static_cast<std::size_t>(co) * ci_n + ci) * 9);
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            std::size_t off = static_cast<std::size_t>(iy) * w + ix;
                            dwc[ky * 3 + kx] += d * xc[off];
                            if (dxc) dxc[off] += d * wc[ky * 3 + kx];
                        }
                    }
                }
            }
        }
    }
}

} // namespace

// --------------------------------------------------------------------------
// Tensor / ParamStore
// --------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
}

std::size_t ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) throw MixtacError("duplicate parameter name: " + name);
    std::size_t idx = values_.size();
    index_[name] = idx;
    order_.push_back(name);
    values_.push_back(Tensor::zeros(shape));
    grads_.push_back(Tensor::zeros(std::move(shape)));
    return idx;
}

std::size_t ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw MixtacError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const Tensor& t : values_) n += t.size();
    return n;
}

void ParamStore::zero_grads() {
    for (Tensor& g : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

void ParamStore::scale_grads(double factor) {
    for (Tensor& g : grads_) {
        for (double& v : g.data) v *= factor;
    }
}

void ParamStore::accumulate_grads_from(const ParamStore& src) {
    if (src.count() != count()) throw MixtacError("grad accumulate: store layout mismatch");
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        const Tensor& s = src.grads_[i];
        Tensor& d = grads_[i];
        if (s.size() != d.size()) throw MixtacError("grad accumulate: shape mismatch");
        for (std::size_t k = 0; k < d.data.size(); ++k) d.data[k] += s.data[k];
    }
}

void ParamStore::copy_values_from(const ParamStore& src) {
    if (src.count() != count()) throw MixtacError("value copy: store layout mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i].data = src.values_[i].data;
    }
}

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
}

// --------------------------------------------------------------------------
// EventEncoder
// --------------------------------------------------------------------------

EventEncoder::EventEncoder(ParamStore& store, std::string prefix, EventEncoderConfig cfg)
    : store_(&store), cfg_(cfg) {
    if (cfg.hidden < 1 || cfg.out < 1) throw MixtacError("event encoder widths must be >= 1");
    w1_ = store.add(prefix + ".l1.w", {static_cast<std::size_t>(cfg.hidden), 4});
    b1_ = store.add(prefix + ".l1.b", {static_cast<std::size_t>(cfg.hidden)});
    w2_ = store.add(prefix + ".l2.w",
                    {static_cast<std::size_t>(cfg.out), static_cast<std::size_t>(cfg.hidden)});
    b2_ = store.add(prefix + ".l2.b", {static_cast<std::size_t>(cfg.out)});
}

void EventEncoder::init(Rng& rng) {
    glorot_init(store_->value(w1_), 4, cfg_.hidden, rng);
    glorot_init(store_->value(w2_), cfg_.hidden, cfg_.out, rng);
}

Vec EventEncoder::forward(const EventPacket& packet, const NormStats& norm, Cache* cache) const {
    const int H = cfg_.hidden;
    const int D = cfg_.out;
    const std::size_t n = packet.events.size();
    const double span = packet.t_end_s - packet.t_start_s;

    if (cache) {
        cache->n = n;
        cache->in.assign(n * 4, 0.0);
        cache->hidden.assign(n * static_cast<std::size_t>(H), 0.0);
        cache->argmax.assign(D, -1);
    }
    Vec feature(D, 0.0);
    if (n == 0) {
        if (cache) cache->feature = feature;
        return feature;
    }

    const double* w1 = store_->value(w1_).data.data();
    const double* b1 = store_->value(b1_).data.data();
    const double* w2 = store_->value(w2_).data.data();
    const double* b2 = store_->value(b2_).data.data();

    Vec best(D, -std::numeric_limits<double>::infinity());
    std::vector<std::ptrdiff_t> argmax(D, -1);
    Vec in(4), h(H), out(D);
    for (std::size_t e = 0; e < n; ++e) {
        const TimedEvent& ev = packet.events[e];
        const double t = ev.t_s();
        if (t < packet.t_start_s - 1e-12 || t >= packet.t_end_s + 1e-12) {
            throw MixtacError("event outside packet window at index " + std::to_string(e));
        }
        in[0] = static_cast<double>(ev.x) / norm.sensor_width * 2.0 - 1.0;
        in[1] = static_cast<double>(ev.y) / norm.sensor_height * 2.0 - 1.0;
        in[2] = (t - packet.t_start_s) / span * 2.0 - 1.0;
        in[3] = static_cast<double>(ev.polarity);
        matvec(w1, b1, in.data(), H, 4, h.data());
        for (int k = 0; k < H; ++k) h[k] = std::tanh(h[k]);
        matvec(w2, b2, h.data(), D, H, out.data());
        for (int d = 0; d < D; ++d) {
            double v = std::tanh(out[d]);
            if (v > best[d]) {
                best[d] = v;
                argmax[d] = static_cast<std::ptrdiff_t>(e);
            }
        }
        if (cache) {
            std::copy(in.begin(), in.end(), cache->in.begin() + e * 4);
            std::copy(h.begin(), h.end(), cache->hidden.begin() + e * H);
        }
    }
    feature = best;
    if (cache) {
        cache->feature = feature;
        cache->argmax = std::move(argmax);
    }
    return feature;
}

void EventEncoder::backward(const Cache& cache, const Vec& dout) const {
    if (cache.n == 0) return;
    const int H = cfg_.hidden;
    const int D = cfg_.out;
    const double* w1 = store_->value(w1_).data.data();
    const double* w2 = store_->value(w2_).data.data();
    double* dw1 = store_->grad(w1_).data.data();
    double* db1 = store_->grad(b1_).data.data();
    double* dw2 = store_->grad(w2_).data.data();
    double* db2 = store_->grad(b2_).data.data();

    // hidden-layer grads only flow through the argmax winners
    Vec dh(cache.n * static_cast<std::size_t>(H), 0.0);
    std::vector<std::ptrdiff_t> touched;
    for (int d = 0; d < D; ++d) {
        std::ptrdiff_t e = cache.argmax[d];
        if (e < 0 || dout[d] == 0.0) continue;
        double y = cache.feature[d];
        double dpre = dout[d] * (1.0 - y * y);
        db2[d] += dpre;
        const double* he = cache.hidden.data() + e * H;
        double* dhe = dh.data() + e * H;
        const double* w2r = w2 + static_cast<std::size_t>(d) * H;
        double* dw2r = dw2 + static_cast<std::size_t>(d) * H;
        for (int k = 0; k < H; ++k) {
            dw2r[k] += dpre * he[k];
            dhe[k] += dpre * w2r[k];
        }
        touched.push_back(e);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (std::ptrdiff_t e : touched) {
        const double* he = cache.hidden.data() + e * H;
        const double* xe = cache.in.data() + e * 4;
        Vec dpre1(H);
        for (int k = 0; k < H; ++k) dpre1[k] = dh[e * H + k] * (1.0 - he[k] * he[k]);
        matvec_backward(w1, xe, dpre1.data(), H, 4, dw1, db1, nullptr);
    }
}

// --------------------------------------------------------------------------
// FrameEncoder
// --------------------------------------------------------------------------

FrameEncoder::FrameEncoder(ParamStore& store, std::string prefix, FrameEncoderConfig cfg)
    : store_(&store), cfg_(cfg) {
    if (cfg.channels < 1 || cfg.out < 1) throw MixtacError("frame encoder widths must be >= 1");
    h1_ = (cfg.height + 2 - 3) / 2 + 1;
    w1_ = (cfg.width + 2 - 3) / 2 + 1;
    if (h1_ % 2 != 0 || w1_ % 2 != 0) {
        throw MixtacError("frame encoder needs even post-conv dims; got " +
                          std::to_string(w1_) + "x" + std::to_string(h1_));
    }
    h2_ = h1_ / 2;
    w2_ = w1_ / 2;
    auto C = static_cast<std::size_t>(cfg.channels);
    auto CI = static_cast<std::size_t>(cfg.in_channels);
    c1w_ = store.add(prefix + ".conv1.w", {C, CI, 3, 3});
    c1b_ = store.add(prefix + ".conv1.b", {C});
    c2w_ = store.add(prefix + ".conv2.w", {C, C, 3, 3});
    c2b_ = store.add(prefix + ".conv2.b", {C});
    pw_ = store.add(prefix + ".proj.w", {static_cast<std::size_t>(cfg.out), C});
    pb_ = store.add(prefix + ".proj.b", {static_cast<std::size_t>(cfg.out)});
}

int FrameEncoder::pooled_h() const { return h2_; }
int FrameEncoder::pooled_w() const { return w2_; }

void FrameEncoder::init(Rng& rng) {
    glorot_init(store_->value(c1w_), static_cast<std::size_t>(cfg_.in_channels) * 9,
                static_cast<std::size_t>(cfg_.channels) * 9, rng);
    glorot_init(store_->value(c2w_), static_cast<std::size_t>(cfg_.channels) * 9,
                static_cast<std::size_t>(cfg_.channels) * 9, rng);
    glorot_init(store_->value(pw_), cfg_.channels, cfg_.out, rng);
}

Vec FrameEncoder::forward_raw(const Vec& chw, Cache* cache) const {
    const int C = cfg_.channels;
    const std::size_t expect =
        static_cast<std::size_t>(cfg_.in_channels) * cfg_.height * cfg_.width;
    if (chw.size() != expect) {
        throw MixtacError("frame encoder input size mismatch: got " +
                          std::to_string(chw.size()) + ", want " + std::to_string(expect));
    }

    Vec a1(static_cast<std::size_t>(C) * h1_ * w1_);
    conv3x3(chw.data(), cfg_.in_channels, cfg_.height, cfg_.width,
            store_->value(c1w_).data.data(), store_->value(c1b_).data.data(), C, 2,
            a1.data(), h1_, w1_);
    for (double& v : a1) v = std::tanh(v);

    Vec pooled(static_cast<std::size_t>(C) * h2_ * w2_);
    for (int c = 0; c < C; ++c) {
        const double* src = a1.data() + static_cast<std::size_t>(c) * h1_ * w1_;
        double* dst = pooled.data() + static_cast<std::size_t>(c) * h2_ * w2_;
        for (int y = 0; y < h2_; ++y) {
            for (int x = 0; x < w2_; ++x) {
                const double* p = src + (2 * y) * w1_ + 2 * x;
                dst[y * w2_ + x] = 0.25 * (p[0] + p[1] + p[w1_] + p[w1_ + 1]);
            }
        }
    }

    Vec a2(pooled.size());
    conv3x3(pooled.data(), C, h2_, w2_, store_->value(c2w_).data.data(),
            store_->value(c2b_).data.data(), C, 1, a2.data(), h2_, w2_);
    for (std::size_t i = 0; i < a2.size(); ++i) a2[i] = std::tanh(a2[i] + pooled[i]);

    Vec gap(C, 0.0);
    const double inv_area = 1.0 / (h2_ * w2_);
    for (int c = 0; c < C; ++c) {
        const double* p = a2.data() + static_cast<std::size_t>(c) * h2_ * w2_;
        double acc = 0.0;
        for (int i = 0; i < h2_ * w2_; ++i) acc += p[i];
        gap[c] = acc * inv_area;
    }

    Vec out(cfg_.out);
    matvec(store_->value(pw_).data.data(), store_->value(pb_).data.data(), gap.data(),
           cfg_.out, C, out.data());

    if (cache) {
        cache->input = chw;
        cache->a1 = std::move(a1);
        cache->pooled = std::move(pooled);
        cache->a2 = std::move(a2);
        cache->gap = std::move(gap);
    }
    return out;
}

Vec FrameEncoder::forward(const Frame& frame, Cache* cache) const {
    if (cfg_.in_channels != 1 || frame.width != cfg_.width || frame.height != cfg_.height) {
        throw MixtacError("frame shape mismatch: got " + std::to_string(frame.width) + "x" +
                          std::to_string(frame.height) + ", config " +
                          std::to_string(cfg_.width) + "x" + std::to_string(cfg_.height));
    }
    return forward_raw(frame.pixels, cache);
}

void FrameEncoder::backward(const Cache& cache, const Vec& dout) const {
    const int C = cfg_.channels;
    Vec dgap(C, 0.0);
    matvec_backward(store_->value(pw_).data.data(), cache.gap.data(), dout.data(),
                    cfg_.out, C, store_->grad(pw_).data.data(),
                    store_->grad(pb_).data.data(), dgap.data());

    const double inv_area = 1.0 / (h2_ * w2_);
    Vec dpre2(cache.a2.size());
    for (int c = 0; c < C; ++c) {
        double d = dgap[c] * inv_area;
        const double* a2c = cache.a2.data() + static_cast<std::size_t>(c) * h2_ * w2_;
        double* dp = dpre2.data() + static_cast<std::size_t>(c) * h2_ * w2_;
        for (int i = 0; i < h2_ * w2_; ++i) dp[i] = d * (1.0 - a2c[i] * a2c[i]);
    }

    // skip connection: pooled feeds both conv2 and the sum directly
    Vec dpooled = dpre2;
    conv3x3_backward(cache.pooled.data(), C, h2_, w2_, store_->value(c2w_).data.data(), C, 1,
                     dpre2.data(), h2_, w2_, store_->grad(c2w_).data.data(),
                     store_->grad(c2b_).data.data(), dpooled.data());

    Vec da1(cache.a1.size(), 0.0);
    for (int c = 0; c < C; ++c) {
        const double* dp = dpooled.data() + static_cast<std::size_t>(c) * h2_ * w2_;
        double* da = da1.data() + static_cast<std::size_t>(c) * h1_ * w1_;
        for (int y = 0; y < h2_; ++y) {
            for (int x = 0; x < w2_; ++x) {
                double d = 0.25 * dp[y * w2_ + x];
                double* p = da + (2 * y) * w1_ + 2 * x;
                p[0] += d;
                p[1] += d;
                p[w1_] += d;
                p[w1_ + 1] += d;
            }
        }
    }
    for (std::size_t i = 0; i < da1.size(); ++i) {
        da1[i] *= (1.0 - cache.a1[i] * cache.a1[i]);
    }
    conv3x3_backward(cache.input.data(), cfg_.in_channels, cfg_.height, cfg_.width,
                     store_->value(c1w_).data.data(), C, 2, da1.data(), h1_, w1_,
                     store_->grad(c1w_).data.data(), store_->grad(c1b_).data.data(), nullptr);
}

// --------------------------------------------------------------------------
// LstmCell
// --------------------------------------------------------------------------

LstmCell::LstmCell(ParamStore& store, std::string prefix, RecurrentConfig cfg)
    : store_(&store), cfg_(cfg) {
    if (cfg.hidden < 1 || cfg.input < 1) throw MixtacError("lstm widths must be >= 1");
    auto H = static_cast<std::size_t>(cfg.hidden);
    auto X = static_cast<std::size_t>(cfg.input);
    w_ih_ = store.add(prefix + ".w_ih", {4 * H, X});
    w_hh_ = store.add(prefix + ".w_hh", {4 * H, H});
    b_ = store.add(prefix + ".b", {4 * H});
}

void LstmCell::init(Rng& rng) {
    glorot_init(store_->value(w_ih_), cfg_.input, 4 * cfg_.hidden, rng);
    glorot_init(store_->value(w_hh_), cfg_.hidden, 4 * cfg_.hidden, rng);
    Tensor& b = store_->value(b_);
    std::fill(b.data.begin(), b.data.end(), 0.0);
    for (int k = 0; k < cfg_.hidden; ++k) b.data[cfg_.hidden + k] = 1.0; // forget gate
}

void LstmCell::forward(const Vec& x, const Vec& h_prev, const Vec& c_prev,
                       Vec* h_out, Vec* c_out, Cache* cache) const {
    const int H = cfg_.hidden;
    const int X = cfg_.input;
    if (static_cast<int>(x.size()) != X || static_cast<int>(h_prev.size()) != H ||
        static_cast<int>(c_prev.size()) != H) {
        throw MixtacError("lstm input width mismatch");
    }
    Vec pre(4 * H);
    matvec(store_->value(w_ih_).data.data(), store_->value(b_).data.data(), x.data(), 4 * H, X,
           pre.data());
    // add W_hh h
    {
        const double* w = store_->value(w_hh_).data.data();
        for (int r = 0; r < 4 * H; ++r) {
            double acc = pre[r];
            const double* wr = w + static_cast<std::size_t>(r) * H;
            for (int c = 0; c < H; ++c) acc += wr[c] * h_prev[c];
            pre[r] = acc;
        }
    }
    Vec i(H), f(H), g(H), o(H), c(H), tc(H);
    for (int k = 0; k < H; ++k) {
        i[k] = sigmoid(pre[k]);
        f[k] = sigmoid(pre[H + k]);
        g[k] = std::tanh(pre[2 * H + k]);
        o[k] = sigmoid(pre[3 * H + k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tc[k] = std::tanh(c[k]);
    }
    h_out->resize(H);
    c_out->resize(H);
    for (int k = 0; k < H; ++k) {
        (*h_out)[k] = o[k] * tc[k];
        (*c_out)[k] = c[k];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->c_prev = c_prev;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->c = std::move(c);
        cache->tanh_c = std::move(tc);
    }
}

void LstmCell::backward(const Cache& cache, const Vec& dh, const Vec& dc,
                        Vec* dx, Vec* dh_prev, Vec* dc_prev) const {
    const int H = cfg_.hidden;
    const int X = cfg_.input;
    Vec dpre(4 * H);
    dc_prev->assign(H, 0.0);
    for (int k = 0; k < H; ++k) {
        double dtc = dh[k] * cache.o[k];
        double dck = dc[k] + dtc * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
        double dok = dh[k] * cache.tanh_c[k];
        double dik = dck * cache.g[k];
        double dfk = dck * cache.c_prev[k];
        double dgk = dck * cache.i[k];
        (*dc_prev)[k] = dck * cache.f[k];
        dpre[k] = dik * cache.i[k] * (1.0 - cache.i[k]);
        dpre[H + k] = dfk * cache.f[k] * (1.0 - cache.f[k]);
        dpre[2 * H + k] = dgk * (1.0 - cache.g[k] * cache.g[k]);
        dpre[3 * H + k] = dok * cache.o[k] * (1.0 - cache.o[k]);
    }
    dx->assign(X, 0.0);
    dh_prev->assign(H, 0.0);
    matvec_backward(store_->value(w_ih_).data.data(), cache.x.data(), dpre.data(), 4 * H, X,
                    store_->grad(w_ih_).data.data(), store_->grad(b_).data.data(), dx->data());
    matvec_backward(store_->value(w_hh_).data.data(), cache.h_prev.data(), dpre.data(), 4 * H, H,
                    store_->grad(w_hh_).data.data(), nullptr, dh_prev->data());
}

// --------------------------------------------------------------------------
// Mlp
// --------------------------------------------------------------------------

Mlp::Mlp(ParamStore& store, std::string prefix, std::vector<int> widths)
    : store_(&store), widths_(std::move(widths)) {
    if (widths_.size() < 2) throw MixtacError("mlp needs at least {in, out} widths");
    for (int w : widths_) {
        if (w < 1) throw MixtacError("mlp widths must be >= 1");
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        w_.push_back(store.add(prefix + ".l" + std::to_string(l + 1) + ".w",
                               {static_cast<std::size_t>(widths_[l + 1]),
                                static_cast<std::size_t>(widths_[l])}));
        b_.push_back(store.add(prefix + ".l" + std::to_string(l + 1) + ".b",
                               {static_cast<std::size_t>(widths_[l + 1])}));
    }
}

void Mlp::init(Rng& rng) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        glorot_init(store_->value(w_[l]), widths_[l], widths_[l + 1], rng);
    }
}

Vec Mlp::forward(const Vec& in, Cache* cache) const {
    if (static_cast<int>(in.size()) != widths_.front()) {
        throw MixtacError("mlp input width mismatch");
    }
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(in);
    }
    Vec a = in;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Vec z(widths_[l + 1]);
        matvec(store_->value(w_[l]).data.data(), store_->value(b_[l]).data.data(), a.data(),
               widths_[l + 1], widths_[l], z.data());
        if (l + 1 < w_.size()) {
            for (double& v : z) v = std::tanh(v);
        }
        a = std::move(z);
        if (cache) cache->acts.push_back(a);
    }
    return a;
}

Vec Mlp::backward(const Cache& cache, const Vec& dout) const {
    Vec d = dout;
    for (std::size_t l = w_.size(); l-- > 0;) {
        Vec dz = d;
        if (l + 1 < w_.size()) {
            const Vec& a = cache.acts[l + 1];
            for (std::size_t k = 0; k < dz.size(); ++k) dz[k] *= (1.0 - a[k] * a[k]);
        }
        Vec din(widths_[l], 0.0);
        matvec_backward(store_->value(w_[l]).data.data(), cache.acts[l].data(), dz.data(),
                        widths_[l + 1], widths_[l], store_->grad(w_[l]).data.data(),
                        store_->grad(b_[l]).data.data(), din.data());
        d = std::move(din);
    }
    return d;
}

// --------------------------------------------------------------------------
// AdamW
// --------------------------------------------------------------------------

AdamW::AdamW(ParamStore& store, AdamWConfig cfg) : store_(&store), cfg_(cfg) {
    m_.resize(store.count());
    v_.resize(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
        m_[i].assign(store.value(i).size(), 0.0);
        v_[i].assign(store.value(i).size(), 0.0);
    }
}

void AdamW::step() {
    std::uint64_t t = ++store_->step;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < store_->count(); ++i) {
        Tensor& p = store_->value(i);
        const Tensor& g = store_->grad(i);
        Vec& m = m_[i];
        Vec& v = v_[i];
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            double gk = g.data[k];
            if (!std::isfinite(gk)) {
                throw MixtacError("non-finite gradient in parameter " + store_->names()[i]);
            }
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
            double mhat = m[k] / bc1;
            double vhat = v[k] / bc2;
            p.data[k] -= cfg_.lr * cfg_.weight_decay * p.data[k];
            p.data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

// --------------------------------------------------------------------------
// Checkpoints
// --------------------------------------------------------------------------

namespace {
constexpr char kCkptMagic[8] = {'M', 'X', 'T', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::filesystem::path& path) {
    nlohmann::json manifest = meta;
    manifest["step"] = store.step;
    nlohmann::json params = nlohmann::json::array();
    for (const std::string& name : store.names()) {
        const Tensor& t = store.value(store.index_of(name));
        params.push_back({{"name", name}, {"shape", t.shape}});
    }
    manifest["params"] = params;
    std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MixtacError("cannot open " + path.string() + " for writing");
    out.write(kCkptMagic, 8);
    std::uint64_t len = mtext.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(lenbuf, 8);
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const std::string& name : store.names()) {
        const Tensor& t = store.value(store.index_of(name));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!out.good()) throw MixtacError("I/O failure writing " + path.string());
}

namespace {

nlohmann::json read_manifest(std::ifstream& in, const std::filesystem::path& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in.good() || std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw MixtacError("not a checkpoint file: " + path.string());
    }
    char lenbuf[8];
    in.read(lenbuf, 8);
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(lenbuf[i]);
    std::string mtext(len, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(len));
    if (!in.good()) throw MixtacError("truncated checkpoint manifest in " + path.string());
    return nlohmann::json::parse(mtext);
}

} // namespace

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MixtacError("cannot open " + path.string());
    return read_manifest(in, path);
}

nlohmann::json load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MixtacError("cannot open " + path.string());
    nlohmann::json manifest = read_manifest(in, path);

    const auto& params = manifest.at("params");
    if (params.size() != store.count()) {
        throw MixtacError("checkpoint parameter count mismatch: file has " +
                          std::to_string(params.size()) + ", model has " +
                          std::to_string(store.count()));
    }
    for (const auto& entry : params) {
        std::string name = entry.at("name");
        std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (!store.contains(name)) throw MixtacError("checkpoint has unknown parameter " + name);
        Tensor& t = store.value(name);
        if (t.shape != shape) {
            throw MixtacError("checkpoint shape mismatch for " + name);
        }
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in.good()) throw MixtacError("truncated checkpoint blob in " + path.string());
    }
    store.step = manifest.value("step", 0ull);
    return manifest;
}

} // namespace mixtac::nn
