#pragma once

// Unrolled re-implementation of one recurrent fusion cycle, used only as a
// cross-check oracle. It reads raw weight arrays from the store and spells
// out every stage in plain loops; none of the library's forward code runs.

#include "mixtac/fger.hpp"
#include "mixtac/nn.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec affine(const mixtac::nn::ParamStore& s, const std::string& w_name,
                  const std::string& b_name, const Vec& x) {
    const auto& w = s.value(w_name);
    const auto& b = s.value(b_name);
    std::size_t rows = w.shape[0], cols = w.shape[1];
    Vec y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b.data[r];
        for (std::size_t c = 0; c < cols; ++c) acc += w.data[r * cols + c] * x[c];
        y[r] = acc;
    }
    return y;
}

// frame path: conv(3x3, stride 2, pad 1) -> tanh -> 2x2 mean pool ->
// conv(3x3, pad 1) + skip -> tanh -> global mean -> affine
inline Vec frame_feature(const mixtac::nn::ParamStore& s, const mixtac::fger::FgerConfig& cfg,
                         const mixtac::Frame& guide) {
    const int W = cfg.frame_enc.width, H = cfg.frame_enc.height, C = cfg.frame_enc.channels;
    const int H1 = (H - 1) / 2 + 1, W1 = (W - 1) / 2 + 1;
    const int H2 = H1 / 2, W2 = W1 / 2;
    const auto& w1 = s.value("frame_enc.conv1.w").data;
    const auto& b1 = s.value("frame_enc.conv1.b").data;
    std::vector<double> a1(static_cast<std::size_t>(C) * H1 * W1, 0.0);
    for (int co = 0; co < C; ++co) {
        for (int oy = 0; oy < H1; ++oy) {
            for (int ox = 0; ox < W1; ++ox) {
                double acc = b1[co];
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        acc += w1[(co * 9) + ky * 3 + kx] * guide.pixels[iy * W + ix];
                    }
                }
                a1[(co * H1 + oy) * W1 + ox] = std::tanh(acc);
            }
        }
    }
    std::vector<double> pooled(static_cast<std::size_t>(C) * H2 * W2);
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H2; ++y) {
            for (int x = 0; x < W2; ++x) {
                double acc = a1[(c * H1 + 2 * y) * W1 + 2 * x] +
                             a1[(c * H1 + 2 * y) * W1 + 2 * x + 1] +
                             a1[(c * H1 + 2 * y + 1) * W1 + 2 * x] +
                             a1[(c * H1 + 2 * y + 1) * W1 + 2 * x + 1];
                pooled[(c * H2 + y) * W2 + x] = acc * 0.25;
            }
        }
    }
    const auto& w2 = s.value("frame_enc.conv2.w").data;
    const auto& b2 = s.value("frame_enc.conv2.b").data;
    std::vector<double> a2(pooled.size());
    for (int co = 0; co < C; ++co) {
        for (int oy = 0; oy < H2; ++oy) {
            for (int ox = 0; ox < W2; ++ox) {
                double acc = b2[co];
                for (int ci = 0; ci < C; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            int iy = oy - 1 + ky, ix = ox - 1 + kx;
                            if (iy < 0 || iy >= H2 || ix < 0 || ix >= W2) continue;
                            acc += w2[((co * C + ci) * 9) + ky * 3 + kx] *
                                   pooled[(ci * H2 + iy) * W2 + ix];
                        }
                    }
                }
                std::size_t idx = (co * H2 + oy) * W2 + ox;
                a2[idx] = std::tanh(acc + pooled[idx]);
            }
        }
    }
    Vec gap(C, 0.0);
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < H2 * W2; ++i) acc += a2[c * H2 * W2 + i];
        gap[c] = acc / (H2 * W2);
    }
    return affine(s, "frame_enc.proj.w", "frame_enc.proj.b", gap);
}

// event path: normalize each event, shared two-layer tanh MLP, per-dim max
inline Vec event_feature(const mixtac::nn::ParamStore& s, const mixtac::fger::FgerConfig& cfg,
                         const mixtac::EventPacket& packet) {
    const int De = cfg.event_enc.out;
    Vec best(De, 0.0);
    if (packet.events.empty()) return best;
    bool first = true;
    for (const auto& e : packet.events) {
        Vec in = {static_cast<double>(e.x) / cfg.frame_enc.width * 2.0 - 1.0,
                  static_cast<double>(e.y) / cfg.frame_enc.height * 2.0 - 1.0,
                  (e.t_s() - packet.t_start_s) / (packet.t_end_s - packet.t_start_s) * 2.0 - 1.0,
                  static_cast<double>(e.polarity)};
        Vec h = affine(s, "event_enc.l1.w", "event_enc.l1.b", in);
        for (double& v : h) v = std::tanh(v);
        Vec out = affine(s, "event_enc.l2.w", "event_enc.l2.b", h);
        for (int d = 0; d < De; ++d) {
            double v = std::tanh(out[d]);
            if (first || v > best[d]) best[d] = v;
        }
        first = false;
    }
    return best;
}

inline Vec two_layer_head(const mixtac::nn::ParamStore& s, const std::string& prefix,
                          const Vec& in) {
    Vec h = affine(s, prefix + ".l1.w", prefix + ".l1.b", in);
    for (double& v : h) v = std::tanh(v);
    return affine(s, prefix + ".l2.w", prefix + ".l2.b", h);
}

struct CycleOut {
    std::vector<double> f_seq; // f_hat_0 .. f_hat_M (uncorrected accumulation)
    double f_final = 0.0;
    Vec h, c;
};

inline CycleOut cycle(const mixtac::nn::ParamStore& s, const mixtac::fger::FgerConfig& cfg,
                      bool fused, const mixtac::Frame& guide,
                      const std::vector<mixtac::EventPacket>& packets,
                      const mixtac::fger::FgerState& in) {
    const int H = cfg.lstm_hidden;
    Vec f_frame;
    if (fused) f_frame = frame_feature(s, cfg, guide);

    CycleOut out;
    out.h = in.h;
    out.c = in.c;
    out.f_seq.push_back(in.f_hat);
    double f_hat = in.f_hat;

    const auto& w_ih = s.value("lstm.w_ih");
    const auto& w_hh = s.value("lstm.w_hh");
    const auto& b = s.value("lstm.b").data;
    const std::size_t X = w_ih.shape[1];

    for (const auto& packet : packets) {
        Vec fe = event_feature(s, cfg, packet);
        Vec x = fe;
        x.push_back(f_hat);

        Vec pre(4 * H);
        for (int r = 0; r < 4 * H; ++r) {
            double acc = b[r];
            for (std::size_t k = 0; k < X; ++k) acc += w_ih.data[r * X + k] * x[k];
            for (int k = 0; k < H; ++k) acc += w_hh.data[r * H + k] * out.h[k];
            pre[r] = acc;
        }
        Vec h_next(H), c_next(H);
        for (int k = 0; k < H; ++k) {
            double gi = sig(pre[k]);
            double gf = sig(pre[H + k]);
            double gg = std::tanh(pre[2 * H + k]);
            double go = sig(pre[3 * H + k]);
            c_next[k] = gf * out.c[k] + gi * gg;
            h_next[k] = go * std::tanh(c_next[k]);
        }
        out.h = h_next;
        out.c = c_next;

        double df = two_layer_head(s, "head_df", out.h)[0];
        f_hat = f_hat + df;
        out.f_seq.push_back(f_hat);
    }

    out.f_final = f_hat;
    if (fused) {
        Vec fusion{f_hat};
        fusion.insert(fusion.end(), f_frame.begin(), f_frame.end());
        out.f_final = f_hat + two_layer_head(s, "head_corr", fusion)[0];
    }
    return out;
}

} // namespace oracle
