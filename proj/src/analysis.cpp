#include "mixtac/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mixtac::analysis {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        double lo = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lo);
    }
    return m;
}

} // namespace

MetricReport metrics(const PredictionTrace& pred, const ForceTrace& truth) {
    if (truth.samples.size() < 2) throw MixtacError("metrics: truth trace too short");
    const double t0 = truth.t_begin();
    const double t1 = truth.t_end();

    std::vector<double> err, ref;
    for (const PredictionSample& s : pred.samples) {
        if (s.t_s < t0 || s.t_s > t1) continue;
        double y = interp_force(truth, s.t_s);
        err.push_back(s.f_hat_n - y);
        ref.push_back(y);
    }
    if (err.size() < 2) {
        throw MixtacError("metrics: fewer than 2 overlapping samples between prediction and truth");
    }

    MetricReport report;
    report.n = err.size();
    double abs_acc = 0.0, sq_acc = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        abs_acc += std::abs(err[i]);
        sq_acc += err[i] * err[i];
        mean_y += ref[i];
    }
    mean_y /= static_cast<double>(ref.size());
    report.mae_n = abs_acc / static_cast<double>(err.size());
    report.rmse_n = std::sqrt(sq_acc / static_cast<double>(err.size()));
    double sst = 0.0;
    for (double y : ref) sst += (y - mean_y) * (y - mean_y);
    if (sst > 0.0) {
        report.r2 = 1.0 - sq_acc / sst;
    } else {
        report.r2 = sq_acc == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    return report;
}

RollingMaeSeries rolling_mae(const PredictionTrace& pred, const ForceTrace& truth,
                             double window_s, double bin_width_s) {
    if (window_s <= 0.0) throw MixtacError("rolling_mae: window must be positive");
    const auto& samples = pred.samples;
    if (samples.size() < 2) throw MixtacError("rolling_mae: prediction trace too short");
    double span_lo = std::max(samples.front().t_s, truth.t_begin());
    double span_hi = std::min(samples.back().t_s, truth.t_end());
    if (span_hi - span_lo < window_s) throw MixtacError("rolling_mae: window longer than trace");

    // absolute errors once, then a prefix sum for O(1) window means
    std::vector<double> ts, abs_err;
    ts.reserve(samples.size());
    for (const PredictionSample& s : samples) {
        if (s.t_s < truth.t_begin() || s.t_s > truth.t_end()) continue;
        ts.push_back(s.t_s);
        abs_err.push_back(std::abs(s.f_hat_n - interp_force(truth, s.t_s)));
    }
    std::vector<double> prefix(abs_err.size() + 1, 0.0);
    for (std::size_t i = 0; i < abs_err.size(); ++i) prefix[i + 1] = prefix[i] + abs_err[i];

    RollingMaeSeries series;
    series.window_s = window_s;
    const double half = window_s / 2.0;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double c = ts[i];
        if (c - half < span_lo || c + half > span_hi) continue;
        while (lo < ts.size() && ts[lo] < c - half) ++lo;
        if (hi < lo) hi = lo;
        while (hi < ts.size() && ts[hi] <= c + half) ++hi;
        if (hi > lo) {
            double mae = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
            series.samples.emplace_back(c, mae);
        }
    }
    series.bins = pool_rolling_bins({series}, bin_width_s);
    return series;
}

std::vector<RollingMaeBin> pool_rolling_bins(const std::vector<RollingMaeSeries>& series,
                                             double bin_width_s) {
    if (bin_width_s <= 0.0) throw MixtacError("bin width must be positive");
    std::vector<std::vector<double>> values;
    for (const RollingMaeSeries& s : series) {
        for (const auto& [t, v] : s.samples) {
            auto k = static_cast<std::size_t>(std::floor(t / bin_width_s));
            if (values.size() <= k) values.resize(k + 1);
            values[k].push_back(v);
        }
    }
    std::vector<RollingMaeBin> bins;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k].empty()) continue;
        RollingMaeBin bin;
        bin.t0 = static_cast<double>(k) * bin_width_s;
        bin.t1 = bin.t0 + bin_width_s;
        bin.n = values[k].size();
        bin.median = median_of(values[k]);
        bins.push_back(bin);
    }
    return bins;
}

VibrationSpectrum vibration_spectrum(const EventStream& stream, double t0, double t1,
                                     double bin_s) {
    if (bin_s <= 0.0) throw MixtacError("vibration_spectrum: bin must be positive");
    if (t1 - t0 < 1.0) throw MixtacError("vibration_spectrum: span shorter than 1 s");

    const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / bin_s));
    // bin on integer microseconds so boundary events land deterministically
    const auto t0_us = static_cast<std::int64_t>(std::llround(t0 * 1e6));
    const auto bin_us = static_cast<std::int64_t>(std::llround(bin_s * 1e6));
    if (bin_us <= 0) throw MixtacError("vibration_spectrum: bin below 1 us");
    std::vector<double> counts(n, 0.0);
    for (const TimedEvent& e : stream.events) {
        auto rel = static_cast<std::int64_t>(e.t_us) - t0_us;
        if (rel < 0) continue;
        auto k = static_cast<std::size_t>(rel / bin_us);
        if (k < n) counts[k] += 1.0;
    }
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(n);
    for (double& c : counts) c -= mean;

    VibrationSpectrum spec;
    spec.bin_s = bin_s;
    spec.freq_resolution_hz = 1.0 / (static_cast<double>(n) * bin_s);
    const std::size_t n_freq = n / 2 + 1;
    spec.freq_hz.resize(n_freq);
    spec.magnitude.resize(n_freq);

    // direct DFT via a per-frequency complex rotation; trace lengths stay in
    // the low thousands so no fast transform is needed
    for (std::size_t k = 0; k < n_freq; ++k) {
        double angle = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        double cs = std::cos(angle), sn = std::sin(angle);
        double wr = 1.0, wi = 0.0;
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            re += counts[i] * wr;
            im += counts[i] * wi;
            double nwr = wr * cs - wi * sn;
            wi = wr * sn + wi * cs;
            wr = nwr;
        }
        spec.freq_hz[k] = static_cast<double>(k) * spec.freq_resolution_hz;
        spec.magnitude[k] = std::sqrt(re * re + im * im);
    }

    double max_mag = 0.0;
    for (std::size_t k = 0; k < n_freq; ++k) max_mag = std::max(max_mag, spec.magnitude[k]);
    if (max_mag > 0.0) {
        for (double& m : spec.magnitude) m /= max_mag;
    }

    // dominance: strongest in-band bin, but only if it stands clear of the
    // in-band median (flat or noise-only spectra report no tone)
    double best = 0.0;
    std::size_t best_k = 0;
    std::vector<double> band;
    for (std::size_t k = 1; k < n_freq; ++k) {
        if (spec.freq_hz[k] < 10.0) continue;
        band.push_back(spec.magnitude[k]);
        if (spec.magnitude[k] > best) {
            best = spec.magnitude[k];
            best_k = k;
        }
    }
    if (best > 0.0 && !band.empty() && best >= 5.0 * median_of(band)) {
        spec.dominant_hz = spec.freq_hz[best_k];
    }
    return spec;
}

SweepResult sweep_vibration(const std::function<EventStream(double)>& make_trial,
                            const std::vector<double>& tones_hz, double span_s, double bin_s) {
    SweepResult sweep;
    sweep.bin_hz = 1.0 / span_s;
    for (double f = 0.0; f <= 250.0 + 1e-9; f += 2.5) sweep.grid_hz.push_back(f);
    const double nyquist = 0.5 / bin_s;

    for (double tone : tones_hz) {
        SweepRow row;
        row.input_hz = tone;
        row.aliased = tone > nyquist + 1e-9;
        EventStream stream = make_trial(tone);
        double t1 = stream.events.empty() ? span_s : stream.events.back().t_s();
        VibrationSpectrum spec = vibration_spectrum(stream, 0.0, std::min(span_s, t1), bin_s);
        row.recovered_hz = spec.dominant_hz.value_or(std::numeric_limits<double>::quiet_NaN());
        row.within_one_bin = spec.dominant_hz &&
                             std::abs(*spec.dominant_hz - tone) <= spec.freq_resolution_hz + 1e-9;
        for (double g : sweep.grid_hz) {
            auto k = static_cast<std::size_t>(std::llround(g / spec.freq_resolution_hz));
            row.magnitudes.push_back(k < spec.magnitude.size() ? spec.magnitude[k] : 0.0);
        }
        sweep.rows.push_back(std::move(row));
    }
    sweep.diagonal_pass = true;
    for (const SweepRow& row : sweep.rows) {
        if (!row.aliased && !row.within_one_bin) sweep.diagonal_pass = false;
    }
    return sweep;
}

void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path) {
    std::ostringstream ss;
    ss << "input_hz,recovered_hz,aliased,within_one_bin";
    for (double g : sweep.grid_hz) ss << ",m_" << g;
    ss << "\n";
    for (const SweepRow& row : sweep.rows) {
        ss << row.input_hz << ',' << row.recovered_hz << ',' << (row.aliased ? 1 : 0) << ','
           << (row.within_one_bin ? 1 : 0);
        for (double m : row.magnitudes) ss << ',' << m;
        ss << "\n";
    }
    std::ofstream out(path);
    if (!out) throw MixtacError("cannot open " + path.string());
    out << ss.str();
    if (!out.good()) throw MixtacError("I/O failure writing " + path.string());
}

std::vector<double> find_peaks(const std::vector<std::pair<double, double>>& series,
                               double threshold, double min_separation_s) {
    std::vector<std::pair<double, double>> maxima; // (value, time)
    for (std::size_t i = 1; i + 1 < series.size(); ++i) {
        double v = series[i].second;
        if (v < threshold) continue;
        if (v > series[i - 1].second && v >= series[i + 1].second) {
            maxima.emplace_back(v, series[i].first);
        }
    }
    // keep the tallest of each cluster
    std::sort(maxima.begin(), maxima.end(), std::greater<>{});
    std::vector<double> peaks;
    for (const auto& [v, t] : maxima) {
        bool crowded = false;
        for (double p : peaks) {
            if (std::abs(t - p) < min_separation_s) crowded = true;
        }
        if (!crowded) peaks.push_back(t);
    }
    std::sort(peaks.begin(), peaks.end());
    return peaks;
}

} // namespace mixtac::analysis
