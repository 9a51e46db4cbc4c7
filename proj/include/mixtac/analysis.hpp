#pragma once

#include "mixtac/types.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace mixtac::analysis {

struct MetricReport {
    double mae_n = 0.0;
    double rmse_n = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

// Errors vs truth linearly interpolated at prediction timestamps.
// R^2 = 1 - SSE/SST, SST about the truth mean over the same samples.
MetricReport metrics(const PredictionTrace& pred, const ForceTrace& truth);

struct RollingMaeBin {
    double t0 = 0.0;
    double t1 = 0.0;
    double median = 0.0;
    std::size_t n = 0;
};

struct RollingMaeSeries {
    double window_s = 0.5;
    std::vector<std::pair<double, double>> samples; // (t_center, rolling mae)
    std::vector<RollingMaeBin> bins;                // bin_width aggregates
};

// Sliding-window MAE stepped at the prediction cadence; bins are medians of
// the window values whose centre falls inside [k*bin_width, (k+1)*bin_width).
RollingMaeSeries rolling_mae(const PredictionTrace& pred, const ForceTrace& truth,
                             double window_s = 0.5, double bin_width_s = 5.0);

// Pools the per-trial window samples and re-bins (one violin per bin).
std::vector<RollingMaeBin> pool_rolling_bins(const std::vector<RollingMaeSeries>& series,
                                             double bin_width_s = 5.0);

struct VibrationSpectrum {
    double bin_s = 0.002;
    double freq_resolution_hz = 0.0;
    std::vector<double> freq_hz;   // DC .. Nyquist
    std::vector<double> magnitude; // normalized to max 1
    std::optional<double> dominant_hz;
};

// Event counts in fixed bins over [t0, t1], mean removed, direct DFT.
// The dominant bin excludes DC and everything below 10 Hz; a flat spectrum
// reports no dominant tone. Requires at least 1 s of span.
VibrationSpectrum vibration_spectrum(const EventStream& stream, double t0, double t1,
                                     double bin_s = 0.002);

struct SweepRow {
    double input_hz = 0.0;
    double recovered_hz = 0.0; // NaN when no dominant tone
    bool aliased = false;      // above Nyquist, excluded from the pass flag
    bool within_one_bin = false;
    std::vector<double> magnitudes; // resampled onto grid_hz
};

struct SweepResult {
    std::vector<double> grid_hz; // 0..250 in 2.5 Hz steps (plot-ready)
    std::vector<SweepRow> rows;
    double bin_hz = 0.0; // spectral resolution of each trial
    bool diagonal_pass = false;
};

// Runs make_trial per tone and checks the recovered dominant frequency.
SweepResult sweep_vibration(const std::function<EventStream(double)>& make_trial,
                            const std::vector<double>& tones_hz, double span_s,
                            double bin_s = 0.002);

void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);

// Local maxima above a threshold with a minimum separation; used for the
// impact-profile checks. Returns peak times.
std::vector<double> find_peaks(const std::vector<std::pair<double, double>>& series,
                               double threshold, double min_separation_s);

} // namespace mixtac::analysis
