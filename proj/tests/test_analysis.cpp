#include "mixtac/analysis.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <cmath>
#include <fstream>

using namespace mixtac;
using namespace mixtac::analysis;

TEST_SUITE_BEGIN("analysis");

namespace {

ForceTrace const_trace(double value, double duration, double rate = 800.0) {
    ForceTrace t;
    t.rate_hz = rate;
    auto n = static_cast<std::size_t>(duration * rate);
    for (std::size_t i = 0; i < n; ++i) t.samples.push_back({i / rate, value});
    return t;
}

PredictionTrace trace_of(std::initializer_list<std::pair<double, double>> pts) {
    PredictionTrace t;
    for (auto [ts, v] : pts) t.samples.push_back({ts, v, false});
    return t;
}

// events whose 2 ms bin counts follow a given function of bin-centre time;
// timestamps are built in integer microseconds so no event straddles a bin
EventStream stream_from_counts(const std::function<int(double)>& count_fn, double duration) {
    EventStream s;
    s.width = 8;
    s.height = 8;
    auto n_bins = static_cast<std::uint64_t>(duration / 0.002);
    for (std::uint64_t k = 0; k < n_bins; ++k) {
        int n = count_fn((static_cast<double>(k) + 0.5) * 0.002);
        for (int i = 0; i < n; ++i) {
            s.events.push_back({k * 2000 + static_cast<std::uint64_t>(i % 19) * 100, 1, 1, 1});
        }
    }
    return s;
}

} // namespace

TEST_CASE("identical traces give MAE 0, RMSE 0, R2 1") {
    ForceTrace truth = const_trace(0.5, 2.0);
    PredictionTrace pred;
    for (const auto& s : truth.samples) pred.samples.push_back({s.t_s, s.fz_n, false});
    // vary the truth so SST is nonzero
    ForceTrace varied = truth;
    for (std::size_t i = 0; i < varied.samples.size(); ++i) {
        varied.samples[i].fz_n = 0.2 + 0.001 * static_cast<double>(i % 7);
        pred.samples[i].f_hat_n = varied.samples[i].fz_n;
    }
    auto m = metrics(pred, varied);
    CHECK(m.mae_n == 0.0);
    CHECK(m.rmse_n == 0.0);
    CHECK(m.r2 == 1.0);
}

TEST_CASE("pred [0,1] vs truth [1,3] gives MAE 1.5 and RMSE sqrt(2.5)") {
    ForceTrace truth;
    truth.rate_hz = 1.0;
    truth.samples = {{0.0, 1.0}, {1.0, 3.0}};
    auto m = metrics(trace_of({{0.0, 0.0}, {1.0, 1.0}}), truth);
    CHECK(m.mae_n == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(m.rmse_n == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK(m.n == 2);
}

TEST_CASE("constant prediction at the truth mean gives R2 = 0") {
    ForceTrace truth;
    truth.rate_hz = 1.0;
    truth.samples = {{0.0, 1.0}, {1.0, 3.0}, {2.0, 2.0}};
    auto m = metrics(trace_of({{0.0, 2.0}, {1.0, 2.0}, {2.0, 2.0}}), truth);
    CHECK(m.r2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("metrics rejects disjoint spans") {
    ForceTrace truth = const_trace(1.0, 1.0);
    CHECK_THROWS_AS(metrics(trace_of({{5.0, 1.0}, {6.0, 1.0}}), truth), MixtacError);
}

TEST_CASE("rolling mae of a constant error is constant, bins included") {
    ForceTrace truth = const_trace(0.5, 3.0);
    PredictionTrace pred;
    for (double t = 0.0; t < 3.0; t += 0.002) pred.samples.push_back({t, 0.6, false});
    auto series = rolling_mae(pred, truth, 0.5, 1.0);
    REQUIRE(!series.samples.empty());
    for (const auto& [t, v] : series.samples) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
    for (const auto& bin : series.bins) CHECK(bin.median == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("piecewise error lands in the right 5 s bins over a 25 s trace") {
    ForceTrace truth = const_trace(0.5, 25.0, 100.0);
    PredictionTrace pred;
    for (double t = 0.0; t < 25.0; t += 0.002) {
        pred.samples.push_back({t, t < 12.5 ? 0.5 : 0.7, false});
    }
    auto series = rolling_mae(pred, truth, 0.5, 5.0);
    REQUIRE(series.bins.size() == 5);
    CHECK(series.bins.front().median == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(series.bins.back().median == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("rolling mae rejects windows longer than the trace") {
    ForceTrace truth = const_trace(0.5, 1.0);
    PredictionTrace pred = trace_of({{0.0, 0.5}, {0.5, 0.5}, {0.9, 0.5}});
    CHECK_THROWS_AS(rolling_mae(pred, truth, 2.0, 5.0), MixtacError);
}

TEST_CASE("RMSE >= MAE on random traces") {
    Rng rng(70);
    for (int round = 0; round < 30; ++round) {
        ForceTrace truth;
        truth.rate_hz = 100.0;
        PredictionTrace pred;
        for (int i = 0; i < 50; ++i) {
            truth.samples.push_back({i / 100.0, rng.uniform(0.0, 1.0)});
            pred.samples.push_back({i / 100.0, rng.uniform(0.0, 1.0), false});
        }
        auto m = metrics(pred, truth);
        CHECK(m.rmse_n >= m.mae_n);
    }
}

TEST_CASE("pure 150 Hz tone is recovered within half a bin") {
    auto stream = stream_from_counts(
        [](double t) { return static_cast<int>(std::lround(8.0 * (1.0 + std::sin(2.0 * M_PI * 150.0 * t)))); },
        2.0);
    auto spec = vibration_spectrum(stream, 0.0, 2.0);
    REQUIRE(spec.dominant_hz.has_value());
    CHECK(std::abs(*spec.dominant_hz - 150.0) <= 0.5);
}

TEST_CASE("250 Hz tone at the Nyquist edge is recovered") {
    auto stream = stream_from_counts(
        [](double t) { return static_cast<int>(std::lround(8.0 * (1.0 + std::sin(2.0 * M_PI * 250.0 * t)))); },
        2.0);
    auto spec = vibration_spectrum(stream, 0.0, 2.0);
    REQUIRE(spec.dominant_hz.has_value());
    CHECK(std::abs(*spec.dominant_hz - 250.0) <= 0.5);
}

TEST_CASE("constant event rate reports no dominant tone") {
    auto stream = stream_from_counts([](double) { return 10; }, 2.0);
    auto spec = vibration_spectrum(stream, 0.0, 2.0);
    CHECK_FALSE(spec.dominant_hz.has_value());
}

TEST_CASE("dominant bin is invariant to uniform count scaling") {
    auto make = [](int scale) {
        return stream_from_counts(
            [scale](double t) {
                return scale * static_cast<int>(std::lround(6.0 * (1.0 + std::sin(2.0 * M_PI * 75.0 * t))));
            },
            2.0);
    };
    auto a = vibration_spectrum(make(1), 0.0, 2.0);
    auto b = vibration_spectrum(make(3), 0.0, 2.0);
    REQUIRE(a.dominant_hz.has_value());
    REQUIRE(b.dominant_hz.has_value());
    CHECK(*a.dominant_hz == *b.dominant_hz);
    for (std::size_t k = 0; k < a.magnitude.size(); ++k) {
        CHECK(std::abs(a.magnitude[k] - b.magnitude[k]) < 1e-9);
    }
}

TEST_CASE("spectrum rejects spans under a second") {
    EventStream s{8, 8, {}};
    CHECK_THROWS_AS(vibration_spectrum(s, 0.0, 0.5), MixtacError);
}

TEST_CASE("sweep over synthetic tones is diagonal; aliased tones are flagged") {
    testutil::TempDir tmp("sweep");
    auto make_trial = [](double tone) {
        double use = tone > 250.0 ? 30.0 : tone; // an aliased tone folds somewhere else
        return stream_from_counts(
            [use](double t) {
                return static_cast<int>(std::lround(8.0 * (1.0 + std::sin(2.0 * M_PI * use * t))));
            },
            2.0);
    };
    auto sweep = sweep_vibration(make_trial, {50.0, 100.0, 150.0, 275.0}, 2.0);
    CHECK(sweep.rows.size() == 4);
    CHECK(sweep.rows[3].aliased);
    CHECK(sweep.diagonal_pass); // aliased row excluded from the criterion
    for (int i = 0; i < 3; ++i) CHECK(sweep.rows[i].within_one_bin);

    write_sweep_csv(sweep, tmp.path() / "sweep.csv");
    std::ifstream in(tmp.path() / "sweep.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("input_hz,recovered_hz,aliased,within_one_bin", 0) == 0);
}

TEST_CASE("empty tone list writes only the header") {
    testutil::TempDir tmp("sweep_empty");
    auto sweep = sweep_vibration([](double) { return EventStream{8, 8, {}}; }, {}, 2.0);
    CHECK(sweep.rows.empty());
    write_sweep_csv(sweep, tmp.path() / "sweep.csv");
    std::ifstream in(tmp.path() / "sweep.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1);
}

TEST_CASE("find_peaks separates the two impact maxima") {
    std::vector<std::pair<double, double>> series;
    for (double t = 0.0; t < 1.0; t += 0.002) {
        double v = 0.2;
        if (t > 0.2 && t < 0.26) v += std::sin(M_PI * (t - 0.2) / 0.06);
        if (t > 0.38 && t < 0.43) v += 0.5 * std::sin(M_PI * (t - 0.38) / 0.05);
        series.emplace_back(t, v);
    }
    auto peaks = find_peaks(series, 0.3, 0.05);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0] == doctest::Approx(0.23).epsilon(0.05));
    CHECK(peaks[1] == doctest::Approx(0.405).epsilon(0.05));
}

TEST_SUITE_END();
