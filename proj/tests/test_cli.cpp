#include "mixtac/io.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

TEST_SUITE_BEGIN("cli");

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(MIXTAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("unknown subcommand exits 1") {
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("") == 1);
}

TEST_CASE("missing input files exit 1 before any work") {
    CHECK(run_cli("packetize --trial /nonexistent/dir") == 1);
    CHECK(run_cli("align --events /no.bin --force /no.csv --impulse-windows 0,1,2,3") == 1);
}

TEST_CASE("simulate writes trial directories plus manifests") {
    testutil::TempDir tmp("cli_sim");
    auto out = tmp.path() / "d";
    int rc = run_cli("simulate --scenario press_hold --trials 2 --duration 3 --out " +
                     out.string() +
                     " --sensor-width 32 --sensor-height 24 --markers 15 --seed 4"
                     " --param target_force_n=0.5");
    REQUIRE(rc == 0);
    CHECK(std::filesystem::exists(out / "trial_000/events.bin"));
    CHECK(std::filesystem::exists(out / "trial_001/force.csv"));
    CHECK(std::filesystem::exists(out / "manifest.json"));
    CHECK(std::filesystem::exists(out / "run_manifest.json"));
}

TEST_CASE("replay from a manifest reproduces the dataset bit for bit") {
    testutil::TempDir tmp("cli_replay");
    auto a = tmp.path() / "a";
    auto b = tmp.path() / "b";
    REQUIRE(run_cli("simulate --scenario vibration --trials 1 --duration 1.5 --out " + a.string() +
                    " --sensor-width 32 --sensor-height 24 --markers 12 --seed 9") == 0);
    REQUIRE(run_cli("replay " + (a / "run_manifest.json").string() + " --out " + b.string()) == 0);
    CHECK(slurp(a / "trial_000/events.bin") == slurp(b / "trial_000/events.bin"));
    CHECK(slurp(a / "trial_000/force.csv") == slurp(b / "trial_000/force.csv"));
}

TEST_CASE("full pipeline: simulate, align, packetize, train, eval") {
    testutil::TempDir tmp("cli_pipe");
    auto data = tmp.path() / "data";
    // small dynamic dataset; plant a clock skew on a separate alignment trial
    REQUIRE(run_cli("simulate --scenario vibration --trials 3 --duration 2 --out " +
                    data.string() +
                    " --sensor-width 32 --sensor-height 24 --markers 15 --seed 2") == 0);

    auto aligned = tmp.path() / "aligned";
    REQUIRE(run_cli("simulate --scenario press_hold --trials 1 --duration 6 --out " +
                    aligned.string() +
                    " --sensor-width 32 --sensor-height 24 --markers 15 --seed 3"
                    " --param target_force_n=0 --plant-clock 1.0005,0.3 --no-jitter") == 0);
    auto trial = aligned / "trial_000";
    {
        std::ostringstream cmd;
        cmd << "align --events " << (trial / "events.bin").string() << " --force "
            << (trial / "force.csv").string()
            << " --impulse-windows 0.0,0.9,5.1,6.0 --bin 0.002 --smooth 5 --out "
            << (trial / "events_aligned.bin").string();
        REQUIRE(run_cli(cmd.str()) == 0);
        CHECK(std::filesystem::exists(trial / "events_aligned.bin"));
    }

    REQUIRE(run_cli("packetize --trial " + (data / "trial_000").string()) == 0);
    CHECK(std::filesystem::exists(data / "trial_000/cycles.idx"));

    auto ckpt = tmp.path() / "m.ckpt";
    REQUIRE(run_cli("train --data " + data.string() + " --out " + ckpt.string() +
                    " --epochs 2 --batch 16 --lr 1e-3 --seed 5 --hidden 8 --de 6 --df 6"
                    " --event-hidden 6 --head-hidden 6 --channels 2") == 0);
    CHECK(std::filesystem::exists(ckpt));
    CHECK(std::filesystem::exists(ckpt.string() + ".curve.csv"));

    auto report = tmp.path() / "metrics.json";
    REQUIRE(run_cli("eval --ckpt " + ckpt.string() + " --data " + data.string() + " --report " +
                    report.string()) == 0);
    auto metrics = nlohmann::json::parse(std::ifstream(report));
    CHECK(metrics.contains("mae_n"));
    CHECK(metrics.contains("rmse_n"));
    CHECK(metrics.contains("r2"));
    CHECK(metrics.contains("rolling"));
}

TEST_CASE("ablate requires a variant and trains it") {
    testutil::TempDir tmp("cli_ablate");
    auto data = tmp.path() / "data";
    REQUIRE(run_cli("simulate --scenario vibration --trials 2 --duration 1.5 --out " +
                    data.string() +
                    " --sensor-width 32 --sensor-height 24 --markers 12 --seed 6") == 0);
    CHECK(run_cli("ablate --data " + data.string() + " --out " + (tmp.path() / "x.ckpt").string() +
                  " --epochs 1") == 1); // variant missing
    CHECK(run_cli("ablate --variant frames --data " + data.string() + " --out " +
                  (tmp.path() / "f.ckpt").string() +
                  " --epochs 1 --df 6 --head-hidden 6 --channels 2") == 0);
}

TEST_CASE("report command computes metrics from CSV files") {
    testutil::TempDir tmp("cli_report");
    auto pred = tmp.path() / "pred.csv";
    auto truth = tmp.path() / "truth.csv";
    {
        std::ofstream p(pred);
        p << "t_s,f_hat_n,corrected\n";
        std::ofstream t(truth);
        t << "t_s,fz_n\n";
        for (int i = 0; i < 800; ++i) {
            double ts = i / 800.0;
            p << ts << ',' << 0.55 << ",0\n";
            t << ts << ',' << 0.5 << '\n';
        }
    }
    auto out = tmp.path() / "metrics.json";
    REQUIRE(run_cli("report --pred " + pred.string() + " --truth " + truth.string() + " --out " +
                    out.string()) == 0);
    auto metrics = nlohmann::json::parse(std::ifstream(out));
    CHECK(metrics["mae_n"].get<double>() == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("slip command writes the log CSV") {
    testutil::TempDir tmp("cli_slip");
    auto out = tmp.path() / "log.csv";
    REQUIRE(run_cli("slip --object box --k 0.001 --seed 2 --duration 2.2 --out " + out.string()) ==
            0);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t_s,n_t,delta_d_mm,normal_force_n,slip_mm,slipping");
}

TEST_SUITE_END();
