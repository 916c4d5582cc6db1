// End-to-end checks of the installed command surface. Each case shells out
// to the real binary (path injected by the build) against a scratch dir.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fasc/rng.hpp"
#include "fasc/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fasc_cli_" + tag + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(FASC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a loadable manifest") {
  TempDir tmp("synth");
  CHECK(run_cli("synth planted3 --seed 1 --out " + tmp.path.string()) == 0);
  CHECK(fs::exists(tmp.path / "manifest.json"));

  const fasc::Manifest manifest = fasc::load_manifest(tmp.path / "manifest.json");
  REQUIRE(manifest.layers.size() == 1);
  CHECK(manifest.layers[0].d == 3);
  CHECK(manifest.layers[0].n == 512);
  const auto [xs, gs] = fasc::load_layer(manifest.layers[0]);
  CHECK(xs.n() == 512);
  CHECK(gs.d() == 3);
}

TEST_CASE("synth is deterministic in the seed") {
  TempDir a("synth_a"), b("synth_b"), c("synth_c");
  REQUIRE(run_cli("synth planted3 --seed 9 --out " + a.path.string()) == 0);
  REQUIRE(run_cli("synth planted3 --seed 9 --out " + b.path.string()) == 0);
  REQUIRE(run_cli("synth planted3 --seed 10 --out " + c.path.string()) == 0);

  const auto [xa, ga] = fasc::load_layer(fasc::load_manifest(a.path / "manifest.json").layers[0]);
  const auto [xb, gb] = fasc::load_layer(fasc::load_manifest(b.path / "manifest.json").layers[0]);
  const auto [xc, gc] = fasc::load_layer(fasc::load_manifest(c.path / "manifest.json").layers[0]);
  CHECK((xa.data - xb.data).norm() == 0.0f);
  CHECK((ga.data - gb.data).norm() == 0.0f);
  CHECK((xa.data - xc.data).norm() > 0.0f);
}

TEST_CASE("rho command reports scores, intervals, and gates") {
  TempDir tmp("rho");
  REQUIRE(run_cli("synth planted3 --seed 2 --out " + tmp.path.string()) == 0);
  CHECK(run_cli("rho --manifest " + (tmp.path / "manifest.json").string() +
                " --resamples 100 --seed 3 --out " + tmp.path.string()) == 0);

  const json report = read_json(tmp.path / "rho_report.json");
  REQUIRE(report["layers"].size() == 1);
  const json& row = report["layers"][0];
  CHECK(row["layer_id"] == 0);
  CHECK(row["rho"].get<double>() > 0.0);
  REQUIRE(row["ci"].size() == 2);
  CHECK(row["ci"][0].get<double>() <= row["ci"][1].get<double>());
  CHECK(row["resamples"] == 100);
  // a single layer is both a first and a last layer: excluded by default
  CHECK(row["gate"] == "excluded");
  bool has_flag = false;
  for (const auto& f : row["flags"])
    if (f == "excluded_layer_rule") has_flag = true;
  CHECK(has_flag);
}

TEST_CASE("compress run: gated methods, reports, and stable csv header") {
  TempDir tmp("compress");
  REQUIRE(run_cli("synth mixed6 --seed 4 --out " + tmp.path.string()) == 0);
  CHECK(run_cli("compress --manifest " + (tmp.path / "manifest.json").string() +
                " --rank-frac 0.5 --seed 5 --out " + tmp.path.string()) == 0);

  const json report = read_json(tmp.path / "run_report.json");
  CHECK(report["summary"]["n_layers"] == 6);
  CHECK(report["summary"]["n_failed"] == 0);
  // interior coupled layers gate to the aligned method, boundaries never do
  CHECK(report["summary"]["n_fasc"] == 2);
  CHECK(report["layers"][3]["method"] == "fasc");
  CHECK(report["layers"][4]["method"] == "fasc");
  CHECK(report["layers"][0]["gate"] == "excluded");
  const double j_fasc = report["layers"][3]["j_fasc"].get<double>();
  const double j_svd = report["layers"][3]["j_svd"].get<double>();
  CHECK(j_fasc < j_svd);

  std::ifstream csv(tmp.path / "run_report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "layer,rho,method,J_svd,J_fasc,overlap,median_angle_deg");
}

TEST_CASE("sweep emits one record per layer and threshold") {
  TempDir tmp("sweep");
  REQUIRE(run_cli("synth sweep8 --seed 6 --out " + tmp.path.string()) == 0);
  CHECK(run_cli("sweep --manifest " + (tmp.path / "manifest.json").string() +
                " --thresholds 0.0,0.1,0.3,0.5,0.8 --rank-frac 0.5 --out " +
                tmp.path.string()) == 0);

  const json report = read_json(tmp.path / "sweep_report.json");
  CHECK(report["records"].size() == 8 * 5);
  REQUIRE(report["thresholds"].size() == 5);
  CHECK(report["count_monotone"].get<bool>());
  // gated count never grows with the threshold
  std::size_t prev = 100;
  for (const auto& row : report["thresholds"]) {
    const std::size_t count = row["fasc_layers"].size();
    CHECK(count <= prev);
    prev = count;
  }
  for (const auto& rec : report["records"]) {
    CHECK(rec.contains("layer_id"));
    CHECK(rec.contains("threshold"));
    CHECK(rec.contains("rho"));
    CHECK(rec.contains("uses_fasc"));
    CHECK(rec["j_used"].is_number());
  }
}

TEST_CASE("angles compares the aligned and baseline spans per layer") {
  TempDir tmp("angles");
  REQUIRE(run_cli("synth mixed6 --seed 7 --out " + tmp.path.string()) == 0);
  CHECK(run_cli("angles --manifest " + (tmp.path / "manifest.json").string() +
                " --rank-frac 0.25 --out " + tmp.path.string()) == 0);

  const json report = read_json(tmp.path / "angle_report.json");
  REQUIRE(report["layers"].size() == 6);
  for (const auto& row : report["layers"]) {
    CHECK(row["k"] == 16);
    REQUIRE(row.contains("angles_deg"));
    CHECK(row["angles_deg"].size() == 16);
    const double median = row["median_deg"].get<double>();
    CHECK(median >= 0.0);
    CHECK(median <= 90.0);
    CHECK(row["overlap"].get<double>() <= 1.0);
  }
}

TEST_CASE("degenerate layer degrades the run instead of aborting it") {
  TempDir tmp("degen");
  // hand-built two-layer manifest; layer 1 has exactly constant gradients
  fasc::Manifest manifest;
  fasc::Rng rng(8);
  for (std::uint32_t id : {0u, 1u}) {
    fasc::TensorBlock xs, gs;
    xs.kind = fasc::TensorKind::activation;
    gs.kind = fasc::TensorKind::gradient;
    xs.layer_id = gs.layer_id = id;
    xs.data.resize(64, 4);
    gs.data.resize(64, 4);
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 4; ++j) {
        xs.data(i, j) = static_cast<float>(rng.normal());
        gs.data(i, j) = id == 1 ? 0.0f : xs.data(i, j);
      }
    const std::string stem = "layer" + std::to_string(id);
    fasc::write_tensor(xs, tmp.path / (stem + "_x.ften"));
    fasc::write_tensor(gs, tmp.path / (stem + "_g.ften"));
    fasc::ManifestLayer entry;
    entry.layer_id = id;
    entry.activations = tmp.path / (stem + "_x.ften");
    entry.gradients = tmp.path / (stem + "_g.ften");
    entry.n = 64;
    entry.d = 4;
    manifest.layers.push_back(entry);
  }
  fasc::save_manifest(manifest, tmp.path / "manifest.json");

  CHECK(run_cli("rho --manifest " + (tmp.path / "manifest.json").string() +
                " --resamples 10 --out " + tmp.path.string()) == 2);
  const json report = read_json(tmp.path / "rho_report.json");
  bool flagged = false;
  for (const auto& f : report["layers"][1]["flags"])
    if (f == "degenerate_gradients") flagged = true;
  CHECK(flagged);
}

TEST_CASE("exit codes: usage errors and broken inputs are distinguished") {
  TempDir tmp("exit");
  // unknown flag
  CHECK(run_cli("rho --manifest x.json --frobnicate --out " + tmp.path.string()) == 1);
  // unknown subcommand
  CHECK(run_cli("transmogrify") == 1);
  // unknown fixture kind
  CHECK(run_cli("synth nosuchkind --out " + tmp.path.string()) == 1);
  // out-of-range rank fraction
  REQUIRE(run_cli("synth planted3 --seed 1 --out " + tmp.path.string()) == 0);
  CHECK(run_cli("compress --manifest " + (tmp.path / "manifest.json").string() +
                " --rank-frac 1.5 --out " + tmp.path.string()) == 1);
  // missing manifest file
  CHECK(run_cli("rho --manifest /nonexistent/m.json --out " + tmp.path.string()) == 3);
  // structurally broken manifest
  std::ofstream bad(tmp.path / "broken.json");
  bad << "{not json";
  bad.close();
  CHECK(run_cli("rho --manifest " + (tmp.path / "broken.json").string() +
                " --out " + tmp.path.string()) == 3);
  // help is a success
  CHECK(run_cli("--help") == 0);
}

}  // TEST_SUITE
