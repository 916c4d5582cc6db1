// Command-line surface: rho / compress / synth / sweep / angles.
// Exit codes: 0 success, 1 usage error, 2 degraded (per-layer failures,
// reports still written), 3 I/O error.

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fasc/diagnostics.hpp"
#include "fasc/errors.hpp"
#include "fasc/harness.hpp"
#include "fasc/pipeline.hpp"
#include "fasc/rng.hpp"
#include "fasc/sketch.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string command;
  std::string manifest;
  std::string out;
  double rank_frac = 0.5;
  double rho_threshold = 0.3;
  std::uint64_t seed = 0;
  int resamples = 1000;
  bool exact_only = false;
  bool no_layer_exclusion = false;
  std::string thresholds = "0.0,0.1,0.3,0.5";
  std::string synth_kind = "planted3";
};

std::vector<double> parse_thresholds(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok = csv.substr(pos, comma == std::string::npos
                                                ? std::string::npos
                                                : comma - pos);
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw CLI::ValidationError("--thresholds", "not a number: '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() < 2)
    throw CLI::ValidationError("--thresholds", "need at least 2 values");
  return out;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw fasc::io_error("cannot create output dir: " + out.string());
}

json rho_report_json(const fasc::RhoReport& r) {
  json flags = json::array();
  if (r.degenerate_gradients) flags.push_back("degenerate_gradients");
  if (r.excluded_layer_rule) flags.push_back("excluded_layer_rule");
  return json{{"layer_id", r.layer_id}, {"rho", r.rho},
              {"ci", {r.ci_low, r.ci_high}}, {"n", r.n},
              {"resamples", r.resamples}, {"gate", fasc::gate_name(r.gate)},
              {"flags", flags}};
}

int cmd_rho(const Options& opt) {
  const fasc::Manifest manifest = fasc::load_manifest(opt.manifest);
  ensure_out_dir(opt.out);
  const fasc::Rng master(opt.seed);
  const auto total = static_cast<std::uint32_t>(manifest.layers.size());

  json layers = json::array();
  bool degraded = false;
  for (const auto& entry : manifest.layers) {
    const auto [xs, gs] = fasc::load_layer(entry);
    fasc::RhoReport report = fasc::rho_bootstrap(
        xs, gs, opt.resamples, master.derive(entry.layer_id).seed());
    fasc::GateConfig gate_cfg;
    gate_cfg.threshold = opt.rho_threshold;
    gate_cfg.exclude_boundary_layers = !opt.no_layer_exclusion;
    fasc::gate_layer(report, entry.layer_id, total, gate_cfg);
    if (report.degenerate_gradients) degraded = true;
    layers.push_back(rho_report_json(report));
  }

  std::ofstream out(fs::path(opt.out) / "rho_report.json", std::ios::trunc);
  if (!out) throw fasc::io_error("cannot write rho_report.json");
  out << json{{"layers", layers}}.dump(2) << "\n";
  return degraded ? 2 : 0;
}

int cmd_compress(const Options& opt) {
  const fasc::Manifest manifest = fasc::load_manifest(opt.manifest);
  ensure_out_dir(opt.out);
  fasc::RunConfig cfg;
  cfg.rank_fraction = opt.rank_frac;
  cfg.rho_threshold = opt.rho_threshold;
  cfg.seed = opt.seed;
  cfg.exact_only = opt.exact_only;
  cfg.exclude_boundary_layers = !opt.no_layer_exclusion;

  const auto plans = fasc::plan_run(manifest, cfg);
  const fasc::RunReport report = fasc::execute_run(plans, manifest, cfg);
  fasc::write_report_json(report, fs::path(opt.out) / "run_report.json");
  fasc::write_report_csv(report, fs::path(opt.out) / "run_report.csv");
  return report.n_failed > 0 ? 2 : 0;
}

int cmd_sweep(const Options& opt) {
  const fasc::Manifest manifest = fasc::load_manifest(opt.manifest);
  ensure_out_dir(opt.out);
  const std::vector<double> thresholds = parse_thresholds(opt.thresholds);

  std::vector<std::pair<fasc::TensorBlock, fasc::TensorBlock>> layers;
  std::vector<int> ranks;
  for (const auto& entry : manifest.layers) {
    layers.push_back(fasc::load_layer(entry));
    const int d = static_cast<int>(layers.back().first.d());
    ranks.push_back(std::clamp(static_cast<int>(std::lround(opt.rank_frac * d)), 1, d));
  }
  fasc::GateConfig gate_cfg;
  gate_cfg.exclude_boundary_layers = !opt.no_layer_exclusion;
  const fasc::SweepResult sweep =
      fasc::threshold_sweep(layers, ranks, thresholds, gate_cfg);

  // one record per (layer, threshold), plus per-threshold totals
  json records = json::array();
  for (const auto& row : sweep.rows) {
    for (const auto& info : sweep.layers) {
      const bool used_fasc =
          std::find(row.fasc_layers.begin(), row.fasc_layers.end(), info.layer_id) !=
          row.fasc_layers.end();
      records.push_back(json{{"layer_id", info.layer_id},
                             {"threshold", row.threshold},
                             {"rho", info.rho},
                             {"uses_fasc", used_fasc},
                             {"j_used", used_fasc ? info.j_fasc : info.j_svd}});
    }
  }
  json rows = json::array();
  for (const auto& row : sweep.rows)
    rows.push_back(json{{"threshold", row.threshold},
                        {"fasc_layers", row.fasc_layers},
                        {"total_j", row.total_j},
                        {"wall_s", row.wall_s}});
  bool degraded = false;
  for (const auto& info : sweep.layers)
    if (info.degenerate) degraded = true;

  std::ofstream out(fs::path(opt.out) / "sweep_report.json", std::ios::trunc);
  if (!out) throw fasc::io_error("cannot write sweep_report.json");
  out << json{{"records", records},
              {"thresholds", rows},
              {"count_monotone", sweep.count_monotone}}
             .dump(2)
      << "\n";
  return degraded ? 2 : 0;
}

int cmd_angles(const Options& opt) {
  const fasc::Manifest manifest = fasc::load_manifest(opt.manifest);
  ensure_out_dir(opt.out);
  const fasc::Rng master(opt.seed);

  json layers = json::array();
  bool degraded = false;
  for (const auto& entry : manifest.layers) {
    const auto [xs, gs] = fasc::load_layer(entry);
    const int d = static_cast<int>(xs.d());
    const int k = std::clamp(static_cast<int>(std::lround(opt.rank_frac * d)), 1, d);
    json row{{"layer_id", entry.layer_id}, {"k", k}};
    try {
      const fasc::CovarianceSet cov = fasc::covariance_of_parallel(xs, gs);
      const fasc::Subspace svd = fasc::svd_subspace(cov, k);
      fasc::Subspace fasc_sub;
      if (!opt.exact_only && d > 512) {
        fasc::SketchConfig sketch_cfg;
        sketch_cfg.seed = master.derive(entry.layer_id).seed();
        sketch_cfg.m = fasc::choose_sketch_size(fasc::rho_score(cov), k, d, sketch_cfg);
        fasc_sub = fasc::sketched_fasc_subspace(xs, gs, k, sketch_cfg);
      } else {
        fasc_sub = fasc::fasc_subspace(cov, k);
      }
      const fasc::AngleReport angles = fasc::principal_angles(fasc_sub, svd);
      std::vector<double> degs(angles.angles_deg.data(),
                               angles.angles_deg.data() + angles.angles_deg.size());
      row["angles_deg"] = degs;
      row["median_deg"] = angles.median_deg;
      row["overlap"] = fasc::subspace_overlap(fasc_sub, svd);
    } catch (const fasc::degenerate_error& e) {
      row["error"] = e.what();
      degraded = true;
    }
    layers.push_back(std::move(row));
  }

  std::ofstream out(fs::path(opt.out) / "angle_report.json", std::ios::trunc);
  if (!out) throw fasc::io_error("cannot write angle_report.json");
  out << json{{"layers", layers}}.dump(2) << "\n";
  return degraded ? 2 : 0;
}

int cmd_synth(const Options& opt) {
  ensure_out_dir(opt.out);
  const fs::path out(opt.out);
  const fasc::Rng master(opt.seed);

  std::vector<fasc::PlantedSpec> specs;
  auto axes_range = [](int lo, int hi) {
    std::vector<int> v;
    for (int a = lo; a < hi; ++a) v.push_back(a);
    return v;
  };
  if (opt.synth_kind == "planted3") {
    fasc::PlantedSpec s;
    s.d = 3; s.n = 512; s.planted_axes = {2};
    s.variance_high = 10.0; s.variance_low = 0.1;
    s.gradient_gain = 100.0; s.noise = 0.01;
    specs.push_back(s);
  } else if (opt.synth_kind == "ramp8") {
    for (int i = 0; i < 8; ++i) {
      fasc::PlantedSpec s;
      s.d = 64; s.n = 2048; s.planted_axes = axes_range(32, 64);
      s.variance_high = 1.0; s.variance_low = 0.5;
      s.gradient_gain = 0.3 + (4.0 - 0.3) * i / 7.0;
      s.noise = 1.0; s.layer_id = static_cast<std::uint32_t>(i);
      specs.push_back(s);
    }
  } else if (opt.synth_kind == "mixed6") {
    const double gains[6] = {0.0, 0.0, 0.0, 4.0, 4.0, 0.0};
    for (int i = 0; i < 6; ++i) {
      fasc::PlantedSpec s;
      s.d = 64; s.n = 2048; s.planted_axes = axes_range(32, 64);
      s.variance_high = 1.0; s.variance_low = 0.5;
      s.gradient_gain = gains[i]; s.noise = 1.0;
      s.layer_id = static_cast<std::uint32_t>(i);
      specs.push_back(s);
    }
  } else if (opt.synth_kind == "sweep8") {
    const double gains[8] = {0.0, 0.0, 0.0, 0.45, 0.6, 1.2, 4.0, 0.0};
    for (int i = 0; i < 8; ++i) {
      fasc::PlantedSpec s;
      s.d = 32; s.n = 2048; s.planted_axes = axes_range(16, 32);
      s.variance_high = 1.0; s.variance_low = 0.5;
      s.gradient_gain = gains[i]; s.noise = 1.0;
      s.layer_id = static_cast<std::uint32_t>(i);
      specs.push_back(s);
    }
  } else {
    throw CLI::ValidationError(
        "kind", "unknown fixture kind '" + opt.synth_kind +
                    "' (expected planted3, ramp8, mixed6, or sweep8)");
  }

  fasc::Manifest manifest;
  manifest.calibration_tag = "synthetic:" + opt.synth_kind;
  for (auto& spec : specs) {
    spec.seed = master.derive(spec.layer_id).seed();
    const auto [xs, gs] = fasc::generate_planted(spec);
    const std::string stem = "layer" + std::to_string(spec.layer_id);
    fasc::write_tensor(xs, out / (stem + "_x.ften"));
    fasc::write_tensor(gs, out / (stem + "_g.ften"));
    fasc::ManifestLayer entry;
    entry.layer_id = spec.layer_id;
    entry.activations = out / (stem + "_x.ften");
    entry.gradients = out / (stem + "_g.ften");
    entry.n = static_cast<std::uint32_t>(spec.n);
    entry.d = static_cast<std::uint32_t>(spec.d);
    manifest.layers.push_back(std::move(entry));
  }
  fasc::save_manifest(manifest, out / "manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // FASC_THREADS caps the worker pool
  if (const char* env = std::getenv("FASC_THREADS")) {
    const int threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);
  }

  CLI::App app{"Fisher-aligned subspace compression toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd, bool needs_manifest) {
    if (needs_manifest)
      cmd->add_option("--manifest", opt.manifest, "layer manifest (JSON)")
          ->required();
    cmd->add_option("--seed", opt.seed, "master RNG seed");
    cmd->add_option("--out", opt.out, "output directory")->required();
  };

  CLI::App* rho = app.add_subcommand("rho", "per-layer dependence scores with bootstrap CIs");
  add_common(rho, true);
  rho->add_option("--resamples", opt.resamples, "bootstrap resamples");
  rho->add_option("--rho-threshold", opt.rho_threshold, "gate threshold");
  rho->add_flag("--no-layer-exclusion", opt.no_layer_exclusion,
                "disable the boundary-layer exclusion rule");

  CLI::App* compress = app.add_subcommand("compress", "gated per-layer compression run");
  add_common(compress, true);
  compress->add_option("--rank-frac", opt.rank_frac, "rank fraction of d");
  compress->add_option("--rho-threshold", opt.rho_threshold, "gate threshold");
  compress->add_flag("--exact-only", opt.exact_only, "never sketch");
  compress->add_flag("--no-layer-exclusion", opt.no_layer_exclusion,
                     "disable the boundary-layer exclusion rule");

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic fixture manifest");
  synth->add_option("kind", opt.synth_kind,
                    "fixture kind: planted3, ramp8, mixed6, sweep8");
  add_common(synth, false);

  CLI::App* sweep = app.add_subcommand("sweep", "threshold sweep over a manifest");
  add_common(sweep, true);
  sweep->add_option("--thresholds", opt.thresholds, "comma-separated thresholds");
  sweep->add_option("--rank-frac", opt.rank_frac, "rank fraction of d");
  sweep->add_flag("--no-layer-exclusion", opt.no_layer_exclusion,
                  "disable the boundary-layer exclusion rule");

  CLI::App* angles = app.add_subcommand("angles", "principal angles FASC vs SVD per layer");
  add_common(angles, true);
  angles->add_option("--rank-frac", opt.rank_frac, "rank fraction of d");
  angles->add_flag("--exact-only", opt.exact_only, "never sketch");
  angles->add_flag("--no-layer-exclusion", opt.no_layer_exclusion,
                   "disable the boundary-layer exclusion rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;  // usage error, normalized
  }

  if (opt.rank_frac <= 0.0 || opt.rank_frac > 1.0) {
    std::cerr << "error: --rank-frac must be in (0, 1]\n";
    return 1;
  }
  if (opt.resamples < 1) {
    std::cerr << "error: --resamples must be >= 1\n";
    return 1;
  }

  try {
    if (rho->parsed()) return cmd_rho(opt);
    if (compress->parsed()) return cmd_compress(opt);
    if (synth->parsed()) return cmd_synth(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (angles->parsed()) return cmd_angles(opt);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fasc::io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const fasc::validation_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const fasc::degenerate_error& e) {
    std::cerr << "degraded: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
