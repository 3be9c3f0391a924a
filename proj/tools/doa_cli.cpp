// doa: simulate array data, run estimators, dump spectra, run benchmarks.
//
// Exit codes: 0 success, 1 configuration error, 2 estimation failure.
// Errors go to stderr as one JSON line.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "doa/doa.hpp"
#include "doa/io.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kEstimationError = 2;

int report(std::string_view kind, std::string_view message, int code) {
  std::cerr << doa::error_json_line(kind, message);
  return code;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) doa::fail(doa::ErrorKind::invalid_input, "cannot write '" + path + "'");
  return out;
}

std::optional<doa::SnapshotMatrix> load_snapshots(const std::string& path, const doa::RunConfig& cfg) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) doa::fail(doa::ErrorKind::invalid_input, "cannot open '" + path + "'");
  auto x = doa::read_snapshots(in, cfg.scenario.geometry.spacing_wavelengths());
  if (x.geometry().m_sensors() != cfg.scenario.geometry.m_sensors())
    doa::fail(doa::ErrorKind::invalid_input, "snapshot file sensor count does not match the config");
  return x;
}

// Bad input to an estimator is a config problem; anything else that goes
// wrong inside it is an estimation failure.
int classify(const doa::Error& e) {
  return e.kind() == doa::ErrorKind::invalid_input ? kConfigError : kEstimationError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direction-of-arrival estimation for uniform linear arrays"};
  app.require_subcommand(1);

  std::string config, out_path, in_path, method, campaign;
  unsigned workers = 0;
  bool no_timing = false;

  auto* sim = app.add_subcommand("simulate", "Write simulated snapshots to a binary file");
  sim->add_option("--config", config, "Scenario JSON")->required();
  sim->add_option("--out", out_path, "Output snapshot file")->required();

  auto* est = app.add_subcommand("estimate", "Print DOA estimates as JSON");
  est->add_option("--method", method, "Estimator name")->required();
  est->add_option("--config", config, "Scenario JSON")->required();
  est->add_option("--in", in_path, "Snapshot file to use instead of simulating");

  auto* spec = app.add_subcommand("spectrum", "Write a spatial spectrum as CSV");
  spec->add_option("--method", method, "das, capon, music, sbl or spice")->required();
  spec->add_option("--config", config, "Scenario JSON")->required();
  spec->add_option("--out", out_path, "Output CSV")->required();
  spec->add_option("--in", in_path, "Snapshot file to use instead of simulating");

  auto* bench = app.add_subcommand("benchmark", "Run a Monte Carlo campaign");
  bench->add_option("--campaign", campaign, "Campaign JSON")->required();
  bench->add_option("--out", out_path, "Per-trial results CSV")->required();
  bench->add_option("--workers", workers, "Worker threads (overrides the campaign file)");
  bench->add_flag("--no-timing", no_timing, "Write 0 for wall times so output is reproducible byte for byte");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("invalid_input", e.what(), kConfigError);
  }

  doa::RunConfig cfg;
  doa::CampaignConfig camp;
  try {
    if (*bench) {
      camp = doa::parse_campaign_config(doa::read_text_file(campaign));
      if (workers > 0) camp.workers = workers;
      camp.record_timing = !no_timing;
    } else {
      cfg = doa::parse_run_config(doa::read_text_file(config));
      if (*est && !doa::is_method(method))
        doa::fail(doa::ErrorKind::invalid_input,
                  "unknown method '" + method + "'; valid methods: " + doa::joined_method_names());
      if (*spec && !doa::is_spectrum_method(method))
        doa::fail(doa::ErrorKind::invalid_input, "unknown spectrum method '" + method + "'; valid methods: " +
                                                     doa::joined_method_names(doa::spectrum_method_names()));
    }
  } catch (const doa::Error& e) {
    return report(doa::to_string(e.kind()), e.what(), kConfigError);
  } catch (const std::exception& e) {
    return report("invalid_input", e.what(), kConfigError);
  }

  try {
    if (*sim) {
      if (cfg.exact) doa::fail(doa::ErrorKind::invalid_input, "simulate needs n_snapshots >= 1");
      auto out = open_out(out_path, std::ios::binary);
      doa::write_snapshots(out, doa::generate_snapshots(cfg.scenario));
    } else if (*est) {
      const auto x = load_snapshots(in_path, cfg);
      const auto result = doa::estimate_from_config(method, cfg, x ? &*x : nullptr);
      std::cout << doa::estimate_json_line(method, result);
    } else if (*spec) {
      const auto x = load_snapshots(in_path, cfg);
      const auto s = doa::spectrum_from_config(method, cfg, x ? &*x : nullptr);
      auto out = open_out(out_path);
      doa::write_spectrum_csv(out, s);
    } else {
      const auto records = doa::run_campaign(camp);
      auto out = open_out(out_path);
      doa::write_results_csv(out, records);
      std::string summary_path = out_path;
      const auto dot = summary_path.rfind(".csv");
      summary_path = dot == std::string::npos ? summary_path + ".summary.csv"
                                              : summary_path.substr(0, dot) + ".summary.csv";
      auto sout = open_out(summary_path);
      doa::write_summary_csv(sout, doa::summarize(records));
    }
  } catch (const doa::Error& e) {
    return report(doa::to_string(e.kind()), e.what(), classify(e));
  } catch (const std::exception& e) {
    return report("estimation_failure", e.what(), kEstimationError);
  }
  return 0;
}
