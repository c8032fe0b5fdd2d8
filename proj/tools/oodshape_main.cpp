// oodshape: benchmark runner for post-hoc feature shaping on dumped features.
//
//   oodshape run          --config cfg.json
//   oodshape sweep-k      --config cfg.json --k 0,1,2,5,10,50,100
//   oodshape sweep-pct    --config cfg.json --pct 0.1:99.9,1:99,5:95
//   oodshape export-theta --config cfg.json [--out theta.csv]
//   oodshape diagnostics  --config cfg.json
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oodshape/bench.hpp"
#include "oodshape/error.hpp"

namespace {

using namespace oodshape;

int exit_code(ErrorCategory c) {
  switch (c) {
  case ErrorCategory::Config:
    return 2;
  case ErrorCategory::Data:
    return 3;
  case ErrorCategory::Numerical:
    return 4;
  }
  return 1;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty())
      out.push_back(item);
  return out;
}

std::vector<std::size_t> parse_k_list(const std::string &s) {
  std::vector<std::size_t> out;
  for (const auto &item : split(s, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != item.size() || v < 0)
      throw ConfigError("bad K value '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::pair<double, double>> parse_pct_list(const std::string &s) {
  std::vector<std::pair<double, double>> out;
  for (const auto &item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2)
      throw ConfigError("percentile pair must look like lo:hi, got '" + item + "'");
    try {
      out.emplace_back(std::stod(parts[0]), std::stod(parts[1]));
    } catch (const std::exception &) {
      throw ConfigError("bad percentile pair '" + item + "'");
    }
  }
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Optimal piecewise-constant feature shaping for OOD detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string k_list = "0,1,2,5,10,50,100";
  std::string pct_list = "0.1:99.9,1:99,5:95";

  auto *run_cmd = app.add_subcommand("run", "fit theta and evaluate every method/score pair");
  run_cmd->add_option("--config", config_path, "benchmark config (JSON)")->required();

  auto *sweep_k_cmd = app.add_subcommand("sweep-k", "evaluate ours methods over several K");
  sweep_k_cmd->add_option("--config", config_path, "benchmark config (JSON)")->required();
  sweep_k_cmd->add_option("--k", k_list, "comma-separated K values; 0 means no shaping");
  sweep_k_cmd->add_option("--out", out_path, "output CSV (default <output_dir>/sweep_k.csv)");

  auto *sweep_pct_cmd =
      app.add_subcommand("sweep-pct", "evaluate ours methods over partition percentile limits");
  sweep_pct_cmd->add_option("--config", config_path, "benchmark config (JSON)")->required();
  sweep_pct_cmd->add_option("--pct", pct_list, "comma-separated lo:hi pairs");
  sweep_pct_cmd->add_option("--out", out_path, "output CSV (default <output_dir>/sweep_pct.csv)");

  auto *theta_cmd = app.add_subcommand("export-theta", "write per-bin theta curves");
  theta_cmd->add_option("--config", config_path, "benchmark config (JSON)")->required();
  theta_cmd->add_option("--out", out_path, "output CSV (default <output_dir>/theta_curves.csv)");

  auto *diag_cmd = app.add_subcommand(
      "diagnostics", "mean-ISFI cosine/norm ratios, changed-weight ratios, weight profile");
  diag_cmd->add_option("--config", config_path, "benchmark config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = bench::load_config(config_path);
    const auto data = bench::load_data(config);
    const auto target = [&](const char *fallback) {
      return out_path.empty() ? config.output_dir / fallback : std::filesystem::path(out_path);
    };

    if (*run_cmd) {
      const auto report = bench::run(config, data);
      bench::write_report(report, config.output_dir);
      std::cout << bench::report_csv(report);
      std::cerr << "wall time " << report.wall_time_s << " s\n";
    } else if (*sweep_k_cmd) {
      const auto rows = bench::sweep_k(config, data, parse_k_list(k_list));
      const auto csv = bench::sweep_k_csv(rows);
      bench::write_text(target("sweep_k.csv"), csv);
      std::cout << csv;
    } else if (*sweep_pct_cmd) {
      const auto rows = bench::sweep_percentiles(config, data, parse_pct_list(pct_list));
      const auto csv = bench::sweep_pct_csv(rows);
      bench::write_text(target("sweep_pct.csv"), csv);
      std::cout << csv;
    } else if (*theta_cmd) {
      bench::write_text(target("theta_curves.csv"), bench::theta_curves_csv(config, data));
    } else if (*diag_cmd) {
      const auto report = bench::diagnostics(config, data);
      bench::write_diagnostics(report, config.output_dir);
      for (const auto &[name, d] : report.expectations)
        std::cout << name << " cosine=" << d.cosine << " norm_ratio=" << d.norm_ratio << "\n";
      for (const auto &[label, r] : report.changed_weight_ratios)
        std::cout << label << " changed_weight_ratio=" << r << "%\n";
    }
  } catch (const Error &e) {
    std::cerr << "oodshape: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception &e) {
    std::cerr << "oodshape: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
