// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "kdgan/experiment.hpp"
#include "kdgan/gradcheck_suite.hpp"

namespace {

constexpr double kGradTolerance = 1e-4;

void print_values(const std::map<std::string, double>& values) {
  for (const auto& [k, v] : values) std::printf("  %-36s %.10g\n", k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-distilled GAN training on small data"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  auto* train = app.add_subcommand("train", "Train from a flat JSON config");
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--resume", resume_path, "Checkpoint to resume from");
  bool verbose = false;
  train->add_flag("-v,--verbose", verbose, "Log evaluations to stderr");

  std::string ckpt_path, data_spec, out_csv;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint's generator");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--data", data_spec, "JSON file of data.* keys")->required();
  eval->add_option("--out", out_csv, "Metrics CSV to append to");

  std::string module = "all";
  std::uint64_t seed = 0;
  auto* grads = app.add_subcommand("check-grads", "Finite-difference gradient suite");
  grads->add_option("--module", module, "all|agkd|cgkd|adv|models")
      ->check(CLI::IsMember({"all", "agkd", "cgkd", "adv", "models"}));
  grads->add_option("--seed", seed, "Sampling seed");

  std::string run_dir;
  auto* plot = app.add_subcommand("plot", "Plot metrics.csv curves as PNG files");
  plot->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*train) {
      kdgan::TrainConfig cfg = kdgan::TrainConfig::from_file(config_path);
      kdgan::RunOptions opts;
      if (!resume_path.empty()) opts.resume_checkpoint = resume_path;
      opts.quiet = !verbose;
      kdgan::RunResult r = kdgan::run_experiment(cfg, opts);
      std::printf("run %s finished at step %lld\n", r.run_dir.c_str(),
                  static_cast<long long>(r.final_step));
      print_values(r.final_eval);
    } else if (*eval) {
      kdgan::EvalResult r = kdgan::evaluate_checkpoint(ckpt_path, data_spec, out_csv);
      std::printf("step %lld -> %s\n", static_cast<long long>(r.step), r.csv_path.c_str());
      print_values(r.values);
    } else if (*grads) {
      kdgan::GradCheckReport r = kdgan::run_gradcheck_suite(module, seed);
      std::cout << r.to_string() << '\n';
      const bool ok = r.max_rel_error < kGradTolerance;
      std::printf("%s: max_rel_error %.3e (tolerance %.0e)\n", ok ? "PASS" : "FAIL", r.max_rel_error,
                  kGradTolerance);
      return ok ? 0 : 1;
    } else if (*plot) {
      for (const auto& p : kdgan::plot_run(run_dir)) std::cout << p << '\n';
    }
  } catch (const kdgan::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
