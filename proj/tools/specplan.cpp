#include "specplan/bench/commands.hpp"
#include "specplan/core/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace specplan;

void print_stats(const agents::OptimalKStats& s) {
  std::cout << "tasks " << s.tasks << ", mean steps " << metrics::fixed(s.mean_steps, 2) << ", match rate "
            << metrics::fixed(s.match_rate, 3) << ", mean max/min optimal k " << metrics::fixed(s.mean_max, 2)
            << " / " << metrics::fixed(s.mean_min, 2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative planning benchmark"};
  app.require_subcommand(1);

  std::string config, out, run_dir, reference = "fixed-k2";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("gen", "write a synthetic workload");
  gen->add_option("--config", config)->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--set", sets, "override a config key, key=value");

  auto* run = app.add_subcommand("run", "run every configured policy in the simulator");
  run->add_option("--config", config)->required();
  run->add_option("--out", out)->required();
  run->add_option("--seed", seed);
  run->add_option("--set", sets, "override a config key, key=value");

  auto* report = app.add_subcommand("report", "compute metrics for a run directory");
  report->add_option("--run", run_dir)->required();
  report->add_option("--reference", reference);
  report->add_option("--out", out)->required();

  auto* live = app.add_subcommand("live", "run every configured policy against an endpoint");
  live->add_option("--config", config)->required();
  live->add_option("--out", out)->required();
  live->add_option("--set", sets, "override a config key, key=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed) sets.push_back("seed=" + std::to_string(*seed));
    if (*gen) {
      print_stats(bench::cmd_gen(bench::load_config(config, sets), out));
    } else if (*run) {
      bench::cmd_run(bench::load_config(config, sets), out, &std::cerr);
      std::cout << "wrote " << out << '\n';
    } else if (*report) {
      const auto reports = bench::cmd_report(run_dir, reference, out);
      metrics::write_report_csv(std::cout, reports);
    } else if (*live) {
      bench::cmd_live(bench::load_config(config, sets), out, &std::cerr);
      std::cout << "wrote " << out << '\n';
    }
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
