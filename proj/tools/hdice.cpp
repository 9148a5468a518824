// Command-line front end: train, sweep, probe, plot.

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hdice/harness/experiment.hpp"
#include "hdice/harness/plot.hpp"
#include "hdice/harness/probe.hpp"

extern char** environ;

namespace {

using namespace hdice;
using namespace hdice::harness;

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& arg : extras) {
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos)
      throw ParseError("overrides must look like --key=value, got '" + arg + "'");
    out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ParseError("not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

int run_child(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid;
  if (posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), environ) != 0) return 127;
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H-DICE credit-assignment toolkit"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Run one experiment (extra --key=value flags override the config)");
  std::string config_path;
  train->add_option("--config", config_path, "key = value config file")->required();
  train->allow_extras();

  auto* sweep = app.add_subcommand("sweep", "Run every *.cfg in a directory once per seed, one process each");
  std::string config_dir, seeds_csv;
  sweep->add_option("--configs", config_dir, "directory of .cfg files")->required();
  sweep->add_option("--seeds", seeds_csv, "comma-separated seeds")->required();
  sweep->allow_extras();

  auto* probe = app.add_subcommand("probe", "Print pi, h and both ratios at one state");
  std::string snapshot_path, state_json, actions_csv, returns_csv, env_override;
  probe->add_option("--snapshot", snapshot_path)->required();
  probe->add_option("--state", state_json, "JSON: {\"observation\": [...]} or {\"cell\": [row, col]}")->required();
  probe->add_option("--actions", actions_csv, "e.g. left,right")->required();
  probe->add_option("--returns", returns_csv, "e.g. -100,69")->required();
  probe->add_option("--env", env_override, "environment id for cell states (default: from the snapshot)");

  auto* plot = app.add_subcommand("plot", "Render learning curves to SVG");
  std::vector<std::string> csvs;
  std::string out_svg;
  plot->add_option("--csv", csvs, "metrics CSV files")->required();
  plot->add_option("--out", out_svg, "output .svg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) {
      const RunConfig config = load_config(config_path, parse_overrides(train->remaining()));
      ExperimentResult result;
      const auto files = run_and_write(config, &result);
      std::cout << files.csv << "\n";
      if (result.error) {
        std::cerr << *result.error << "\n";
        return 1;
      }
      return 0;
    }
    if (*sweep) {
      std::vector<std::string> cfgs;
      for (const auto& entry : std::filesystem::directory_iterator(config_dir))
        if (entry.path().extension() == ".cfg") cfgs.push_back(entry.path().string());
      std::sort(cfgs.begin(), cfgs.end());
      if (cfgs.empty()) throw ContractError("no .cfg files in " + config_dir);
      const auto seeds = parse_numbers(seeds_csv);
      int failures = 0;
      for (const auto& cfg : cfgs)
        for (double s : seeds) {
          std::vector<std::string> args{"hdice", "train", "--config", cfg,
                                        "--seed=" + std::to_string(static_cast<long long>(s))};
          for (const auto& extra : sweep->remaining()) args.push_back(extra);
          const int rc = run_child(args);
          if (rc != 0) {
            ++failures;
            std::cerr << "run failed (" << rc << "): " << cfg << " seed " << s << "\n";
          }
        }
      return failures == 0 ? 0 : 1;
    }
    if (*probe) {
      const Snapshot snap = read_snapshot(snapshot_path);
      const std::string env_id = env_override.empty() ? snap.env : env_override;
      if (!snap.models.policy) throw ContractError("snapshot has no policy");
      const Vector obs = parse_probe_state(state_json, env_id);
      const auto actions = parse_probe_actions(actions_csv, snap.models.policy->action_space());
      std::cout << format_probe_table(probe_state(snap, obs, actions, parse_numbers(returns_csv)));
      return 0;
    }
    if (*plot) {
      plot_curves(csvs, out_svg);
      std::cout << out_svg << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
