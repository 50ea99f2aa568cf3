#pragma once

// Command-line driver. Exit codes: 0 success, 2 parse error, 3 validation
// error, 4 undefined conditional, 5 verification failure.

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "retro/errors.hpp"
#include "retro/scenario.hpp"

namespace retro::cli {

inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  using namespace retro::scenario;

  CLI::App app{"Prediction and postdiction for prepare-transform-measure scenarios",
               std::string(kToolName)};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string scenario_path;
  std::string format = "text";
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> shots;
  std::vector<std::size_t> dims;
  unsigned threads = 1;

  app.add_option("--scenario", scenario_path, "Scenario file (JSON)");
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--seed", seed, "Seed for random instances and sampling");
  app.add_option("--tolerance", tolerance,
                 "Override comparison thresholds (structural checks stay at 1e-10)")
      ->check(CLI::PositiveNumber);
  app.add_option("--shots", shots, "Trials for `sample`")->check(CLI::PositiveNumber);
  app.add_option("--dims", dims, "Random-instance dimensions for `verify` without a scenario")
      ->expected(2, 4);
  app.add_option("--threads", threads, "Worker threads for `sample`")
      ->check(CLI::PositiveNumber);

  const std::vector<std::pair<Command, const char*>> commands{
      {Command::Predict, "Prediction table for the given preparation"},
      {Command::Postdict, "Postdiction table for the given test outcome"},
      {Command::Classify, "CPTP / unital / inference-symmetry classification"},
      {Command::Purify, "Unitary dilation and its round-trip defect"},
      {Command::Verify, "Identity suite on the scenario or on seeded random instances"},
      {Command::Sample, "Monte Carlo ensemble compared against closed forms"}};
  std::vector<std::pair<Command, CLI::App*>> subs;
  for (const auto& [cmd, help] : commands) {
    auto* sub = app.add_subcommand(std::string(to_string(cmd)), help);
    sub->fallthrough();
    subs.emplace_back(cmd, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  Command command = Command::Predict;
  for (const auto& [cmd, sub] : subs)
    if (sub->parsed())
      command = cmd;

  RunOptions opts;
  opts.seed = seed;
  opts.tolerance = tolerance;
  opts.shots = shots;
  opts.threads = threads;

  try {
    ReportDocument doc;
    if (scenario_path.empty()) {
      if (command != Command::Verify) {
        err << "error: --scenario is required for '" << to_string(command) << "'\n";
        return kExitParse;
      }
      doc = run_verify_random(dims.empty() ? std::vector<std::size_t>{2, 2} : dims, opts);
    } else {
      const ScenarioFile s = parse_scenario(scenario_path);
      doc = run(s, command, opts);
    }
    if (format == "json")
      out << to_json(doc).dump(2) << '\n';
    else if (format == "csv")
      out << render_csv(doc);
    else
      out << render_text(doc);
    return doc.pass() ? kExitOk : kExitVerification;
  } catch (const ScenarioError& e) {
    err << "error [" << to_string(e.kind()) << "] " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const UndefinedConditional& e) {
    err << "error [undefined-conditional] " << e.what() << '\n';
    return kExitUndefined;
  } catch (const InvalidInput& e) {
    err << "error [invalid-input] " << e.what() << '\n';
    return kExitValidation;
  } catch (const NoActiveReverse& e) {
    err << "error [no-active-reverse] " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

} // namespace retro::cli
