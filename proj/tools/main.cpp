#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "finhol/commands.hpp"
#include "finhol/errors.hpp"
#include "finhol/report.hpp"

namespace {

// Exit codes: 0 success (flags and warnings included), 2 config error,
// 3 degenerate model, 4 numerical failure.
int run(const std::string& command, const finhol::RunOptions& opts) {
  try {
    const finhol::Json report = finhol::run_command(command, opts);
    finhol::emit_report(report, opts.out_path);
    return 0;
  } catch (const finhol::ConfigError& e) {
    std::fprintf(stderr, "finhol: %s\n", e.what());
    return 2;
  } catch (const finhol::DegenerateModelError& e) {
    std::fprintf(stderr, "finhol: degenerate model: %s\n", e.what());
    return 3;
  } catch (const finhol::NumericalError& e) {
    std::fprintf(stderr, "finhol: numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "finhol: internal error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finhol: Berwald connection, curvature fields and holonomy experiments "
               "for Finsler models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(finhol::kToolName) + " " +
                                        finhol::kToolVersion);

  finhol::RunOptions opts;
  std::uint64_t seed_arg = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "experiment config file (TOML subset)")
        ->required();
    sub->add_option("--out", opts.out_path, "report path; '-' or omitted = stdout");
    sub->add_option("--seed", seed_arg, "override the [run] seed")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--threads", opts.threads, "advisory parallelism for independent blocks")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", opts.verbose, "progress and generation logs on stderr");
  };

  add_common(app.add_subcommand("inspect", "validate a model and print g, G and R at points"));
  add_common(app.add_subcommand("algebra",
                                "curvature / infinitesimal-holonomy algebra rank bounds"));
  add_common(app.add_subcommand(
      "holonomy", "loop experiments, translated generators and commutator families"));
  add_common(app.add_subcommand("transport", "parallel transport along configured curves"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 returns 0 for --help/--version; everything else is bad usage.
    return code == 0 ? 0 : 2;
  }

  if (seed_given) opts.seed = seed_arg;
  return run(app.get_subcommands().front()->get_name(), opts);
}
