#include "sppm/errors.hpp"
#include "sppm/experiment.hpp"
#include "sppm/verify.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const sppm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const sppm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const sppm::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

void print_artifacts(const sppm::RunManifest& m) {
  for (const auto& a : m.artifacts) std::cout << a.string() << '\n';
  std::cout << "config hash " << m.config_hash << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated SPPM-AS simulator"};
  app.set_version_flag("--version", sppm::software_version());
  app.require_subcommand(1);

  std::string config;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run one algorithm per configured seed");
  run->add_option("--config", config, "experiment JSON")->required();
  run->add_option("--jobs", jobs, "concurrent seeds")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "(gamma, K) cost sweep against LocalGD");
  sweep->add_option("--config", config, "experiment JSON with a sweep block")->required();
  sweep->add_option("--jobs", jobs, "concurrent cells")->check(CLI::PositiveNumber);

  std::string level = "quick";
  auto* verify = app.add_subcommand("verify", "check library properties against theory");
  verify->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run)
    return guarded([&] {
      print_artifacts(sppm::run_experiment(sppm::load_config(config), jobs));
      return kOk;
    });
  if (*sweep)
    return guarded([&] {
      print_artifacts(sppm::sweep_experiment(sppm::load_config(config), jobs));
      return kOk;
    });
  return guarded([&] {
    const auto report = sppm::run_verify(level == "full" ? sppm::VerifyLevel::Full : sppm::VerifyLevel::Quick);
    sppm::print_verify_table(std::cout, report);
    return report.ok() ? kOk : 1;
  });
}
