#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sppm {

enum class VerifyLevel { Quick, Full };

struct VerifyCheck {
  std::string module;
  std::string property;
  double empirical = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;  // counterexample seed when the check is randomized
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool ok() const;
};

/// Functions under test, replaceable so mutation checks can confirm the
/// suite notices a broken implementation.
struct VerifyHooks {
  std::function<double(double, int, int)> sigma_nice_closed_form;
};

/// Quick: small-n enumeration and closed-form suites. Full adds the
/// Monte-Carlo bound suites and the stratified/block/nice counterexample.
VerifyReport run_verify(VerifyLevel level, const VerifyHooks& hooks = {});

/// quantity | empirical | bound | pass/fail table.
void print_verify_table(std::ostream& out, const VerifyReport& report);

}  // namespace sppm
