#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedtoe/config.hpp"

namespace fedtoe::verify {

struct CheckResult {
  std::string name;
  std::string metric;  // what "measured" is (z-score, relative error, ...)
  double measured = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  std::uint64_t seed = 1234;
  // Rebuilds the target rate from a fade margin with the wrong sign; the
  // outage/rate consistency check must then fail. Negative-test hook.
  bool inject_theta_sign_error = false;
};

std::vector<CheckResult> run_checks(const config::ExperimentConfig& cfg,
                                    const VerifyOptions& opts = {});

std::string report(const std::vector<CheckResult>& checks);
bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace fedtoe::verify
