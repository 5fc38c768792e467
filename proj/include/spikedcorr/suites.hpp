#pragma once

#include "spikedcorr/montecarlo.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spikedcorr {

// The bundled verification suite: ten numbered criteria covering analytic
// identities, dual-pathway formula oracles, cumulant and CLT Monte Carlo,
// subcritical behavior, the resolvent diagnostic, concentration properties,
// and report determinism.

struct SuiteOptions {
  std::uint64_t seed = 20240817;
  int threads = 0;      // 0: SPIKEDCORR_THREADS or 1
  std::string outdir;   // when set, criterion reports are written here
  bool smoke = false;   // reduced replicate counts, same checks
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::vector<std::string> details;  // one line per sub-check
};

CriterionResult run_criterion(int id, const SuiteOptions& opt);
std::vector<CriterionResult> run_suite(const SuiteOptions& opt);

// "criterion  4  eigenvalue-clt            PASS   52.3s"
std::string format_result_line(const CriterionResult& r);

} // namespace spikedcorr
