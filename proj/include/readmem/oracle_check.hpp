#ifndef READMEM_ORACLE_CHECK_HPP
#define READMEM_ORACLE_CHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "readmem/embedding.hpp"

namespace readmem {

struct OracleCheckConfig {
  std::int64_t trials = 1000;
  Index slots = 5;
  ShapeSpec shape{4, 4, 8};
  std::uint64_t seed = 1;
  /// Test hook: misreport the engine's winning slot so every replacement disagrees.
  bool inject_fault = false;
};

struct OracleCheckReport {
  std::int64_t trials = 0;
  std::int64_t agreements = 0;
  std::int64_t replacements = 0;  // oracle-side decisions
  std::int64_t rejections = 0;
  std::vector<std::string> disagreements;  // first few, human readable

  bool all_agree() const { return agreements == trials; }
};

/// Randomized engine-vs-oracle trials with REA off and the similarity gate open:
/// fill a bank of `slots` random keys, offer one more key, and compare the
/// engine's Gramian decision with oracle_substitution().
OracleCheckReport run_oracle_check(const OracleCheckConfig& config);

}  // namespace readmem

#endif  // READMEM_ORACLE_CHECK_HPP
