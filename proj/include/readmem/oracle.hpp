#ifndef READMEM_ORACLE_HPP
#define READMEM_ORACLE_HPP

#include <cstdint>
#include <vector>

#include "readmem/stream.hpp"

namespace readmem {

// Brute-force references for the Gram-determinant update rule. Nothing here
// calls into gramian.hpp: Gram entries come from explicit loops and
// determinants from Laplace expansion or a hand-written elimination.

enum class DeterminantMode { automatic, cofactor, lu };

/// Largest instance the cofactor mode accepts.
inline constexpr Index kCofactorMaxSize = 6;
/// Largest bank oracle_substitution accepts.
inline constexpr Index kOracleMaxSlots = 8;
/// |det| at or below this counts as zero.
inline constexpr double kOracleZeroDeterminant = 1e-12;

/// Laplace expansion along the first row. Throws BudgetError above kCofactorMaxSize.
double cofactor_determinant(const Matrix<double>& m);
/// Gaussian elimination with partial pivoting.
double lu_determinant(const Matrix<double>& m);
double oracle_determinant(const Matrix<double>& m, DeterminantMode mode);

/// Sum over all entries of a . b, channel by channel.
double naive_similarity(const Key& a, const Key& b);
Matrix<double> naive_gram(const std::vector<Key>& keys);

struct OracleDecision {
  bool replace = false;
  Index slot = -1;                        // winning slot when replace is set
  double current_abs_det = 0.0;
  std::vector<double> candidate_abs_dets;  // entry n-1 is slot n, n >= 1
};

/// Rebuilds every candidate Gram matrix of `bank_keys` with the query in slot
/// n >= 1 and applies the strict-improvement rule with smallest-slot ties.
OracleDecision oracle_substitution(const std::vector<Key>& bank_keys, const Key& query,
                                   DeterminantMode mode = DeterminantMode::automatic);

/// Same decision starting from a given memory-memory Gram matrix; only the
/// query row is recomputed, from `pseudo_keys`.
OracleDecision oracle_substitution_from_gram(const Matrix<double>& gram,
                                             const std::vector<Key>& pseudo_keys, const Key& query,
                                             DeterminantMode mode = DeterminantMode::automatic);

struct OfflineOptimum {
  std::vector<Index> frames;  // indices into the stream, frame 0 first
  double log_abs_det = 0.0;
  std::uint64_t subsets_evaluated = 0;
};

/// Exhaustive search over all `slots`-subsets of the stream that contain frame 0.
/// Throws BudgetError when choose(length - 1, slots - 1) exceeds `budget`.
OfflineOptimum oracle_offline_best_subset(const std::vector<Key>& stream_keys, Index slots,
                                          std::uint64_t budget);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace readmem

#endif  // READMEM_ORACLE_HPP
