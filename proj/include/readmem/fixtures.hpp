#ifndef READMEM_FIXTURES_HPP
#define READMEM_FIXTURES_HPP

#include <cstdint>

#include "readmem/memory_manager.hpp"
#include "readmem/stream.hpp"

namespace readmem {

/// A memory key and a query key whose spatial layouts disagree.
struct ReaFixture {
  Key memory_key;
  Key query_key;
};

/// Query columns are distinct random unit signatures; the memory key holds the
/// same columns cyclically shifted by a nonzero seeded offset.
ReaFixture permutation_fixture(const ShapeSpec& shape, std::uint64_t seed);

/// Foreground signature on a `memory_fraction` share of the memory columns and a
/// larger `query_fraction` share of the query columns, at different positions.
/// Every column is unit norm after noise so projections never change the norm.
ReaFixture area_change_fixture(const ShapeSpec& shape, std::uint64_t seed, double memory_fraction,
                               double query_fraction, double noise_sigma = 0.05);

/// g(pseudo key, query key) after one attention pass over a single-slot memory.
/// ReaMode::off compares the raw memory key.
double recovered_similarity(const ReaFixture& fixture, ReaMode mode, ReaSource source, Index topk);

}  // namespace readmem

#endif  // READMEM_FIXTURES_HPP
