#ifndef READMEM_STREAM_HPP
#define READMEM_STREAM_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "readmem/embedding.hpp"

namespace readmem {

using Key = KeyEmbedding<double>;
using Value = ValueEmbedding<double>;

/// Synthetic stream regimes. More than one regime in a StreamSpec composes them.
enum class Regime { stationary, slow_drift, cyclic_shift, area_change, distractor };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

/// Recipe for a deterministic synthetic embedding stream.
///
/// Every frame is built from a foreground signature carried by a subset of
/// spatial columns and a per-column background signature, then transformed by
/// the active regimes and perturbed by isotropic noise. `noise_sigma` is the
/// expected norm of the noise relative to the unit-norm clean key.
struct StreamSpec {
  ShapeSpec shape;
  Index length = 1;
  std::vector<Regime> regimes{Regime::stationary};
  double drift_rate = 0.01;          // radians per frame
  Index shift_period = 1;            // frames per one-column shift
  double area_min = 0.25;            // foreground fraction at frame 0
  double area_max = 0.75;            // foreground fraction at the last frame
  Index distractor_start = 0;
  Index distractor_end = 0;          // inclusive
  double foreground_fraction = 0.75; // used when area_change is inactive
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  bool aliased = true;               // qm key/value alias the query key

  bool has(Regime r) const;
  void validate() const;
};

struct FrameRecord {
  std::int64_t frame_index = 0;
  Key query_key;
  Key qm_key;
  Value qm_value;
  bool ground_truth_present = true;
};

std::vector<FrameRecord> generate_stream(const StreamSpec& spec);

/// Value embedding attached to a key when the stream does not carry one:
/// value row r copies key row (r mod C_k).
Value derive_value(const Key& key, const ShapeSpec& shape);

}  // namespace readmem

#endif  // READMEM_STREAM_HPP
