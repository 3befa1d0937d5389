#ifndef READMEM_EPISODE_HPP
#define READMEM_EPISODE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "readmem/memory_manager.hpp"
#include "readmem/stream.hpp"

namespace readmem {

using Engine = MemoryEngine<double>;

/// One CSV row per frame; frame 0 is the annotated initialization.
struct MetricsRow {
  std::int64_t frame = 0;
  Action action = Action::inserted_init;
  double log_abs_det = 0.0;
  std::optional<double> lsb_score;
  std::optional<Index> winning_slot;
  std::optional<double> candidate_max;
};

struct MetricsSummary {
  double final_gramian = 0.0;
  /// log|det| of the Gram matrix rebuilt from the final slot keys. Differs from
  /// final_gramian only when REA-projected similarities were frozen into G.
  double final_key_gramian = 0.0;
  std::map<Action, std::int64_t> action_counts;
  std::int64_t oracle_checks = 0;
  std::int64_t oracle_agreements = 0;
  std::vector<std::int64_t> final_slot_frames;

  std::int64_t count(Action a) const;
  std::optional<double> oracle_agreement_rate() const;
};

struct MetricsRecord {
  std::vector<MetricsRow> rows;
  MetricsSummary summary;
};

struct EpisodeOptions {
  /// Cross-check every Gramian decision against the brute-force oracle
  /// (only when the bank has at most kOracleMaxSlots slots).
  bool check_oracle = false;
};

/// Frame 0 initializes the engine as the annotated frame; the rest are observed in order.
MetricsRecord run_episode(const EngineConfig& config, const std::vector<FrameRecord>& stream,
                          const EpisodeOptions& options = {});

/// Header: frame,action,log_abs_det,lsb_score,winning_slot,candidate_max
void write_metrics_csv(std::ostream& out, const MetricsRecord& record);
std::string metrics_csv(const MetricsRecord& record);
std::string summary_json(const MetricsRecord& record, const EngineConfig& config);

/// Shortest round-trip decimal for a double; "-inf"/"inf"/"nan" for non-finite values.
std::string format_number(double v);

}  // namespace readmem

#endif  // READMEM_EPISODE_HPP
