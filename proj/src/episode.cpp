#include "readmem/episode.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "readmem/oracle.hpp"

namespace readmem {

std::int64_t MetricsSummary::count(Action a) const {
  auto it = action_counts.find(a);
  return it == action_counts.end() ? 0 : it->second;
}

std::optional<double> MetricsSummary::oracle_agreement_rate() const {
  if (oracle_checks == 0) return std::nullopt;
  return static_cast<double>(oracle_agreements) / static_cast<double>(oracle_checks);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

bool agrees(const OracleDecision& oracle, const UpdateDecision<double>& decision) {
  if (decision.action == Action::replaced_slot) return oracle.replace && oracle.slot == *decision.slot;
  return decision.action == Action::rejected_no_gain && !oracle.replace;
}

}  // namespace

MetricsRecord run_episode(const EngineConfig& config, const std::vector<FrameRecord>& stream,
                          const EpisodeOptions& options) {
  if (stream.empty()) throw ConfigError("run_episode: empty stream");
  if (!(stream.front().query_key.shape() == config.shape)) {
    throw ShapeError("run_episode: stream shape " + stream.front().query_key.shape().to_string() +
                     " does not match engine shape " + config.shape.to_string());
  }
  const FrameRecord& annotated = stream.front();
  Engine engine(config, annotated.qm_key, annotated.qm_value);

  MetricsRecord record;
  record.rows.push_back(MetricsRow{annotated.frame_index, Action::inserted_init,
                                   engine.current_gramian(), std::nullopt, Index{0}, std::nullopt});
  record.summary.action_counts[Action::inserted_init] += 1;

  for (std::size_t t = 1; t < stream.size(); ++t) {
    const FrameRecord& f = stream[t];
    const bool oracle_eligible = options.check_oracle && config.strategy == Strategy::readmem &&
                                 engine.bank().full() &&
                                 engine.bank().fill_count() <= kOracleMaxSlots;
    std::vector<Key> keys_before;
    Matrix<double> gram_before;
    if (oracle_eligible) {
      keys_before = engine.bank().keys;
      gram_before = engine.bank().gram.matrix;
    }

    const Observation<double> obs = engine.observe(f.frame_index, f.query_key, f.qm_key, f.qm_value);
    const UpdateDecision<double>& d = obs.decision;
    record.rows.push_back(MetricsRow{f.frame_index, d.action, d.gramian_after, d.lsb_score, d.slot,
                                     d.candidate_max()});
    record.summary.action_counts[d.action] += 1;

    if (oracle_eligible && d.candidates) {
      const Key candidate = normalize_key(f.qm_key);
      const OracleDecision oracle =
          config.rea == ReaMode::off
              ? oracle_substitution(keys_before, candidate)
              : oracle_substitution_from_gram(gram_before, obs.pseudo_keys, candidate);
      record.summary.oracle_checks += 1;
      if (agrees(oracle, d)) record.summary.oracle_agreements += 1;
    }
  }

  record.summary.final_gramian = engine.current_gramian();
  record.summary.final_key_gramian = build_gram(engine.bank().keys).log_abs_det;
  for (const Key& k : engine.bank().keys) record.summary.final_slot_frames.push_back(k.frame_index());
  return record;
}

void write_metrics_csv(std::ostream& out, const MetricsRecord& record) {
  out << "frame,action,log_abs_det,lsb_score,winning_slot,candidate_max\n";
  for (const MetricsRow& row : record.rows) {
    out << row.frame << ',' << to_string(row.action) << ',' << format_number(row.log_abs_det) << ',';
    if (row.lsb_score) out << format_number(*row.lsb_score);
    out << ',';
    if (row.winning_slot) out << *row.winning_slot;
    out << ',';
    if (row.candidate_max) out << format_number(*row.candidate_max);
    out << '\n';
  }
}

std::string metrics_csv(const MetricsRecord& record) {
  std::ostringstream os;
  write_metrics_csv(os, record);
  return os.str();
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string summary_json(const MetricsRecord& record, const EngineConfig& config) {
  const MetricsSummary& s = record.summary;
  nlohmann::ordered_json j;
  j["frames"] = record.rows.size();
  j["final_gramian"] = number_or_null(s.final_gramian);
  j["final_gramian_singular"] = std::isinf(s.final_gramian);
  j["final_key_gramian"] = number_or_null(s.final_key_gramian);
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (Action a : {Action::inserted_init, Action::replaced_slot, Action::rejected_lsb,
                   Action::rejected_no_gain, Action::skipped_interval, Action::adjacent_only}) {
    counts[std::string(to_string(a))] = s.count(a);
  }
  j["action_counts"] = counts;
  j["accepted"] = s.count(Action::inserted_init) + s.count(Action::replaced_slot);
  j["rejected"] = s.count(Action::rejected_lsb) + s.count(Action::rejected_no_gain);
  j["final_slot_frames"] = s.final_slot_frames;
  j["oracle_checks"] = s.oracle_checks;
  j["oracle_agreements"] = s.oracle_agreements;
  if (auto rate = s.oracle_agreement_rate()) {
    j["oracle_agreement_rate"] = *rate;
  } else {
    j["oracle_agreement_rate"] = nullptr;
  }
  nlohmann::ordered_json c;
  c["slots"] = config.slots;
  c["sampling_interval"] = config.sampling_interval;
  c["topk"] = config.topk;
  c["lsb_threshold"] = config.lsb_threshold;
  c["strategy"] = std::string(to_string(config.strategy));
  c["rea"] = std::string(to_string(config.rea));
  c["rea_source"] = std::string(to_string(config.rea_source));
  c["init"] = std::string(to_string(config.init));
  c["use_adjacent"] = config.use_adjacent;
  c["channels_key"] = config.shape.channels_key;
  c["channels_value"] = config.shape.channels_value;
  c["spatial"] = config.shape.spatial;
  j["config"] = c;
  return j.dump(2) + "\n";
}

}  // namespace readmem
