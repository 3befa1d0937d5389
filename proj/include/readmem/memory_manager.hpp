#ifndef READMEM_MEMORY_MANAGER_HPP
#define READMEM_MEMORY_MANAGER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "readmem/attention.hpp"
#include "readmem/embedding.hpp"
#include "readmem/gramian.hpp"
#include "readmem/rea.hpp"

namespace readmem {

enum class Strategy { readmem, fifo };
enum class ReaMode { argmax_columns, argmax_rows, hungarian, off };
enum class ReaSource { weights, affinity };
enum class InitStrategy { every_tth, annotated_fill };

enum class Action {
  inserted_init,
  replaced_slot,
  rejected_lsb,
  rejected_no_gain,
  skipped_interval,
  // Reserved for callers that refresh only the temporary slot; observe() never emits it.
  adjacent_only,
};

/// Transition construction used by an active REA mode (off maps to argmax_columns).
inline TransitionVariant to_transition_variant(ReaMode m) {
  switch (m) {
    case ReaMode::argmax_rows: return TransitionVariant::argmax_rows;
    case ReaMode::hungarian: return TransitionVariant::hungarian;
    default: return TransitionVariant::argmax_columns;
  }
}

std::string_view to_string(Strategy s);
std::string_view to_string(ReaMode m);
std::string_view to_string(ReaSource s);
std::string_view to_string(InitStrategy s);
std::string_view to_string(Action a);

/// Parsers accept exactly the to_string() spellings and throw ConfigError otherwise.
Strategy parse_strategy(std::string_view s);
ReaMode parse_rea_mode(std::string_view s);
ReaSource parse_rea_source(std::string_view s);
InitStrategy parse_init_strategy(std::string_view s);

struct EngineConfig {
  Index slots = 20;
  Index sampling_interval = 10;
  Index topk = 20;
  double lsb_threshold = 0.5;
  Strategy strategy = Strategy::readmem;
  ReaMode rea = ReaMode::argmax_columns;
  ReaSource rea_source = ReaSource::weights;
  InitStrategy init = InitStrategy::every_tth;
  bool use_adjacent = true;
  ShapeSpec shape;

  void validate() const {
    try {
      shape.validate();
    } catch (const ShapeError& e) {
      throw ConfigError(e.what());
    }
    if (slots < 2) throw ConfigError("config: slots must be >= 2");
    if (slots > shape.channels_key * shape.spatial) {
      throw ConfigError("config: slots (" + std::to_string(slots) +
                        ") exceeds key dimension C_k*HW = " +
                        std::to_string(shape.channels_key * shape.spatial));
    }
    if (sampling_interval < 1) throw ConfigError("config: sampling_interval must be >= 1");
    if (topk < 1) throw ConfigError("config: topk must be >= 1");
    if (!(lsb_threshold >= -1.0 && lsb_threshold <= 1.0)) {
      throw ConfigError("config: lsb threshold must lie in [-1, 1]");
    }
  }
};

/// Stored slots (slot 0 = annotated frame), optional previous-frame slot, and
/// the Gram state of the stored keys. Keys and values are kept in parallel
/// vectors so they can be handed to the attention functions directly.
template <typename Scalar>
struct MemoryBank {
  std::vector<KeyEmbedding<Scalar>> keys;
  std::vector<ValueEmbedding<Scalar>> values;
  std::optional<KeyEmbedding<Scalar>> adjacent_key;
  std::optional<ValueEmbedding<Scalar>> adjacent_value;
  GramState<Scalar> gram;
  Index capacity = 0;

  Index fill_count() const { return static_cast<Index>(keys.size()); }
  bool full() const { return fill_count() >= capacity; }
};

template <typename Scalar>
struct UpdateDecision {
  Action action = Action::skipped_interval;
  std::optional<Index> slot;
  Scalar gramian_before = Scalar(0);
  Scalar gramian_after = Scalar(0);
  std::optional<Scalar> lsb_score;
  std::optional<CandidateSet<Scalar>> candidates;

  std::optional<Scalar> candidate_max() const {
    if (!candidates) return std::nullopt;
    if (auto best = candidates->best()) return best->log_abs_det;
    return std::nullopt;
  }
};

template <typename Scalar>
struct Observation {
  WeightTensor<Scalar> weights;
  ValueEmbedding<Scalar> readout;
  UpdateDecision<Scalar> decision;
  /// REA-projected stored keys, one per slot; empty when the frame was skipped
  /// or the FIFO strategy is active.
  std::vector<KeyEmbedding<Scalar>> pseudo_keys;
  /// g(pseudo key a, qm key) when the DME step ran.
  std::optional<Vector<Scalar>> query_sims;
};

/// Diversity-maximizing external memory for one object track.
///
/// Single owner: observe() mutates the bank in place. Distinct engines share
/// nothing and may run on different threads.
template <typename Scalar>
class MemoryEngine {
 public:
  MemoryEngine(EngineConfig config, const KeyEmbedding<Scalar>& annotated_key,
               const ValueEmbedding<Scalar>& annotated_value)
      : config_(std::move(config)) {
    config_.validate();
    check_shape(annotated_key.shape(), "init_engine");
    check_shape(annotated_value.shape(), "init_engine");
    const KeyEmbedding<Scalar> key = normalize_key(annotated_key);
    last_frame_ = key.frame_index();
    bank_.capacity = config_.slots;
    const Index copies = config_.init == InitStrategy::annotated_fill ? config_.slots : 1;
    for (Index n = 0; n < copies; ++n) {
      bank_.keys.push_back(key);
      bank_.values.push_back(retag(annotated_value, key.frame_index()));
    }
    bank_.gram = build_gram(bank_.keys);
  }

  const EngineConfig& config() const { return config_; }
  const MemoryBank<Scalar>& bank() const { return bank_; }

  /// log|det| of the stored-slot Gram matrix; the adjacent slot never contributes.
  Scalar current_gramian() const { return bank_.gram.log_abs_det; }

  Observation<Scalar> observe(std::int64_t frame_index, const KeyEmbedding<Scalar>& query_key,
                              const KeyEmbedding<Scalar>& qm_key,
                              const ValueEmbedding<Scalar>& qm_value) {
    if (frame_index <= last_frame_) {
      throw FrameOrderError("observe: frame " + std::to_string(frame_index) +
                            " does not follow frame " + std::to_string(last_frame_));
    }
    check_shape(query_key.shape(), "observe");
    check_shape(qm_key.shape(), "observe");
    check_shape(qm_value.shape(), "observe");
    const KeyEmbedding<Scalar> query = normalize_key(query_key);
    const KeyEmbedding<Scalar> candidate = retag(normalize_key(qm_key), frame_index);
    const ValueEmbedding<Scalar> candidate_value = retag(qm_value, frame_index);

    AttentionPass<Scalar> pass;
    Observation<Scalar> obs{{}, attention_readout(query, frame_index, pass), {}, {}, {}};
    obs.weights = pass.weights;

    UpdateDecision<Scalar>& decision = obs.decision;
    decision.gramian_before = current_gramian();
    if (frame_index % config_.sampling_interval != 0) {
      decision.action = Action::skipped_interval;
    } else if (config_.strategy == Strategy::fifo) {
      update_fifo(candidate, candidate_value, decision);
    } else {
      update_readmem(pass, candidate, candidate_value, obs);
    }
    decision.gramian_after = current_gramian();

    if (config_.use_adjacent) {
      bank_.adjacent_key = candidate;
      bank_.adjacent_value = candidate_value;
    }
    last_frame_ = frame_index;
    return obs;
  }

 private:
  void check_shape(const ShapeSpec& shape, const char* where) const {
    if (!(shape == config_.shape)) {
      throw ShapeError(std::string(where) + ": embedding shape " + shape.to_string() +
                       " does not match engine shape " + config_.shape.to_string());
    }
  }

  template <typename Tag>
  static Embedding<Scalar, Tag> retag(const Embedding<Scalar, Tag>& e, std::int64_t frame) {
    return Embedding<Scalar, Tag>(e.data(), e.shape(), frame);
  }

  ValueEmbedding<Scalar> attention_readout(const KeyEmbedding<Scalar>& query, std::int64_t frame,
                                           AttentionPass<Scalar>& pass) const {
    const bool with_adjacent = config_.use_adjacent && bank_.adjacent_key.has_value();
    if (!with_adjacent) {
      pass = attend(bank_.keys, query, config_.topk);
      return readout(bank_.values, pass.weights, frame);
    }
    std::vector<KeyEmbedding<Scalar>> keys = bank_.keys;
    std::vector<ValueEmbedding<Scalar>> values = bank_.values;
    keys.push_back(*bank_.adjacent_key);
    values.push_back(*bank_.adjacent_value);
    pass = attend(keys, query, config_.topk);
    return readout(values, pass.weights, frame);
  }

  std::vector<KeyEmbedding<Scalar>> pseudo_keys(const AttentionPass<Scalar>& pass) const {
    if (config_.rea == ReaMode::off) return bank_.keys;
    const TransitionVariant variant = to_transition_variant(config_.rea);
    std::vector<KeyEmbedding<Scalar>> out;
    out.reserve(bank_.keys.size());
    for (Index n = 0; n < bank_.fill_count(); ++n) {
      const Matrix<Scalar> block = config_.rea_source == ReaSource::weights
                                       ? slice_weights(pass.weights, n)
                                       : slice_weights(pass.affinity, n);
      out.push_back(project(bank_.keys[static_cast<std::size_t>(n)],
                            build_transition(block, variant, n)));
    }
    return out;
  }

  void append(const KeyEmbedding<Scalar>& key, const ValueEmbedding<Scalar>& value,
              UpdateDecision<Scalar>& decision) {
    bank_.keys.push_back(key);
    bank_.values.push_back(value);
    bank_.gram = build_gram(bank_.keys);
    decision.action = Action::inserted_init;
    decision.slot = bank_.fill_count() - 1;
  }

  void update_readmem(const AttentionPass<Scalar>& pass, const KeyEmbedding<Scalar>& candidate,
                      const ValueEmbedding<Scalar>& candidate_value, Observation<Scalar>& obs) {
    UpdateDecision<Scalar>& decision = obs.decision;
    obs.pseudo_keys = pseudo_keys(pass);
    decision.lsb_score = similarity(obs.pseudo_keys.front(), candidate);
    if (!(*decision.lsb_score > Scalar(config_.lsb_threshold))) {
      decision.action = Action::rejected_lsb;
      return;
    }
    if (!bank_.full()) {
      append(candidate, candidate_value, decision);
      return;
    }

    Vector<Scalar> sims(bank_.fill_count());
    for (Index a = 0; a < bank_.fill_count(); ++a) {
      sims(a) = similarity(obs.pseudo_keys[static_cast<std::size_t>(a)], candidate);
    }
    const Scalar self_sim = similarity(candidate, candidate);
    decision.candidates = candidate_substitutions(bank_.gram, sims, self_sim);
    obs.query_sims = sims;
    const auto best = decision.candidates->best();
    // Strict: a candidate equal to the current Gramian is not an improvement.
    if (!best || !(best->log_abs_det > bank_.gram.log_abs_det)) {
      decision.action = Action::rejected_no_gain;
      return;
    }
    const auto n = static_cast<std::size_t>(best->slot);
    bank_.gram = apply_substitution(bank_.gram, best->slot, sims, self_sim);
    bank_.keys[n] = candidate;
    bank_.values[n] = candidate_value;
    decision.action = Action::replaced_slot;
    decision.slot = best->slot;
  }

  void update_fifo(const KeyEmbedding<Scalar>& candidate, const ValueEmbedding<Scalar>& candidate_value,
                   UpdateDecision<Scalar>& decision) {
    if (!bank_.full()) {
      append(candidate, candidate_value, decision);
      return;
    }
    Index oldest = 1;
    for (Index n = 2; n < bank_.fill_count(); ++n) {
      if (bank_.keys[static_cast<std::size_t>(n)].frame_index() <
          bank_.keys[static_cast<std::size_t>(oldest)].frame_index()) {
        oldest = n;
      }
    }
    bank_.keys[static_cast<std::size_t>(oldest)] = candidate;
    bank_.values[static_cast<std::size_t>(oldest)] = candidate_value;
    bank_.gram = build_gram(bank_.keys);
    decision.action = Action::replaced_slot;
    decision.slot = oldest;
  }

  EngineConfig config_;
  MemoryBank<Scalar> bank_;
  std::int64_t last_frame_ = 0;
};

}  // namespace readmem

#endif  // READMEM_MEMORY_MANAGER_HPP
