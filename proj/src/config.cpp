#include "readmem/memory_manager.hpp"

#include <array>
#include <utility>

namespace readmem {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<Enum, N>& all, const char* what) {
  for (Enum e : all) {
    if (to_string(e) == text) return e;
  }
  std::string msg = std::string("unknown ") + what + " '" + std::string(text) + "' (expected one of:";
  for (Enum e : all) msg += " " + std::string(to_string(e));
  throw ConfigError(msg + ")");
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::readmem: return "readmem";
    case Strategy::fifo: return "fifo";
  }
  return "?";
}

std::string_view to_string(ReaMode m) {
  switch (m) {
    case ReaMode::argmax_columns: return "argmax_columns";
    case ReaMode::argmax_rows: return "argmax_rows";
    case ReaMode::hungarian: return "hungarian";
    case ReaMode::off: return "off";
  }
  return "?";
}

std::string_view to_string(ReaSource s) {
  switch (s) {
    case ReaSource::weights: return "weights";
    case ReaSource::affinity: return "affinity";
  }
  return "?";
}

std::string_view to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::every_tth: return "every_tth";
    case InitStrategy::annotated_fill: return "annotated_fill";
  }
  return "?";
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::inserted_init: return "inserted_init";
    case Action::replaced_slot: return "replaced_slot";
    case Action::rejected_lsb: return "rejected_lsb";
    case Action::rejected_no_gain: return "rejected_no_gain";
    case Action::skipped_interval: return "skipped_interval";
    case Action::adjacent_only: return "adjacent_only";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  return parse_enum(s, std::array{Strategy::readmem, Strategy::fifo}, "strategy");
}

ReaMode parse_rea_mode(std::string_view s) {
  return parse_enum(s,
                    std::array{ReaMode::argmax_columns, ReaMode::argmax_rows, ReaMode::hungarian,
                               ReaMode::off},
                    "rea variant");
}

ReaSource parse_rea_source(std::string_view s) {
  return parse_enum(s, std::array{ReaSource::weights, ReaSource::affinity}, "rea source");
}

InitStrategy parse_init_strategy(std::string_view s) {
  return parse_enum(s, std::array{InitStrategy::every_tth, InitStrategy::annotated_fill},
                    "init strategy");
}

}  // namespace readmem
