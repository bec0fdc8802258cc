#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "hazardstream/errors.hpp"

namespace hazardstream {

enum class MechanismKind : std::uint8_t {
  right_censoring = 0,
  left_censoring = 1,
  cure_right_censoring = 2,
  ltrc = 3,
  ltrc_cure = 4,
  modified_current_status = 5,
  competing_risks = 6,
};

inline std::string_view to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::right_censoring: return "right_censoring";
    case MechanismKind::left_censoring: return "left_censoring";
    case MechanismKind::cure_right_censoring: return "cure_right_censoring";
    case MechanismKind::ltrc: return "ltrc";
    case MechanismKind::ltrc_cure: return "ltrc_cure";
    case MechanismKind::modified_current_status: return "modified_current_status";
    case MechanismKind::competing_risks: return "competing_risks";
  }
  return "unknown";
}

inline MechanismKind parse_mechanism(std::string_view s) {
  for (int k = 0; k <= 6; ++k)
    if (to_string(static_cast<MechanismKind>(k)) == s) return static_cast<MechanismKind>(k);
  if (s == "rc") return MechanismKind::right_censoring;
  if (s == "lc") return MechanismKind::left_censoring;
  if (s == "cure") return MechanismKind::cure_right_censoring;
  if (s == "mcs") return MechanismKind::modified_current_status;
  if (s == "cr") return MechanismKind::competing_risks;
  throw config_error("unknown mechanism '" + std::string(s) + "'");
}

/// Cure kinds take a support bound tau(x) per covariate point.
constexpr bool is_cure(MechanismKind k) {
  return k == MechanismKind::cure_right_censoring || k == MechanismKind::ltrc_cure;
}

constexpr bool is_truncated(MechanismKind k) { return k == MechanismKind::ltrc || k == MechanismKind::ltrc_cure; }

}  // namespace hazardstream
