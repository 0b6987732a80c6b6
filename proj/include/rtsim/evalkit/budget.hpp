#pragma once

#include "rtsim/evalkit/metrics.hpp"

namespace rtsim::evalkit {

struct ErrorBudget {
  double scanner_mae_mm = 0.0;
  double scanner_max_mm = 0.0;
  double recon_mae_mm = 0.0;
  double recon_max_mm = 0.0;
  double decimation_bound_mm = 0.0;
  double composed_mae_mm = 0.0;
  double composed_max_mm = 0.0;
};

/// Worst-case composition: stage errors add up.
inline ErrorBudget compose_budget(const MetricsReport& scanner, const MetricsReport& recon, double decim_bound_mm) {
  if (!(decim_bound_mm >= 0.0)) throw Error("decimation bound must be non-negative");
  ErrorBudget b;
  b.scanner_mae_mm = scanner.mae_mm;
  b.scanner_max_mm = scanner.max_mm;
  b.recon_mae_mm = recon.mae_mm;
  b.recon_max_mm = recon.max_mm;
  b.decimation_bound_mm = decim_bound_mm;
  b.composed_mae_mm = scanner.mae_mm + recon.mae_mm + decim_bound_mm;
  b.composed_max_mm = scanner.max_mm + recon.max_mm + decim_bound_mm;
  return b;
}

inline nlohmann::json to_json(const ErrorBudget& b) {
  return {{"scanner_mae_mm", b.scanner_mae_mm},   {"scanner_max_mm", b.scanner_max_mm},
          {"recon_mae_mm", b.recon_mae_mm},       {"recon_max_mm", b.recon_max_mm},
          {"decimation_bound_mm", b.decimation_bound_mm}, {"composed_mae_mm", b.composed_mae_mm},
          {"composed_max_mm", b.composed_max_mm}};
}

}  // namespace rtsim::evalkit
