#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rtsim/error.hpp"

namespace rtsim::evalkit {

struct MetricsReport {
  double mae_mm = 0.0;
  double rmse_mm = 0.0;
  double max_mm = 0.0;
  std::size_t n = 0;
};

/// MAE, RMSE and maximum absolute value of a residual set.
inline MetricsReport metrics(std::span<const double> errors) {
  if (errors.empty()) throw Error("metrics of an empty residual set");
  double abs_sum = 0.0, sq_sum = 0.0, mx = 0.0;
  for (double e : errors) {
    if (!std::isfinite(e)) throw Error("metrics: non-finite residual");
    const double a = std::abs(e);
    abs_sum += a;
    sq_sum += a * a;
    mx = std::max(mx, a);
  }
  const auto n = static_cast<double>(errors.size());
  MetricsReport r;
  r.n = errors.size();
  r.mae_mm = std::min(abs_sum / n, mx);
  // Rounding in the sums can invert the ordering by an ulp for near-constant inputs.
  r.rmse_mm = std::clamp(std::sqrt(sq_sum / n), r.mae_mm, mx);
  r.max_mm = mx;
  return r;
}

/// Display form rounded to one significant digit ("1 mm"); reports keep full precision.
inline std::string round_significant(double v, int digits = 1) {
  if (v == 0.0 || !std::isfinite(v)) return v == 0.0 ? "0" : std::to_string(v);
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(v))));
  const double scale = std::pow(10.0, digits - 1 - exponent);
  const double rounded = std::round(v * scale) / scale;
  std::ostringstream out;
  out.precision(std::max(0, digits - 1 - exponent));
  out << std::fixed << rounded;
  return out.str();
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"mae_mm", m.mae_mm}, {"rmse_mm", m.rmse_mm}, {"max_mm", m.max_mm}, {"n", m.n}};
}

}  // namespace rtsim::evalkit
