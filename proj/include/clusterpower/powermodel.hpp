#pragma once

// Dynamic-power models for one CPU cluster.
//
//   analytical:   P = C_eff * V^2 * f
//   approximate:  P = eps * f^3          (assumes V proportional to f)
//
// Both models are fitted from two full-load operating corners (f_min, f_max)
// and compared against measurements with a signed relative error. All values
// are SI scalars: watts, volts, hertz, farads, W/Hz^3.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clusterpower/error.hpp"

namespace clusterpower {

enum class ModelKind { analytical, approximate };

constexpr std::string_view to_string(ModelKind k) {
  return k == ModelKind::analytical ? "analytical" : "approximate";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "analytical") return ModelKind::analytical;
  if (s == "approximate") return ModelKind::approximate;
  throw Error(ErrorKind::input_format, "unknown model kind '" + std::string(s) + "'");
}

namespace detail {

inline void require_positive(double value, const char* name) {
  if (!std::isfinite(value)) throw DomainError(name, "must be finite");
  if (value <= 0.0) throw DomainError(name, "must be strictly positive");
}

}  // namespace detail

/// One voltage/frequency domain. Only the two characterised corners are
/// known; anything in between is interpolated.
struct ClusterSpec {
  std::string name;
  std::vector<int> core_ids;
  double f_min = 0.0;
  double f_max = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;

  /// Throws DomainError when an invariant is broken.
  void validate() const {
    detail::require_positive(f_min, "f_min");
    detail::require_positive(f_max, "f_max");
    detail::require_positive(v_min, "v_min");
    detail::require_positive(v_max, "v_max");
    if (f_max < f_min) throw DomainError("f_max", "must be >= f_min");
    if (v_max < v_min) throw DomainError("v_max", "must be >= v_min");
    if (core_ids.empty()) throw DomainError("core_ids", "must not be empty");
    std::vector<int> sorted = core_ids;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0) throw DomainError("core_ids", "must be non-negative");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw DomainError("core_ids", "contains duplicates");
  }
};

struct FittedParams {
  double c_eff_at_fmin = 0.0;
  double c_eff_at_fmax = 0.0;
  double c_eff_mean = 0.0;
  double epsilon_at_fmin = 0.0;
  double epsilon_at_fmax = 0.0;
  double epsilon_mean = 0.0;
};

struct PowerPrediction {
  double predicted_w = 0.0;
  ModelKind model_kind = ModelKind::analytical;
  double frequency_hz = 0.0;
  std::optional<double> voltage_v;   // analytical only
  bool voltage_interpolated = false; // f was not one of the two corners
};

/// Full-load dynamic power at one operating point, the input to fitting.
struct CornerMeasurement {
  double freq_hz = 0.0;
  double voltage_v = 0.0;
  double p_dyn_w = 0.0;
};

inline double predict_analytical(double c_eff, double v, double f) {
  detail::require_positive(c_eff, "c_eff");
  detail::require_positive(v, "v");
  detail::require_positive(f, "f");
  return c_eff * v * v * f;
}

inline double predict_approximate(double epsilon, double f) {
  detail::require_positive(epsilon, "epsilon");
  detail::require_positive(f, "f");
  return epsilon * f * f * f;
}

inline double fit_ceff(double p_dyn, double f, double v) {
  detail::require_positive(p_dyn, "p_dyn");
  detail::require_positive(f, "f");
  detail::require_positive(v, "v");
  return p_dyn / (f * v * v);
}

inline double fit_epsilon(double p_dyn, double f) {
  detail::require_positive(p_dyn, "p_dyn");
  detail::require_positive(f, "f");
  return p_dyn / (f * f * f);
}

inline double mean_epsilon(double eps_min, double eps_max) {
  detail::require_positive(eps_min, "eps_min");
  detail::require_positive(eps_max, "eps_max");
  return (eps_min + eps_max) / 2.0;
}

/// Signed error in percent; negative means the model under-predicts.
inline double relative_error(double p_hat, double p_measured) {
  if (!std::isfinite(p_measured) || p_measured <= 0.0)
    throw DomainError("p_measured", "must be strictly positive");
  if (!std::isfinite(p_hat)) throw DomainError("p_hat", "must be finite");
  return (p_hat - p_measured) / p_measured * 100.0;
}

inline double total_cpu_power(std::span<const double> cluster_powers) {
  for (double p : cluster_powers) {
    if (!std::isfinite(p) || p < 0.0)
      throw DomainError("cluster_powers", "entries must be finite and >= 0");
  }
  return std::accumulate(cluster_powers.begin(), cluster_powers.end(), 0.0);
}

/// Linear interpolation between (f_min, v_min) and (f_max, v_max). Exact at
/// both endpoints.
inline double interpolate_voltage(const ClusterSpec& spec, double f) {
  if (!std::isfinite(f) || f < spec.f_min || f > spec.f_max) {
    throw Error(ErrorKind::range, "frequency " + std::to_string(f) +
                                      " Hz outside [" + std::to_string(spec.f_min) +
                                      ", " + std::to_string(spec.f_max) + "] for cluster " +
                                      spec.name);
  }
  if (f == spec.f_min) return spec.v_min;
  if (f == spec.f_max) return spec.v_max;
  const double t = (f - spec.f_min) / (spec.f_max - spec.f_min);
  return spec.v_min + t * (spec.v_max - spec.v_min);
}

inline bool is_corner_frequency(const ClusterSpec& spec, double f) {
  return f == spec.f_min || f == spec.f_max;
}

/// Fits both models from two corners. The corners may be given in either
/// order; the lower frequency becomes the f_min corner.
inline FittedParams fit_profile(CornerMeasurement a, CornerMeasurement b) {
  if (a.freq_hz == b.freq_hz)
    throw DomainError("corner_measurements", "the two corners share a frequency");
  if (a.freq_hz > b.freq_hz) std::swap(a, b);

  FittedParams p;
  p.c_eff_at_fmin = fit_ceff(a.p_dyn_w, a.freq_hz, a.voltage_v);
  p.c_eff_at_fmax = fit_ceff(b.p_dyn_w, b.freq_hz, b.voltage_v);
  p.c_eff_mean = (p.c_eff_at_fmin + p.c_eff_at_fmax) / 2.0;
  p.epsilon_at_fmin = fit_epsilon(a.p_dyn_w, a.freq_hz);
  p.epsilon_at_fmax = fit_epsilon(b.p_dyn_w, b.freq_hz);
  p.epsilon_mean = mean_epsilon(p.epsilon_at_fmin, p.epsilon_at_fmax);
  return p;
}

/// Which fitted constant to use when predicting.
enum class ParamChoice {
  mean,         // representative value, the normal case
  corner_local  // the constant fitted at the matching corner (f_min/f_max only)
};

/// Predicts cluster dynamic power at `f` using the fitted parameters and the
/// (possibly interpolated) supply voltage.
inline PowerPrediction predict(const ClusterSpec& spec, const FittedParams& params,
                               ModelKind kind, double f,
                               ParamChoice choice = ParamChoice::mean) {
  const double v = interpolate_voltage(spec, f);
  PowerPrediction out;
  out.model_kind = kind;
  out.frequency_hz = f;

  double c_eff = params.c_eff_mean;
  double eps = params.epsilon_mean;
  if (choice == ParamChoice::corner_local) {
    if (f == spec.f_min) {
      c_eff = params.c_eff_at_fmin;
      eps = params.epsilon_at_fmin;
    } else if (f == spec.f_max) {
      c_eff = params.c_eff_at_fmax;
      eps = params.epsilon_at_fmax;
    } else {
      throw Error(ErrorKind::range, "corner-local parameters need f == f_min or f == f_max");
    }
  }

  if (kind == ModelKind::analytical) {
    out.predicted_w = predict_analytical(c_eff, v, f);
    out.voltage_v = v;
    out.voltage_interpolated = !is_corner_frequency(spec, f);
  } else {
    out.predicted_w = predict_approximate(eps, f);
  }
  return out;
}

}  // namespace clusterpower
