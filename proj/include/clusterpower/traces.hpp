#pragma once

// Fuel-gauge trace reduction.
//
// A measurement protocol runs four labelled phases per cluster (idle/stress at
// f_min and f_max). Each phase is averaged over its in-band samples, repeats
// are combined, and dynamic power is load minus idle. Two activation
// strategies are supported:
//
//   per_cluster  P_dyn = P_load - P_idle with the whole cluster online
//   single       P_core(k) = [P_load(k) + P_idle(k0)] - P_idle(k0 + k),
//                P_dyn = sum over k != k0 of P_core(k)
//
// where k0 is the housekeeping core that stays online for system tasks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clusterpower/error.hpp"

namespace clusterpower {

struct PowerSample {
  double t = 0.0;        // s since trace start
  double v_batt = 0.0;   // V
  double i_batt = 0.0;   // A, discharge positive after normalisation
  double freq_hz = 0.0;
  double util_pct = 0.0;
  double temp_c = 0.0;
};

enum class Phase { idle_min, stress_min, idle_max, stress_max };
enum class Corner { min, max };
enum class Strategy { per_cluster, single };
enum class CurrentConvention { discharge_positive, discharge_negative };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::idle_min: return "idle_min";
    case Phase::stress_min: return "stress_min";
    case Phase::idle_max: return "idle_max";
    case Phase::stress_max: return "stress_max";
  }
  return "?";
}

constexpr std::string_view to_string(Strategy s) {
  return s == Strategy::per_cluster ? "per_cluster" : "single";
}

constexpr std::string_view to_string(CurrentConvention c) {
  return c == CurrentConvention::discharge_positive ? "discharge_positive" : "discharge_negative";
}

constexpr std::string_view to_string(Corner c) { return c == Corner::min ? "min" : "max"; }

inline Phase parse_phase(std::string_view s) {
  if (s == "idle_min") return Phase::idle_min;
  if (s == "stress_min") return Phase::stress_min;
  if (s == "idle_max") return Phase::idle_max;
  if (s == "stress_max") return Phase::stress_max;
  throw Error(ErrorKind::input_format, "unknown phase '" + std::string(s) + "'");
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "per_cluster" || s == "per-cluster") return Strategy::per_cluster;
  if (s == "single") return Strategy::single;
  throw Error(ErrorKind::input_format, "unknown strategy '" + std::string(s) + "'");
}

constexpr bool is_idle(Phase p) { return p == Phase::idle_min || p == Phase::idle_max; }
constexpr Corner corner_of(Phase p) {
  return (p == Phase::idle_min || p == Phase::stress_min) ? Corner::min : Corner::max;
}
constexpr Phase idle_phase(Corner c) { return c == Corner::min ? Phase::idle_min : Phase::idle_max; }
constexpr Phase stress_phase(Corner c) {
  return c == Corner::min ? Phase::stress_min : Phase::stress_max;
}

/// One labelled row of a protocol trace.
struct TraceRow {
  PowerSample sample;
  Phase phase = Phase::idle_min;
  std::string cluster;
  std::vector<int> active_cores;  // sorted
};

struct TempBand {
  double low_c = 28.0;
  double high_c = 32.0;

  bool contains(double t) const { return t >= low_c && t <= high_c; }
};

/// Detects the raw sign convention from the median current and flips rows so
/// that discharge is positive. Returns the convention the input used.
inline CurrentConvention normalize_current_sign(std::vector<TraceRow>& rows) {
  if (rows.empty()) return CurrentConvention::discharge_positive;
  std::vector<double> currents;
  currents.reserve(rows.size());
  for (const auto& r : rows) currents.push_back(r.sample.i_batt);
  auto mid = currents.begin() + static_cast<std::ptrdiff_t>(currents.size() / 2);
  std::nth_element(currents.begin(), mid, currents.end());
  if (*mid >= 0.0) return CurrentConvention::discharge_positive;
  for (auto& r : rows) r.sample.i_batt = -r.sample.i_batt;
  return CurrentConvention::discharge_negative;
}

/// P_batt = V_batt * |I_batt|.
inline double battery_power(const PowerSample& s) {
  if (!(s.v_batt > 0.0) || !std::isfinite(s.v_batt))
    throw DomainError("v_batt", "must be strictly positive");
  return s.v_batt * std::abs(s.i_batt);
}

struct PhaseStats {
  double mean_w = 0.0;
  double std_w = 0.0;  // population
  std::size_t n_samples = 0;
  std::size_t n_rejected = 0;
};

/// Mean and population standard deviation of battery power over in-band
/// samples. Accumulates around the first accepted value so constant input
/// gives an exact mean.
inline PhaseStats phase_average(std::span<const PowerSample> samples, TempBand band = {}) {
  if (samples.empty()) throw Error(ErrorKind::empty_phase, "phase has no samples");
  PhaseStats st;
  std::optional<double> shift;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& s : samples) {
    if (!band.contains(s.temp_c)) {
      ++st.n_rejected;
      continue;
    }
    const double p = battery_power(s);
    if (!shift) shift = p;
    const double d = p - *shift;
    sum += d;
    sum_sq += d * d;
    ++st.n_samples;
  }
  if (st.n_samples == 0)
    throw Error(ErrorKind::empty_phase, "all " + std::to_string(st.n_rejected) +
                                            " samples rejected by the thermal filter");
  const double n = static_cast<double>(st.n_samples);
  const double m = sum / n;
  st.mean_w = *shift + m;
  st.std_w = std::sqrt(std::max(0.0, sum_sq / n - m * m));
  return st;
}

struct PhaseMeasurement {
  Phase phase = Phase::idle_min;
  std::string cluster;
  std::vector<int> active_cores;
  double freq_hz = 0.0;
  double mean_power_w = 0.0;  // mean of repeat means
  double std_power_w = 0.0;   // population std over all accepted samples
  double repeat_std_w = 0.0;  // sample std across repeat means; 0 for one repeat
  std::size_t n_samples = 0;
  std::size_t n_repeats = 0;
  std::size_t n_rejected_thermal = 0;
};

/// Combines repeated runs of one phase. Repeats whose samples all fall out of
/// band are dropped; if every repeat is dropped the phase is empty.
inline PhaseMeasurement measure_phase(Phase phase, std::string cluster, std::vector<int> active_cores,
                                      std::span<const std::vector<PowerSample>> repeats,
                                      TempBand band = {}) {
  PhaseMeasurement m;
  m.phase = phase;
  m.cluster = std::move(cluster);
  m.active_cores = std::move(active_cores);

  std::vector<double> means;
  std::vector<PowerSample> accepted;
  for (const auto& rep : repeats) {
    for (const auto& s : rep) {
      if (band.contains(s.temp_c)) {
        accepted.push_back(s);
      } else {
        ++m.n_rejected_thermal;
      }
    }
    if (rep.empty()) continue;
    const bool any_in_band =
        std::any_of(rep.begin(), rep.end(), [&](const PowerSample& s) { return band.contains(s.temp_c); });
    if (!any_in_band) continue;
    means.push_back(phase_average(rep, band).mean_w);
  }
  if (means.empty()) {
    throw Error(ErrorKind::empty_phase, "cluster " + m.cluster + " phase " +
                                            std::string(to_string(phase)) +
                                            ": no samples inside the temperature band");
  }

  const auto pooled = phase_average(accepted, band);
  m.freq_hz = accepted.front().freq_hz;
  m.n_samples = pooled.n_samples;
  m.std_power_w = pooled.std_w;
  m.n_repeats = means.size();

  double sum = 0.0;
  for (double x : means) sum += x;
  m.mean_power_w = sum / static_cast<double>(means.size());
  if (means.size() > 1) {
    double ss = 0.0;
    for (double x : means) ss += (x - m.mean_power_w) * (x - m.mean_power_w);
    m.repeat_std_w = std::sqrt(ss / static_cast<double>(means.size() - 1));
  }
  return m;
}

struct DynamicPower {
  double watts = 0.0;
  bool negative = false;  // noisy input, reported rather than clamped
};

inline DynamicPower dynamic_power(double p_load, double p_idle) {
  if (!(p_load >= 0.0)) throw DomainError("p_load", "must be >= 0");
  if (!(p_idle >= 0.0)) throw DomainError("p_idle", "must be >= 0");
  const double d = p_load - p_idle;
  return {d, d < 0.0};
}

struct CorePower {
  int core_id = 0;
  double watts = 0.0;
};

struct ClusterDynResult {
  std::string cluster;
  double freq_hz = 0.0;
  double p_dyn_w = 0.0;
  Strategy strategy = Strategy::per_cluster;
  std::optional<std::vector<CorePower>> per_core_w;  // single strategy only
  bool negative_warning = false;
};

/// Per-cluster activation: load minus idle for the same cluster and frequency.
inline ClusterDynResult per_cluster_reduce(const PhaseMeasurement& idle, const PhaseMeasurement& load,
                                           std::optional<int> housekeeping_core = 0) {
  if (idle.cluster != load.cluster)
    throw Error(ErrorKind::pairing, "idle phase of cluster " + idle.cluster +
                                        " paired with load phase of cluster " + load.cluster);
  if (idle.freq_hz != load.freq_hz)
    throw Error(ErrorKind::pairing, "cluster " + idle.cluster + ": idle at " +
                                        std::to_string(idle.freq_hz) + " Hz, load at " +
                                        std::to_string(load.freq_hz) + " Hz");
  if (!is_idle(idle.phase) || is_idle(load.phase) || corner_of(idle.phase) != corner_of(load.phase))
    throw Error(ErrorKind::pairing, "cluster " + idle.cluster + ": cannot pair phase " +
                                        std::string(to_string(idle.phase)) + " with " +
                                        std::string(to_string(load.phase)));
  if (housekeeping_core &&
      std::find(load.active_cores.begin(), load.active_cores.end(), *housekeeping_core) !=
          load.active_cores.end())
    throw Error(ErrorKind::pairing, "cluster " + load.cluster +
                                        ": load phase stresses the housekeeping core " +
                                        std::to_string(*housekeeping_core));

  const auto d = dynamic_power(load.mean_power_w, idle.mean_power_w);
  ClusterDynResult r;
  r.cluster = idle.cluster;
  r.freq_hz = idle.freq_hz;
  r.p_dyn_w = d.watts;
  r.strategy = Strategy::per_cluster;
  r.negative_warning = d.negative;
  return r;
}

/// Phase averages for one non-housekeeping core under single activation.
struct SingleCorePhases {
  int core_id = 0;
  double p_idle_k0k_w = 0.0;  // housekeeping core + core k online, idle
  double p_load_k_w = 0.0;    // core k fully loaded
};

/// Single activation: sums per-core contributions. The cluster total is the
/// plain sum of the per-core entries.
inline ClusterDynResult single_reduce(std::string cluster, double freq_hz,
                                      std::span<const SingleCorePhases> core_phases, double p_idle_k0,
                                      std::optional<int> housekeeping_core = 0) {
  if (core_phases.empty()) throw DomainError("core_phases", "must not be empty");
  std::set<int> seen;
  for (const auto& c : core_phases) {
    if (!seen.insert(c.core_id).second)
      throw DomainError("core_phases", "duplicate core id " + std::to_string(c.core_id));
    if (housekeeping_core && c.core_id == *housekeeping_core)
      throw DomainError("core_phases", "housekeeping core " + std::to_string(c.core_id) +
                                           " cannot be measured under single activation");
  }

  ClusterDynResult r;
  r.cluster = std::move(cluster);
  r.freq_hz = freq_hz;
  r.strategy = Strategy::single;
  std::vector<CorePower> cores;
  double total = 0.0;
  for (const auto& c : core_phases) {
    const double p_core = (c.p_load_k_w + p_idle_k0) - c.p_idle_k0k_w;
    cores.push_back({c.core_id, p_core});
    total += p_core;
  }
  r.p_dyn_w = total;
  r.negative_warning = total < 0.0;
  r.per_core_w = std::move(cores);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic traces

struct SynthOptions {
  double noise_sigma_w = 0.0;
  double duration_s = 600.0;
  double cadence_s = 0.5;
  double v_batt = 4.0;  // power of two keeps P -> I -> P exact
  double temp_c = 30.0;
  double freq_hz = 1.0e9;
};

namespace detail {

inline void check_timing(double duration_s, double cadence_s) {
  if (!(cadence_s > 0.0) || !std::isfinite(cadence_s))
    throw Error(ErrorKind::input_format, "cadence_s must be > 0");
  if (!(duration_s >= cadence_s) || !std::isfinite(duration_s))
    throw Error(ErrorKind::input_format, "duration_s must be >= cadence_s");
}

inline std::size_t sample_count(double duration_s, double cadence_s) {
  return static_cast<std::size_t>(std::floor(duration_s / cadence_s + 1e-9));
}

}  // namespace detail

/// Appends a constant-level phase with i.i.d. Gaussian power noise.
inline void append_phase(std::vector<PowerSample>& out, double level_w, double util_pct, double t0,
                         const SynthOptions& opt, std::mt19937_64& rng) {
  detail::check_timing(opt.duration_s, opt.cadence_s);
  std::normal_distribution<double> noise(0.0, opt.noise_sigma_w > 0.0 ? opt.noise_sigma_w : 1.0);
  const std::size_t n = detail::sample_count(opt.duration_s, opt.cadence_s);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = level_w + (opt.noise_sigma_w > 0.0 ? noise(rng) : 0.0);
    PowerSample s;
    s.t = t0 + static_cast<double>(k) * opt.cadence_s;
    s.v_batt = opt.v_batt;
    s.i_batt = p / opt.v_batt;
    s.freq_hz = opt.freq_hz;
    s.util_pct = util_pct;
    s.temp_c = opt.temp_c;
    out.push_back(s);
  }
}

struct GroundTruth {
  double p_idle_w = 0.0;
  double p_dyn_w = 0.0;
};

struct SynthTrace {
  std::vector<PowerSample> idle;
  std::vector<PowerSample> load;
};

/// An idle phase at P_idle followed by a load phase at P_idle + P_dyn.
inline SynthTrace synth_trace(GroundTruth truth, double noise_sigma_w, double duration_s,
                              double cadence_s, std::uint64_t seed) {
  detail::check_timing(duration_s, cadence_s);
  if (!(noise_sigma_w >= 0.0)) throw Error(ErrorKind::input_format, "noise_sigma_w must be >= 0");
  SynthOptions opt;
  opt.noise_sigma_w = noise_sigma_w;
  opt.duration_s = duration_s;
  opt.cadence_s = cadence_s;
  std::mt19937_64 rng(seed);
  SynthTrace tr;
  append_phase(tr.idle, truth.p_idle_w, 0.0, 0.0, opt, rng);
  append_phase(tr.load, truth.p_idle_w + truth.p_dyn_w, 100.0, duration_s, opt, rng);
  return tr;
}

}  // namespace clusterpower
