#pragma once

// Rail-to-cluster mapping from regulator voltage logs.
//
// Clusters are activated one at a time following a schedule. For every
// (cluster, rail) pair the mean voltage rise of the rail inside the cluster's
// windows, relative to a baseline just before each window, is computed; each
// cluster is assigned the rail with the largest rise. The voltage range is
// then the median plateau of that rail inside the f_min and f_max windows.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clusterpower/csv.hpp"
#include "clusterpower/error.hpp"
#include "clusterpower/powermodel.hpp"
#include "clusterpower/profile.hpp"

namespace clusterpower {

struct RailSample {
  double t = 0.0;
  std::string rail_id;
  double voltage_v = 0.0;
};

struct ActivationWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string cluster;
  double freq_hz = 0.0;
};

struct ActivationSchedule {
  std::vector<ActivationWindow> entries;

  /// Sorts by start time and rejects empty or overlapping windows.
  void validate() {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& w = entries[i];
      if (!(w.t_end > w.t_start))
        throw Error(ErrorKind::input_format, "schedule window for " + w.cluster + " has t_end <= t_start");
      if (i > 0 && w.t_start < entries[i - 1].t_end)
        throw Error(ErrorKind::input_format, "schedule windows overlap at t=" + csv::format_double(w.t_start));
    }
  }
};

struct VoltageRange {
  double v_min = 0.0;
  double v_max = 0.0;
};

struct RailMapping {
  std::map<std::string, std::string> assignments;  // cluster -> rail
  std::map<std::string, VoltageRange> ranges;      // cluster -> (v_min, v_max)
};

struct RailMapOptions {
  double spike_threshold_v = 0.030;
  double settle_fraction = 0.10;  // trimmed from each end of a window
  double baseline_cap_s = 30.0;
};

namespace detail {

using RailSeries = std::vector<std::pair<double, double>>;  // (t, V), time-ordered

inline std::map<std::string, RailSeries> split_rails(const std::vector<RailSample>& log) {
  std::map<std::string, RailSeries> rails;
  for (const auto& s : log) {
    if (!(s.voltage_v >= 0.0))
      throw Error(ErrorKind::input_format, "rail " + s.rail_id + ": negative voltage");
    auto& series = rails[s.rail_id];
    if (!series.empty() && s.t < series.back().first)
      throw Error(ErrorKind::input_format, "rail " + s.rail_id + ": time stamps must be non-decreasing");
    series.emplace_back(s.t, s.voltage_v);
  }
  return rails;
}

inline std::vector<double> values_in(const RailSeries& series, double lo, double hi, bool hi_inclusive) {
  std::vector<double> out;
  auto it = std::lower_bound(series.begin(), series.end(), lo,
                             [](const auto& p, double t) { return p.first < t; });
  for (; it != series.end(); ++it) {
    if (it->first > hi || (!hi_inclusive && it->first == hi)) break;
    out.push_back(it->second);
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval interior(const ActivationWindow& w, double settle_fraction) {
  const double d = w.t_end - w.t_start;
  return {w.t_start + settle_fraction * d, w.t_end - settle_fraction * d};
}

/// Gap before the window, as long as the window, capped, never reaching back
/// into the previous window.
inline Interval baseline(const ActivationSchedule& s, std::size_t i, double cap_s) {
  const auto& w = s.entries[i];
  double len = std::min(w.t_end - w.t_start, cap_s);
  if (i > 0) len = std::min(len, w.t_start - s.entries[i - 1].t_end);
  return {w.t_start - len, w.t_start};
}

inline std::string window_name(const ActivationWindow& w) {
  return "window [" + csv::format_double(w.t_start) + ", " + csv::format_double(w.t_end) + "] (" +
         w.cluster + " @ " + csv::format_double(w.freq_hz) + " Hz)";
}

}  // namespace detail

/// Mean in-window rise of every rail for every cluster; exposed for
/// diagnostics and used by detect_activations.
inline std::map<std::string, std::map<std::string, double>> rail_rise_scores(
    const std::vector<RailSample>& log, ActivationSchedule schedule, const RailMapOptions& opt = {}) {
  schedule.validate();
  const auto rails = detail::split_rails(log);
  std::map<std::string, std::map<std::string, double>> sum;
  std::map<std::string, int> count;
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const auto& w = schedule.entries[i];
    const auto in = detail::interior(w, opt.settle_fraction);
    const auto base = detail::baseline(schedule, i, opt.baseline_cap_s);
    if (!(base.hi > base.lo))
      throw Error(ErrorKind::missing_data, detail::window_name(w) + " has no baseline gap before it");
    ++count[w.cluster];
    for (const auto& [rail, series] : rails) {
      const auto vin = detail::values_in(series, in.lo, in.hi, true);
      const auto vbase = detail::values_in(series, base.lo, base.hi, false);
      if (vin.empty() || vbase.empty())
        throw Error(ErrorKind::missing_data,
                    "rail " + rail + " has no samples in " + detail::window_name(w) +
                        (vin.empty() ? "" : " baseline"));
      sum[w.cluster][rail] += detail::mean_of(vin) - detail::mean_of(vbase);
    }
  }
  for (auto& [cluster, per_rail] : sum)
    for (auto& [rail, s] : per_rail) s /= count[cluster];
  return sum;
}

inline RailMapping detect_activations(const std::vector<RailSample>& log, const ActivationSchedule& schedule,
                                      const RailMapOptions& opt = {}) {
  if (log.empty()) throw Error(ErrorKind::missing_data, "regulator log is empty");
  const auto scores = rail_rise_scores(log, schedule, opt);
  RailMapping m;
  std::map<std::string, std::string> claimed;  // rail -> cluster
  for (const auto& [cluster, per_rail] : scores) {
    std::string best;
    double best_rise = -INFINITY;
    bool tie = false;
    for (const auto& [rail, rise] : per_rail) {
      if (rise > best_rise) {
        best = rail;
        best_rise = rise;
        tie = false;
      } else if (rise == best_rise) {
        tie = true;
      }
    }
    if (!(best_rise > opt.spike_threshold_v))
      throw Error(ErrorKind::unmapped_cluster,
                  "cluster " + cluster + ": no rail rises more than " +
                      csv::format_double(opt.spike_threshold_v) + " V (best " +
                      csv::format_double(best_rise) + " V)");
    if (tie)
      throw Error(ErrorKind::rail_conflict, "cluster " + cluster + ": several rails rise equally");
    if (auto it = claimed.find(best); it != claimed.end())
      throw Error(ErrorKind::rail_conflict,
                  "rail " + best + " best matches both " + it->second + " and " + cluster);
    claimed[best] = cluster;
    m.assignments[cluster] = best;
  }
  return m;
}

/// Median plateau of the cluster's rail in its f_min and f_max windows.
/// Without `spec`, the lowest and highest scheduled frequencies are used.
inline VoltageRange extract_voltage_range(const std::vector<RailSample>& log, const RailMapping& mapping,
                                          const std::string& cluster, ActivationSchedule schedule,
                                          const RailMapOptions& opt = {},
                                          const std::optional<ClusterSpec>& spec = std::nullopt) {
  schedule.validate();
  const auto it = mapping.assignments.find(cluster);
  if (it == mapping.assignments.end())
    throw Error(ErrorKind::unmapped_cluster, "cluster " + cluster + " has no rail assignment");
  const auto rails = detail::split_rails(log);
  const auto rail = rails.find(it->second);
  if (rail == rails.end())
    throw Error(ErrorKind::missing_data, "rail " + it->second + " does not appear in the log");

  std::vector<const ActivationWindow*> windows;
  for (const auto& w : schedule.entries)
    if (w.cluster == cluster) windows.push_back(&w);
  if (windows.empty())
    throw Error(ErrorKind::incomplete_schedule, "cluster " + cluster + " has no scheduled windows");

  double f_lo = INFINITY;
  double f_hi = -INFINITY;
  for (const auto* w : windows) {
    f_lo = std::min(f_lo, w->freq_hz);
    f_hi = std::max(f_hi, w->freq_hz);
  }
  if (spec) {
    f_lo = spec->f_min;
    f_hi = spec->f_max;
  }

  auto plateau = [&](double f, const char* which) {
    std::vector<double> values;
    bool found = false;
    for (const auto* w : windows) {
      if (w->freq_hz != f) continue;
      found = true;
      const auto in = detail::interior(*w, opt.settle_fraction);
      const auto v = detail::values_in(rail->second, in.lo, in.hi, true);
      values.insert(values.end(), v.begin(), v.end());
    }
    if (!found)
      throw Error(ErrorKind::incomplete_schedule, "cluster " + cluster + ": no " + which +
                                                       " window at " + csv::format_double(f) + " Hz");
    if (values.empty())
      throw Error(ErrorKind::missing_data, "cluster " + cluster + ": rail " + it->second +
                                               " has no samples in the " + which + " windows");
    return detail::median_of(std::move(values));
  };

  if (!spec && !(f_hi > f_lo))
    throw Error(ErrorKind::incomplete_schedule,
                "cluster " + cluster + ": schedule needs windows at two distinct frequencies");
  return {plateau(f_lo, "f_min"), plateau(f_hi, "f_max")};
}

/// Detection followed by range extraction for every mapped cluster.
inline RailMapping map_rails(const std::vector<RailSample>& log, const ActivationSchedule& schedule,
                             const RailMapOptions& opt = {}, const DeviceProfile* profile = nullptr) {
  auto m = detect_activations(log, schedule, opt);
  for (const auto& [cluster, rail] : m.assignments) {
    std::optional<ClusterSpec> spec;
    if (profile) {
      if (const auto* c = profile->find(cluster)) spec = c->spec;
    }
    m.ranges[cluster] = extract_voltage_range(log, m, cluster, schedule, opt, spec);
  }
  return m;
}

/// Writes rail ids and measured (v_min, v_max) into matching profile clusters.
inline void merge_into_profile(DeviceProfile& profile, const RailMapping& m) {
  for (const auto& [cluster, rail] : m.assignments) {
    auto* c = profile.find(cluster);
    if (!c) throw Error(ErrorKind::missing_data, "profile has no cluster " + cluster);
    c->rail_id = rail;
    if (auto r = m.ranges.find(cluster); r != m.ranges.end()) {
      c->spec.v_min = r->second.v_min;
      c->spec.v_max = r->second.v_max;
    }
  }
}

// ---------------------------------------------------------------------------
// I/O

inline std::vector<RailSample> read_rail_log(const csv::Table& t) {
  t.require_columns({"t_s", "rail_id", "voltage_v"});
  std::vector<RailSample> out;
  out.reserve(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    RailSample s{t.number(r, "t_s"), t.cell(r, "rail_id"), t.number(r, "voltage_v")};
    if (s.rail_id.empty())
      throw Error(ErrorKind::input_format, csv::row_context(t.line_number(r)) + "empty rail_id");
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_rail_log(std::ostream& out, const std::vector<RailSample>& log) {
  out << "t_s,rail_id,voltage_v\n";
  for (const auto& s : log)
    out << csv::format_double(s.t) << ',' << s.rail_id << ',' << csv::format_double(s.voltage_v) << '\n';
}

inline ActivationSchedule schedule_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::input_format, "schedule must be a JSON array");
  ActivationSchedule s;
  for (const auto& e : j) {
    ActivationWindow w;
    w.t_start = detail::json_field<double>(e, "t_start_s", "schedule entry");
    w.t_end = detail::json_field<double>(e, "t_end_s", "schedule entry");
    w.cluster = detail::json_field<std::string>(e, "cluster", "schedule entry");
    w.freq_hz = detail::json_field<double>(e, "freq_hz", "schedule entry");
    s.entries.push_back(std::move(w));
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const ActivationSchedule& s) {
  auto j = nlohmann::json::array();
  for (const auto& w : s.entries)
    j.push_back({{"t_start_s", w.t_start}, {"t_end_s", w.t_end}, {"cluster", w.cluster}, {"freq_hz", w.freq_hz}});
  return j;
}

inline nlohmann::json to_json(const RailMapping& m) {
  nlohmann::json j{{"assignments", nlohmann::json::object()}, {"ranges", nlohmann::json::object()}};
  for (const auto& [c, r] : m.assignments) j["assignments"][c] = r;
  for (const auto& [c, r] : m.ranges) j["ranges"][c] = {{"v_min", r.v_min}, {"v_max", r.v_max}};
  return j;
}

// ---------------------------------------------------------------------------
// Synthetic logs

/// One regulator output. `cluster` empty means the rail never reacts to the
/// schedule (an unrelated supply).
struct RailTruth {
  std::string rail_id;
  std::string cluster;
  double idle_v = 0.0;
  double v_at_fmin = 0.0;
  double v_at_fmax = 0.0;
};

struct SynthRailOptions {
  double window_s = 60.0;
  double gap_s = 60.0;
  double cadence_s = 0.5;
  double noise_v = 0.0;          // uniform in [-noise_v, +noise_v]
  double ramp_fraction = 0.05;   // regulator transition at each window edge
  std::uint64_t seed = 0;
};

struct SynthRailLog {
  std::vector<RailSample> log;
  ActivationSchedule schedule;
};

/// Schedules every cluster at its f_min then f_max, separated by idle gaps,
/// and records each rail at a fixed cadence.
inline SynthRailLog synth_rail_log(const std::vector<ClusterSpec>& clusters, const std::vector<RailTruth>& rails,
                                   const SynthRailOptions& opt) {
  if (!(opt.cadence_s > 0.0) || !(opt.window_s > 0.0) || !(opt.gap_s > 0.0))
    throw Error(ErrorKind::input_format, "window, gap and cadence must be > 0");
  SynthRailLog out;
  double t = opt.gap_s;
  for (const auto& c : clusters) {
    for (double f : {c.f_min, c.f_max}) {
      out.schedule.entries.push_back({t, t + opt.window_s, c.name, f});
      t += opt.window_s + opt.gap_s;
    }
  }
  const double t_end = t;
  out.schedule.validate();

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  const auto n = static_cast<std::size_t>(std::floor(t_end / opt.cadence_s + 1e-9)) + 1;
  const double ramp = opt.ramp_fraction * opt.window_s;

  for (std::size_t k = 0; k < n; ++k) {
    const double ts = static_cast<double>(k) * opt.cadence_s;
    const ActivationWindow* active = nullptr;
    for (const auto& w : out.schedule.entries)
      if (ts >= w.t_start && ts < w.t_end) active = &w;
    for (const auto& r : rails) {
      double v = r.idle_v;
      if (active && active->cluster == r.cluster) {
        const ClusterSpec* spec = nullptr;
        for (const auto& c : clusters)
          if (c.name == r.cluster) spec = &c;
        const double plateau = (spec && active->freq_hz == spec->f_min) ? r.v_at_fmin : r.v_at_fmax;
        const double since = ts - active->t_start;
        const double until = active->t_end - ts;
        double frac = 1.0;
        if (ramp > 0.0) frac = std::min({1.0, since / ramp, until / ramp});
        v = r.idle_v + frac * (plateau - r.idle_v);
      }
      if (opt.noise_v > 0.0) v += opt.noise_v * noise(rng);
      out.log.push_back({ts, r.rail_id, v});
    }
  }
  return out;
}

}  // namespace clusterpower
