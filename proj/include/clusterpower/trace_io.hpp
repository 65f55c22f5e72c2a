#pragma once

// Protocol traces on disk and the reduction pipeline on top of them.
//
// CSV header: t_s,v_batt_v,i_batt_a,freq_hz,util_pct,temp_c,phase,cluster,active_cores
// `active_cores` is a '|'-separated core list.
//
// A repeat is a maximal run of consecutive rows sharing (phase, cluster,
// active_cores). Under single activation the `active_cores` set tells the
// phases apart:
//   idle  {k0}     -> P_idle(k0)
//   idle  {k0, k}  -> P_idle(k0 + k)
//   stress {k}     -> P_load(k)

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "clusterpower/csv.hpp"
#include "clusterpower/traces.hpp"

namespace clusterpower {

inline constexpr const char* kTraceHeader =
    "t_s,v_batt_v,i_batt_a,freq_hz,util_pct,temp_c,phase,cluster,active_cores";

inline std::vector<int> parse_core_list(std::string_view s, std::size_t row) {
  std::vector<int> cores;
  if (csv::trim(s).empty()) return cores;
  for (auto f : csv::split(s, '|')) {
    const auto v = csv::parse_int(f, row, "active_cores");
    if (v < 0) throw Error(ErrorKind::input_format, csv::row_context(row) + "negative core id");
    cores.push_back(static_cast<int>(v));
  }
  std::sort(cores.begin(), cores.end());
  if (std::adjacent_find(cores.begin(), cores.end()) != cores.end())
    throw Error(ErrorKind::input_format, csv::row_context(row) + "duplicate core id in active_cores");
  return cores;
}

inline std::string format_core_list(const std::vector<int>& cores) {
  std::string out;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(cores[i]);
  }
  return out;
}

inline std::vector<TraceRow> read_trace(const csv::Table& t) {
  t.require_columns({"t_s", "v_batt_v", "i_batt_a", "freq_hz", "util_pct", "temp_c", "phase",
                     "cluster", "active_cores"});
  std::vector<TraceRow> rows;
  rows.reserve(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    TraceRow row;
    row.sample.t = t.number(r, "t_s");
    row.sample.v_batt = t.number(r, "v_batt_v");
    row.sample.i_batt = t.number(r, "i_batt_a");
    row.sample.freq_hz = t.number(r, "freq_hz");
    row.sample.util_pct = t.number(r, "util_pct");
    row.sample.temp_c = t.number(r, "temp_c");
    if (!(row.sample.v_batt > 0.0))
      throw Error(ErrorKind::input_format, csv::row_context(t.line_number(r)) + "v_batt_v must be > 0");
    try {
      row.phase = parse_phase(t.cell(r, "phase"));
    } catch (const Error& e) {
      throw Error(ErrorKind::input_format, csv::row_context(t.line_number(r)) + e.what());
    }
    row.cluster = t.cell(r, "cluster");
    if (row.cluster.empty())
      throw Error(ErrorKind::input_format, csv::row_context(t.line_number(r)) + "empty cluster label");
    row.active_cores = parse_core_list(t.cell(r, "active_cores"), t.line_number(r));
    if (!rows.empty() && row.sample.t < rows.back().sample.t)
      throw Error(ErrorKind::input_format,
                  csv::row_context(t.line_number(r)) + "time stamps must be non-decreasing");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<TraceRow> read_trace_file(const std::string& path) {
  return read_trace(csv::Table::parse_file(path));
}

inline void write_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << csv::format_double(r.sample.t) << ',' << csv::format_double(r.sample.v_batt) << ','
        << csv::format_double(r.sample.i_batt) << ',' << csv::format_double(r.sample.freq_hz) << ','
        << csv::format_double(r.sample.util_pct) << ',' << csv::format_double(r.sample.temp_c) << ','
        << to_string(r.phase) << ',' << r.cluster << ',' << format_core_list(r.active_cores) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Full-protocol synthetic traces

/// Injected ground truth for one cluster. Per-cluster traces use the cluster
/// totals; single traces use the per-core vectors (one entry per
/// non-housekeeping core, in core-id order) and `core_idle_w`, the extra idle
/// draw of bringing one core online.
struct ClusterTruth {
  std::string cluster;
  std::vector<int> core_ids;
  double f_min = 0.0;
  double f_max = 0.0;
  double p_idle_min_w = 0.0;
  double p_idle_max_w = 0.0;
  double p_dyn_min_w = 0.0;
  double p_dyn_max_w = 0.0;
  std::vector<double> per_core_dyn_min_w;
  std::vector<double> per_core_dyn_max_w;
  double core_idle_w = 0.0;
};

struct ProtocolOptions {
  Strategy strategy = Strategy::per_cluster;
  int housekeeping_core = 0;
  double noise_sigma_w = 0.0;
  double phase_duration_s = 600.0;
  double cadence_s = 0.5;
  int repeats = 5;
  std::uint64_t seed = 0;
  double v_batt = 4.0;
  double temp_c = 30.0;
  CurrentConvention raw_convention = CurrentConvention::discharge_positive;
};

inline std::vector<int> measured_cores(const ClusterTruth& c, int housekeeping_core) {
  std::vector<int> out;
  for (int k : c.core_ids)
    if (k != housekeeping_core) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

/// Idle-before-load, `repeats` times per corner, clusters in the given order.
inline std::vector<TraceRow> synth_protocol_trace(const std::vector<ClusterTruth>& clusters,
                                                  const ProtocolOptions& opt) {
  if (opt.repeats < 1) throw Error(ErrorKind::input_format, "repeats must be >= 1");
  detail::check_timing(opt.phase_duration_s, opt.cadence_s);
  std::mt19937_64 rng(opt.seed);
  std::vector<TraceRow> rows;
  double t = 0.0;
  const int k0 = opt.housekeeping_core;

  auto emit = [&](const std::string& cluster, Phase phase, std::vector<int> cores, double freq,
                  double level) {
    SynthOptions so;
    so.noise_sigma_w = opt.noise_sigma_w;
    so.duration_s = opt.phase_duration_s;
    so.cadence_s = opt.cadence_s;
    so.v_batt = opt.v_batt;
    so.temp_c = opt.temp_c;
    so.freq_hz = freq;
    std::vector<PowerSample> samples;
    append_phase(samples, level, is_idle(phase) ? 0.0 : 100.0, t, so, rng);
    std::sort(cores.begin(), cores.end());
    for (auto& s : samples) {
      if (opt.raw_convention == CurrentConvention::discharge_negative) s.i_batt = -s.i_batt;
      rows.push_back({s, phase, cluster, cores});
    }
    t += static_cast<double>(samples.size()) * opt.cadence_s;
  };

  for (const auto& c : clusters) {
    const auto cores = measured_cores(c, k0);
    if (cores.empty())
      throw Error(ErrorKind::input_format, "cluster " + c.cluster + " has no non-housekeeping core");
    for (Corner corner : {Corner::min, Corner::max}) {
      const double f = corner == Corner::min ? c.f_min : c.f_max;
      const double idle = corner == Corner::min ? c.p_idle_min_w : c.p_idle_max_w;
      for (int rep = 0; rep < opt.repeats; ++rep) {
        if (opt.strategy == Strategy::per_cluster) {
          const double dyn = corner == Corner::min ? c.p_dyn_min_w : c.p_dyn_max_w;
          emit(c.cluster, idle_phase(corner), c.core_ids, f, idle);
          emit(c.cluster, stress_phase(corner), cores, f, idle + dyn);
        } else {
          const auto& per_core = corner == Corner::min ? c.per_core_dyn_min_w : c.per_core_dyn_max_w;
          if (per_core.size() != cores.size())
            throw Error(ErrorKind::input_format,
                        "cluster " + c.cluster + ": expected " + std::to_string(cores.size()) +
                            " per-core dynamic powers, got " + std::to_string(per_core.size()));
          emit(c.cluster, idle_phase(corner), {k0}, f, idle);
          for (std::size_t i = 0; i < cores.size(); ++i) {
            emit(c.cluster, idle_phase(corner), {k0, cores[i]}, f, idle + c.core_idle_w);
            emit(c.cluster, stress_phase(corner), {cores[i]}, f, c.core_idle_w + per_core[i]);
          }
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reduction pipeline

struct ReduceOptions {
  Strategy strategy = Strategy::per_cluster;
  int housekeeping_core = 0;
  TempBand band;
};

struct CornerResult {
  Corner corner = Corner::min;
  ClusterDynResult result;
  std::vector<PhaseMeasurement> phases;  // the measurements the result was built from
};

struct ReduceReport {
  Strategy strategy = Strategy::per_cluster;
  CurrentConvention convention = CurrentConvention::discharge_positive;
  std::vector<CornerResult> results;  // cluster order of first appearance, min before max
};

namespace detail {

using PhaseKey = std::tuple<std::string, Phase, std::vector<int>>;

struct PhaseGroup {
  std::vector<std::vector<PowerSample>> repeats;
};

inline std::map<PhaseKey, PhaseGroup> group_phases(const std::vector<TraceRow>& rows, bool by_cores,
                                                   std::vector<std::string>& cluster_order) {
  std::map<PhaseKey, PhaseGroup> groups;
  std::optional<PhaseKey> previous;
  for (const auto& r : rows) {
    if (std::find(cluster_order.begin(), cluster_order.end(), r.cluster) == cluster_order.end())
      cluster_order.push_back(r.cluster);
    PhaseKey key{r.cluster, r.phase, by_cores ? r.active_cores : std::vector<int>{}};
    // The repeat boundary always looks at the full core set so that
    // alternating single-activation blocks are never merged.
    PhaseKey boundary{r.cluster, r.phase, r.active_cores};
    auto& g = groups[key];
    if (!previous || *previous != boundary) g.repeats.emplace_back();
    g.repeats.back().push_back(r.sample);
    previous = std::move(boundary);
  }
  return groups;
}

inline std::string missing_phase_message(const std::string& cluster, Phase p, const std::string& what = "") {
  return "cluster " + cluster + ": missing phase " + std::string(to_string(p)) + what;
}

}  // namespace detail

inline ReduceReport reduce_trace(std::vector<TraceRow> rows, const ReduceOptions& opt) {
  ReduceReport report;
  report.strategy = opt.strategy;
  report.convention = normalize_current_sign(rows);
  if (rows.empty()) throw Error(ErrorKind::missing_data, "trace has no rows");

  std::vector<std::string> clusters;
  const bool by_cores = opt.strategy == Strategy::single;
  auto groups = detail::group_phases(rows, by_cores, clusters);
  const int k0 = opt.housekeeping_core;

  auto measure = [&](const detail::PhaseKey& key) -> PhaseMeasurement {
    const auto& g = groups.at(key);
    const auto& cores = std::get<2>(key);
    std::vector<int> active = cores;
    if (!by_cores) {
      // Report the union of cores seen in the phase.
      std::set<int> u;
      for (const auto& r : rows)
        if (r.cluster == std::get<0>(key) && r.phase == std::get<1>(key))
          u.insert(r.active_cores.begin(), r.active_cores.end());
      active.assign(u.begin(), u.end());
    }
    return measure_phase(std::get<1>(key), std::get<0>(key), active, g.repeats, opt.band);
  };

  for (const auto& cluster : clusters) {
    for (Corner corner : {Corner::min, Corner::max}) {
      const Phase ip = idle_phase(corner);
      const Phase sp = stress_phase(corner);
      CornerResult cr;
      cr.corner = corner;
      if (opt.strategy == Strategy::per_cluster) {
        const detail::PhaseKey ik{cluster, ip, {}};
        const detail::PhaseKey sk{cluster, sp, {}};
        if (!groups.count(ik)) throw Error(ErrorKind::missing_data, detail::missing_phase_message(cluster, ip));
        if (!groups.count(sk)) throw Error(ErrorKind::missing_data, detail::missing_phase_message(cluster, sp));
        auto idle = measure(ik);
        auto load = measure(sk);
        cr.result = per_cluster_reduce(idle, load, k0);
        cr.phases = {std::move(idle), std::move(load)};
      } else {
        // Collect the cores that have a load phase at this corner.
        std::vector<int> cores;
        bool any_idle = false;
        bool any_load = false;
        for (const auto& [key, g] : groups) {
          if (std::get<0>(key) != cluster) continue;
          if (std::get<1>(key) == ip) any_idle = true;
          if (std::get<1>(key) == sp) {
            any_load = true;
            const auto& ac = std::get<2>(key);
            if (ac.size() != 1 || ac.front() == k0)
              throw Error(ErrorKind::input_format,
                          "cluster " + cluster + ": single-activation load phase must list exactly "
                          "one non-housekeeping core");
            cores.push_back(ac.front());
          }
        }
        if (!any_idle) throw Error(ErrorKind::missing_data, detail::missing_phase_message(cluster, ip));
        if (!any_load) throw Error(ErrorKind::missing_data, detail::missing_phase_message(cluster, sp));
        const detail::PhaseKey k0_key{cluster, ip, {k0}};
        if (!groups.count(k0_key))
          throw Error(ErrorKind::missing_data,
                      detail::missing_phase_message(cluster, ip, " for housekeeping core alone"));
        auto idle_k0 = measure(k0_key);
        std::vector<SingleCorePhases> per_core;
        cr.phases.push_back(idle_k0);
        for (int k : cores) {
          std::vector<int> pair{k0, k};
          std::sort(pair.begin(), pair.end());
          const detail::PhaseKey ik{cluster, ip, pair};
          if (!groups.count(ik))
            throw Error(ErrorKind::missing_data, detail::missing_phase_message(
                                                     cluster, ip, " for core " + std::to_string(k)));
          auto idle_k = measure(ik);
          auto load_k = measure({cluster, sp, {k}});
          if (idle_k.freq_hz != load_k.freq_hz || idle_k.freq_hz != idle_k0.freq_hz)
            throw Error(ErrorKind::pairing, "cluster " + cluster + ": core " + std::to_string(k) +
                                                " phases at different frequencies");
          per_core.push_back({k, idle_k.mean_power_w, load_k.mean_power_w});
          cr.phases.push_back(std::move(idle_k));
          cr.phases.push_back(std::move(load_k));
        }
        cr.result = single_reduce(cluster, idle_k0.freq_hz, per_core, idle_k0.mean_power_w, k0);
      }
      report.results.push_back(std::move(cr));
    }
  }
  return report;
}

inline nlohmann::json to_json(const PhaseMeasurement& m) {
  return {{"phase", to_string(m.phase)},
          {"cluster", m.cluster},
          {"active_cores", m.active_cores},
          {"freq_hz", m.freq_hz},
          {"mean_power_w", m.mean_power_w},
          {"std_power_w", m.std_power_w},
          {"repeat_std_w", m.repeat_std_w},
          {"n_samples", m.n_samples},
          {"n_repeats", m.n_repeats},
          {"n_rejected_thermal", m.n_rejected_thermal}};
}

inline nlohmann::json to_json(const ClusterDynResult& r) {
  nlohmann::json j{{"cluster", r.cluster},
                   {"freq_hz", r.freq_hz},
                   {"p_dyn_w", r.p_dyn_w},
                   {"strategy", to_string(r.strategy)},
                   {"negative_warning", r.negative_warning}};
  if (r.per_core_w) {
    j["per_core_w"] = nlohmann::json::array();
    for (const auto& c : *r.per_core_w) j["per_core_w"].push_back({{"core_id", c.core_id}, {"watts", c.watts}});
  }
  return j;
}

inline nlohmann::json to_json(const ReduceReport& rep) {
  nlohmann::json j{{"strategy", to_string(rep.strategy)},
                   {"current_convention", to_string(rep.convention)},
                   {"results", nlohmann::json::array()}};
  for (const auto& cr : rep.results) {
    auto r = to_json(cr.result);
    r["corner"] = to_string(cr.corner);
    r["phases"] = nlohmann::json::array();
    for (const auto& p : cr.phases) r["phases"].push_back(to_json(p));
    j["results"].push_back(std::move(r));
  }
  return j;
}

}  // namespace clusterpower
