// clusterpower: fitting, validation, trace reduction, rail mapping, MSR
// decoding and FL simulation over CSV/JSON files.
//
// Exit codes: 0 success, 1 validation threshold exceeded, 2 input format,
// 3 semantic or missing data, 4 training divergence.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clusterpower.hpp"

namespace cp = clusterpower;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitInput = 2;
constexpr int kExitSemantic = 3;
constexpr int kExitDivergence = 4;

int exit_code(cp::ErrorKind k) {
  switch (k) {
    case cp::ErrorKind::input_format:
    case cp::ErrorKind::dataset: return kExitInput;
    case cp::ErrorKind::divergence: return kExitDivergence;
    default: return kExitSemantic;
  }
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void report(int code, std::string_view kind, const std::string& msg) {
  std::cerr << "code=" << code << " kind=" << kind << " msg=\"" << escape(msg) << "\"\n";
}

struct Common {
  std::string output;
  std::optional<int> round;
  int verbosity = 0;

  cp::csv::NumberFormat fmt() const { return {round}; }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-o,--output", c.output, "Output path (default: standard output)");
  sub->add_option("--round", c.round, "Round displayed numbers to N decimals (default: full precision)")
      ->check(CLI::Range(0, 17));
  sub->add_flag("-v,--verbose", c.verbosity, "Print progress to standard error");
}

/// Rounds every floating-point number in a JSON document for display.
void round_json(json& j, int decimals) {
  if (j.is_number_float()) {
    const double scale = std::pow(10.0, decimals);
    j = std::round(j.get<double>() * scale) / scale;
  } else if (j.is_structured()) {
    for (auto& v : j) round_json(v, decimals);
  }
}

std::string dump(json j, const Common& c) {
  if (c.round) round_json(j, *c.round);
  return j.dump(2) + "\n";
}

/// Writes the whole payload at once so a failed run leaves no partial file.
void emit(const std::string& payload, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << payload;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cp::Error(cp::ErrorKind::input_format, "cannot write '" + path + "'");
  out << payload;
  if (!out) throw cp::Error(cp::ErrorKind::input_format, "write to '" + path + "' failed");
}

cp::csv::Table read_table(const std::string& path) {
  if (path == "-") return cp::csv::Table::parse(std::cin);
  return cp::csv::Table::parse_file(path);
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  Common common;
  std::string corners;
  std::string clusters;
};

int run_fit(const FitArgs& a) {
  auto profile = cp::load_profile(a.clusters);
  const auto t = read_table(a.corners);
  if (t.size() == 0) throw cp::Error(cp::ErrorKind::missing_data, a.corners + ": no corner rows");
  t.require_columns({"cluster", "freq_hz", "p_dyn_w"});

  std::map<std::string, std::vector<cp::CornerMeasurement>> by_cluster;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const auto& name = t.cell(r, "cluster");
    const auto* c = profile.find(name);
    if (!c)
      throw cp::Error(cp::ErrorKind::input_format,
                      cp::csv::row_context(t.line_number(r)) + "cluster '" + name + "' is not in " + a.clusters);
    const double f = t.number(r, "freq_hz");
    const double p = t.number(r, "p_dyn_w");
    double v = 0.0;
    if (t.has_column("voltage_v") && !t.cell(r, "voltage_v").empty()) {
      v = t.number(r, "voltage_v");
    } else {
      v = cp::interpolate_voltage(c->spec, f);
    }
    by_cluster[name].push_back({f, v, p});
  }
  for (auto& c : profile.clusters) {
    const auto it = by_cluster.find(c.spec.name);
    const std::size_t n = it == by_cluster.end() ? 0 : it->second.size();
    if (n != 2)
      throw cp::Error(cp::ErrorKind::missing_data, "cluster " + c.spec.name + ": expected 2 corner rows, found " +
                                                       std::to_string(n));
    c.params = cp::fit_profile(it->second[0], it->second[1]);
  }
  emit(dump(cp::to_json(profile), a.common), a.common.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  Common common;
  std::string profile;
  std::vector<std::string> clusters;
  std::vector<double> freqs;
  std::string model = "both";
  std::string format = "csv";
  bool corner_local = false;
};

int run_predict(const PredictArgs& a) {
  const auto profile = cp::load_profile(a.profile);
  std::vector<cp::ModelKind> kinds;
  if (a.model == "both") {
    kinds = {cp::ModelKind::analytical, cp::ModelKind::approximate};
  } else {
    kinds = {cp::parse_model_kind(a.model)};
  }
  const auto choice = a.corner_local ? cp::ParamChoice::corner_local : cp::ParamChoice::mean;
  const auto fmt = a.common.fmt();

  std::ostringstream csv;
  json rows = json::array();
  csv << "cluster,freq_hz,model,voltage_v,voltage_interpolated,predicted_w\n";
  std::vector<const cp::ClusterProfile*> targets;
  if (a.clusters.empty()) {
    for (const auto& c : profile.clusters) targets.push_back(&c);
  } else {
    for (const auto& name : a.clusters) {
      const auto* c = profile.find(name);
      if (!c) throw cp::Error(cp::ErrorKind::input_format, "cluster '" + name + "' is not in " + a.profile);
      targets.push_back(c);
    }
  }
  for (const auto* c : targets) {
    if (!c->params)
      throw cp::Error(cp::ErrorKind::missing_data, "cluster " + c->spec.name + " has no fitted parameters");
    std::vector<double> freqs = a.freqs;
    if (freqs.empty()) freqs = {c->spec.f_min, c->spec.f_max};
    for (double f : freqs) {
      for (auto k : kinds) {
        const auto p = cp::predict(c->spec, *c->params, k, f, choice);
        csv << c->spec.name << ',' << fmt(f) << ',' << cp::to_string(k) << ','
            << (p.voltage_v ? fmt(*p.voltage_v) : "") << ',' << (p.voltage_interpolated ? "true" : "false") << ','
            << fmt(p.predicted_w) << '\n';
        json row{{"cluster", c->spec.name},
                 {"freq_hz", f},
                 {"model", cp::to_string(k)},
                 {"voltage_interpolated", p.voltage_interpolated},
                 {"predicted_w", p.predicted_w}};
        row["voltage_v"] = p.voltage_v ? json(*p.voltage_v) : json(nullptr);
        rows.push_back(std::move(row));
      }
    }
  }
  emit(a.format == "json" ? dump(rows, a.common) : csv.str(), a.common.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
  Common common;
  std::string profile;
  std::string measurements;
  double threshold = 5.0;
  bool corner_local = false;
  std::string format = "csv";
};

int run_validate(const ValidateArgs& a) {
  const auto profile = cp::load_profile(a.profile);
  const auto t = read_table(a.measurements);
  if (t.size() == 0) throw cp::Error(cp::ErrorKind::missing_data, a.measurements + ": no measurement rows");
  const std::string p_col = t.has_column("p_measured_w") ? "p_measured_w" : "p_dyn_w";
  t.require_columns({"cluster", "freq_hz"});
  t.column(p_col);

  const auto choice = a.corner_local ? cp::ParamChoice::corner_local : cp::ParamChoice::mean;
  const auto fmt = a.common.fmt();
  std::ostringstream csv;
  json rows = json::array();
  csv << "cluster,freq_hz,voltage_v,p_measured_w,p_analytical_w,err_analytical_pct,p_approximate_w,"
         "err_approximate_pct,pass\n";
  bool all_pass = true;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const auto& name = t.cell(r, "cluster");
    const auto* c = profile.find(name);
    if (!c)
      throw cp::Error(cp::ErrorKind::input_format,
                      cp::csv::row_context(t.line_number(r)) + "cluster '" + name + "' is not in " + a.profile);
    if (!c->params)
      throw cp::Error(cp::ErrorKind::missing_data, "cluster " + name + " has no fitted parameters");
    const double f = t.number(r, "freq_hz");
    const double measured = t.number(r, p_col);
    const auto an = cp::predict(c->spec, *c->params, cp::ModelKind::analytical, f, choice);
    const auto ap = cp::predict(c->spec, *c->params, cp::ModelKind::approximate, f, choice);
    const double e_an = cp::relative_error(an.predicted_w, measured);
    const double e_ap = cp::relative_error(ap.predicted_w, measured);
    const bool pass = std::fabs(e_an) <= a.threshold;
    all_pass = all_pass && pass;
    csv << name << ',' << fmt(f) << ',' << fmt(*an.voltage_v) << ',' << fmt(measured) << ','
        << fmt(an.predicted_w) << ',' << fmt(e_an) << ',' << fmt(ap.predicted_w) << ',' << fmt(e_ap) << ','
        << (pass ? "true" : "false") << '\n';
    rows.push_back({{"cluster", name},
                    {"freq_hz", f},
                    {"voltage_v", *an.voltage_v},
                    {"p_measured_w", measured},
                    {"p_analytical_w", an.predicted_w},
                    {"err_analytical_pct", e_an},
                    {"p_approximate_w", ap.predicted_w},
                    {"err_approximate_pct", e_ap},
                    {"pass", pass}});
  }
  emit(a.format == "json" ? dump(rows, a.common) : csv.str(), a.common.output);
  return all_pass ? kExitOk : kExitThreshold;
}

// ---------------------------------------------------------------------------
// reduce

struct ReduceArgs {
  Common common;
  std::string trace;
  std::string strategy = "per_cluster";
  int housekeeping_core = 0;
  double temp_low = 28.0;
  double temp_high = 32.0;
  std::string corners_out;
};

int run_reduce(const ReduceArgs& a) {
  auto rows = cp::read_trace(read_table(a.trace));
  cp::ReduceOptions opt;
  opt.strategy = cp::parse_strategy(a.strategy);
  opt.housekeeping_core = a.housekeeping_core;
  opt.band = {a.temp_low, a.temp_high};
  const auto rep = cp::reduce_trace(std::move(rows), opt);
  if (a.common.verbosity > 0)
    std::cerr << "reduced " << rep.results.size() << " cluster corners, raw current convention "
              << cp::to_string(rep.convention) << '\n';
  for (const auto& cr : rep.results)
    if (cr.result.negative_warning)
      std::cerr << "warning: cluster " << cr.result.cluster << " corner " << cp::to_string(cr.corner)
                << " has negative dynamic power\n";
  if (!a.corners_out.empty()) {
    std::ostringstream csv;
    const auto fmt = a.common.fmt();
    csv << "cluster,freq_hz,p_dyn_w\n";
    for (const auto& cr : rep.results)
      csv << cr.result.cluster << ',' << fmt(cr.result.freq_hz) << ',' << fmt(cr.result.p_dyn_w) << '\n';
    emit(csv.str(), a.corners_out);
  }
  emit(dump(cp::to_json(rep), a.common), a.common.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// railmap

struct RailmapArgs {
  Common common;
  std::string log;
  std::string schedule;
  std::string profile;
  double threshold_v = 0.030;
  double settle = 0.10;
  double baseline_cap_s = 30.0;
};

int run_railmap(const RailmapArgs& a) {
  const auto log = cp::read_rail_log(read_table(a.log));
  const auto schedule = cp::schedule_from_json(cp::read_json_file(a.schedule));
  const cp::RailMapOptions opt{a.threshold_v, a.settle, a.baseline_cap_s};
  if (a.profile.empty()) {
    const auto m = cp::map_rails(log, schedule, opt);
    emit(dump(cp::to_json(m), a.common), a.common.output);
    return kExitOk;
  }
  auto profile = cp::load_profile(a.profile);
  const auto m = cp::map_rails(log, schedule, opt, &profile);
  cp::merge_into_profile(profile, m);
  emit(dump(cp::to_json(profile), a.common), a.common.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// decode-msr

struct DecodeArgs {
  Common common;
  std::string vendor = "intel";
  std::vector<std::string> raw;
  std::string replay;
  std::optional<std::string> address;
  std::vector<unsigned> vid;
  double v_offset = 0.0;
  double k_step = 0.0;
  unsigned vid_lsb = 0;
  unsigned vid_width = 8;
};

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%x", v);
  return buf;
}

int run_decode(const DecodeArgs& a) {
  const bool intel = a.vendor == "intel";
  if (!intel && a.vendor != "amd") throw cp::Error(cp::ErrorKind::input_format, "vendor must be intel or amd");
  const int sources = (a.raw.empty() ? 0 : 1) + (a.replay.empty() ? 0 : 1) + (a.vid.empty() ? 0 : 1);
  if (sources != 1)
    throw cp::Error(cp::ErrorKind::input_format, "give exactly one of --raw, --replay or --vid");
  if (!intel && (a.vid_width == 0 || a.vid_width > 8 || a.vid_lsb + a.vid_width > 64))
    throw cp::Error(cp::ErrorKind::input_format, "AMD VID field must be 1..8 bits inside the register");
  const cp::msr::AmdSviParams amd{a.v_offset, a.k_step};

  struct Item {
    std::optional<std::uint32_t> address;
    std::optional<std::uint64_t> raw;
    std::uint32_t vid = 0;
  };
  std::vector<Item> items;
  auto from_raw = [&](std::optional<std::uint32_t> addr, std::uint64_t raw) {
    const cp::msr::Msr64 m{raw};
    const auto vid = intel ? cp::msr::intel_vid_field(m) : static_cast<std::uint32_t>(m.bits(a.vid_lsb, a.vid_width));
    items.push_back({addr, raw, vid});
  };
  if (!a.raw.empty()) {
    for (std::size_t i = 0; i < a.raw.size(); ++i) from_raw(std::nullopt, cp::csv::parse_hex(a.raw[i], i + 1, "--raw"));
  } else if (!a.replay.empty()) {
    std::ifstream in(a.replay);
    if (!in) throw cp::Error(cp::ErrorKind::input_format, "cannot open '" + a.replay + "'");
    const auto src = cp::msr::ReplayRegisterSource::parse(in);
    std::optional<std::uint32_t> filter;
    if (a.address) {
      filter = static_cast<std::uint32_t>(cp::csv::parse_hex(*a.address, 1, "--address"));
    } else if (intel) {
      filter = cp::msr::kIa32PerfStatus;
    }
    for (const auto& rec : src.records())
      if (!filter || rec.address == *filter) from_raw(rec.address, rec.value.raw);
    if (items.empty()) throw cp::Error(cp::ErrorKind::missing_data, a.replay + ": no matching register records");
  } else {
    for (unsigned v : a.vid) {
      if (v > (intel ? 0xFFFFu : 0xFFu))
        throw cp::Error(cp::ErrorKind::input_format, "VID " + std::to_string(v) + " exceeds the field width");
      items.push_back({std::nullopt, std::nullopt, v});
    }
  }

  const auto fmt = a.common.fmt();
  std::ostringstream csv;
  csv << "address,raw,vid,voltage_v,implausible\n";
  for (const auto& it : items) {
    const auto r = intel ? cp::msr::decode_intel_vid(cp::msr::Msr64{std::uint64_t{it.vid} << 32})
                         : cp::msr::decode_amd_svi2(static_cast<std::uint8_t>(it.vid), amd);
    csv << (it.address ? hex32(*it.address) : "") << ',' << (it.raw ? hex64(*it.raw) : "") << ',' << r.vid << ','
        << fmt(r.volts) << ',' << (r.implausible ? "true" : "false") << '\n';
  }
  emit(csv.str(), a.common.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  Common common;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_rounds;
  std::optional<std::string> estimator;
  bool quiet = false;
};

int run_simulate(const SimulateArgs& a) {
  auto cfg = cp::fl::config_from_json(cp::read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.max_rounds) cfg.max_rounds = *a.max_rounds;
  if (a.estimator) cfg.estimator = cp::parse_model_kind(*a.estimator);
  const auto result = cp::fl::run_simulation(cfg);
  std::ostringstream csv;
  cp::fl::write_records_csv(csv, result, a.common.fmt());
  emit(csv.str(), a.common.output);
  if (!a.quiet) {
    const auto fmt = a.common.fmt();
    std::cerr << "rounds=" << result.rounds.size() << " reached_target=" << (result.reached_target ? "true" : "false")
              << " final_accuracy=" << fmt(result.final_accuracy())
              << " cumulative_true_energy_j=" << fmt(result.cumulative_true_energy_j()) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  Common common;
  std::string truth;
  std::optional<std::string> kind;
  std::optional<std::uint64_t> seed;
  std::string schedule_out;
};

cp::CurrentConvention parse_convention(const std::string& s) {
  if (s == "discharge_positive") return cp::CurrentConvention::discharge_positive;
  if (s == "discharge_negative") return cp::CurrentConvention::discharge_negative;
  throw cp::Error(cp::ErrorKind::input_format, "unknown current convention '" + s + "'");
}

template <typename T>
T opt_field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return cp::detail::json_field<T>(j, key, "ground truth");
}

int synth_trace_cmd(const json& j, const SynthArgs& a) {
  cp::ProtocolOptions opt;
  opt.strategy = cp::parse_strategy(opt_field<std::string>(j, "strategy", "per_cluster"));
  opt.housekeeping_core = opt_field(j, "housekeeping_core", opt.housekeeping_core);
  opt.noise_sigma_w = opt_field(j, "noise_sigma_w", opt.noise_sigma_w);
  opt.phase_duration_s = opt_field(j, "phase_duration_s", opt.phase_duration_s);
  opt.cadence_s = opt_field(j, "cadence_s", opt.cadence_s);
  opt.repeats = opt_field(j, "repeats", opt.repeats);
  opt.seed = a.seed ? *a.seed : opt_field<std::uint64_t>(j, "seed", 0);
  opt.v_batt = opt_field(j, "v_batt", opt.v_batt);
  opt.temp_c = opt_field(j, "temp_c", opt.temp_c);
  opt.raw_convention = parse_convention(opt_field<std::string>(j, "raw_convention", "discharge_positive"));
  if (!(opt.noise_sigma_w >= 0.0)) throw cp::Error(cp::ErrorKind::input_format, "noise_sigma_w must be >= 0");

  if (!j.contains("clusters") || !j["clusters"].is_array())
    throw cp::Error(cp::ErrorKind::input_format, "ground truth: 'clusters' array missing");
  std::vector<cp::ClusterTruth> clusters;
  for (const auto& c : j["clusters"]) {
    using cp::detail::json_field;
    cp::ClusterTruth t;
    t.cluster = json_field<std::string>(c, "cluster", "cluster truth");
    const std::string where = "cluster truth '" + t.cluster + "'";
    t.core_ids = json_field<std::vector<int>>(c, "core_ids", where);
    t.f_min = json_field<double>(c, "f_min", where);
    t.f_max = json_field<double>(c, "f_max", where);
    t.p_idle_min_w = json_field<double>(c, "p_idle_min_w", where);
    t.p_idle_max_w = json_field<double>(c, "p_idle_max_w", where);
    t.p_dyn_min_w = c.value("p_dyn_min_w", 0.0);
    t.p_dyn_max_w = c.value("p_dyn_max_w", 0.0);
    t.per_core_dyn_min_w = c.value("per_core_dyn_min_w", std::vector<double>{});
    t.per_core_dyn_max_w = c.value("per_core_dyn_max_w", std::vector<double>{});
    t.core_idle_w = c.value("core_idle_w", 0.0);
    clusters.push_back(std::move(t));
  }
  std::ostringstream out;
  cp::write_trace(out, cp::synth_protocol_trace(clusters, opt));
  emit(out.str(), a.common.output);
  return kExitOk;
}

int synth_rail_cmd(const json& j, const SynthArgs& a) {
  cp::SynthRailOptions opt;
  opt.window_s = opt_field(j, "window_s", opt.window_s);
  opt.gap_s = opt_field(j, "gap_s", opt.gap_s);
  opt.cadence_s = opt_field(j, "cadence_s", opt.cadence_s);
  opt.noise_v = opt_field(j, "noise_v", opt.noise_v);
  opt.ramp_fraction = opt_field(j, "ramp_fraction", opt.ramp_fraction);
  opt.seed = a.seed ? *a.seed : opt_field<std::uint64_t>(j, "seed", 0);

  if (!j.contains("clusters") || !j.contains("rails"))
    throw cp::Error(cp::ErrorKind::input_format, "rail ground truth needs 'clusters' and 'rails'");
  std::vector<cp::ClusterSpec> clusters;
  for (const auto& c : j["clusters"]) clusters.push_back(cp::cluster_profile_from_json(c).spec);
  std::vector<cp::RailTruth> rails;
  for (const auto& r : j["rails"]) {
    using cp::detail::json_field;
    cp::RailTruth t;
    t.rail_id = json_field<std::string>(r, "rail_id", "rail truth");
    t.cluster = r.value("cluster", std::string{});
    t.idle_v = json_field<double>(r, "idle_v", "rail truth '" + t.rail_id + "'");
    t.v_at_fmin = r.value("v_at_fmin", t.idle_v);
    t.v_at_fmax = r.value("v_at_fmax", t.idle_v);
    rails.push_back(std::move(t));
  }
  const auto synth = cp::synth_rail_log(clusters, rails, opt);
  std::ostringstream out;
  cp::write_rail_log(out, synth.log);
  emit(out.str(), a.common.output);
  if (!a.schedule_out.empty()) emit(cp::to_json(synth.schedule).dump(2) + "\n", a.schedule_out);
  return kExitOk;
}

int run_synth(const SynthArgs& a) {
  const auto j = cp::read_json_file(a.truth);
  if (!j.is_object()) throw cp::Error(cp::ErrorKind::input_format, "ground truth must be a JSON object");
  const std::string kind = a.kind ? *a.kind : opt_field<std::string>(j, "kind", "trace");
  if (kind == "trace") return synth_trace_cmd(j, a);
  if (kind == "rail") return synth_rail_cmd(j, a);
  throw cp::Error(cp::ErrorKind::input_format, "synth kind must be 'trace' or 'rail'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-aware CPU dynamic-power modeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "clusterpower 0.1.0");

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "Fit C_eff and epsilon per cluster from two corner measurements.\n"
                                          "corners CSV: cluster,freq_hz,p_dyn_w[,voltage_v] (Hz, W, V); "
                                          "voltage defaults to the cluster's corner voltage.\n"
                                          "Writes a device-profile JSON.");
  s_fit->add_option("--corners", fit.corners, "Corner measurements CSV")->required();
  s_fit->add_option("--clusters", fit.clusters, "Device profile JSON with the cluster specs")->required();
  add_common(s_fit, fit.common);

  PredictArgs pred;
  auto* s_pred = app.add_subcommand("predict", "Predict cluster dynamic power (W) from a fitted profile.\n"
                                               "Output: cluster,freq_hz,model,voltage_v,voltage_interpolated,"
                                               "predicted_w");
  s_pred->add_option("--profile", pred.profile, "Fitted device profile JSON")->required();
  s_pred->add_option("--cluster", pred.clusters, "Cluster name (repeatable; default: all)");
  s_pred->add_option("--freq", pred.freqs, "Frequency in Hz (repeatable; default: both corners)");
  s_pred->add_option("--model", pred.model, "analytical | approximate | both")
      ->check(CLI::IsMember({"analytical", "approximate", "both"}));
  s_pred->add_option("--format", pred.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  s_pred->add_flag("--corner-local", pred.corner_local, "Use the constant fitted at the matching corner");
  add_common(s_pred, pred.common);

  ValidateArgs val;
  auto* s_val = app.add_subcommand("validate", "Signed prediction errors (%) of both models against measurements.\n"
                                               "measurements CSV: cluster,freq_hz,p_measured_w (Hz, W).\n"
                                               "Output: cluster,freq_hz,voltage_v,p_measured_w,p_analytical_w,"
                                               "err_analytical_pct,p_approximate_w,err_approximate_pct,pass.\n"
                                               "Exit 1 when any analytical |error| exceeds the threshold.");
  s_val->add_option("--profile", val.profile, "Fitted device profile JSON")->required();
  s_val->add_option("--measurements", val.measurements, "Measurements CSV")->required();
  s_val->add_option("--threshold", val.threshold, "Analytical pass threshold in percent")->check(CLI::PositiveNumber);
  s_val->add_flag("--corner-local", val.corner_local, "Use corner-specific constants instead of the means");
  s_val->add_option("--format", val.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  add_common(s_val, val.common);

  ReduceArgs red;
  auto* s_red = app.add_subcommand("reduce", "Reduce a labelled fuel-gauge trace to per-cluster dynamic power.\n"
                                             "trace CSV: t_s,v_batt_v,i_batt_a,freq_hz,util_pct,temp_c,phase,"
                                             "cluster,active_cores (active_cores '|'-separated).\n"
                                             "Writes a JSON report; --corners also writes cluster,freq_hz,p_dyn_w.");
  s_red->add_option("--trace", red.trace, "Trace CSV")->required();
  s_red->add_option("--strategy", red.strategy, "per_cluster | single")
      ->check(CLI::IsMember({"per_cluster", "per-cluster", "single"}));
  s_red->add_option("--housekeeping-core", red.housekeeping_core, "Core reserved for system tasks");
  s_red->add_option("--temp-low", red.temp_low, "Lower edge of the temperature band (deg C)");
  s_red->add_option("--temp-high", red.temp_high, "Upper edge of the temperature band (deg C)");
  s_red->add_option("--corners", red.corners_out, "Also write the corner CSV consumed by 'fit'");
  add_common(s_red, red.common);

  RailmapArgs rm;
  auto* s_rm = app.add_subcommand("railmap", "Map regulator rails to clusters and recover (v_min, v_max).\n"
                                             "log CSV: t_s,rail_id,voltage_v; schedule JSON: "
                                             "[{t_start_s,t_end_s,cluster,freq_hz}].\n"
                                             "With --profile, writes the profile with rail_id and voltages merged.");
  s_rm->add_option("--log", rm.log, "Regulator log CSV")->required();
  s_rm->add_option("--schedule", rm.schedule, "Activation schedule JSON")->required();
  s_rm->add_option("--profile", rm.profile, "Device profile JSON to merge into");
  s_rm->add_option("--threshold", rm.threshold_v, "Spike threshold in volts");
  s_rm->add_option("--settle", rm.settle, "Fraction trimmed from each window end")->check(CLI::Range(0.0, 0.49));
  s_rm->add_option("--baseline-cap", rm.baseline_cap_s, "Baseline window cap in seconds");
  add_common(s_rm, rm.common);

  DecodeArgs dec;
  auto* s_dec = app.add_subcommand("decode-msr", "Decode MSR voltage identifiers to volts.\n"
                                                 "Intel: bits 47:32 of IA32_PERF_STATUS times 2^-13.\n"
                                                 "AMD: v_offset - k_step * vid.\n"
                                                 "Replay file lines: msr_address_hex,raw_value_hex.\n"
                                                 "Output: address,raw,vid,voltage_v,implausible.");
  s_dec->add_option("--vendor", dec.vendor, "intel | amd")->check(CLI::IsMember({"intel", "amd"}));
  s_dec->add_option("--raw", dec.raw, "Raw 64-bit register value in hex (repeatable)");
  s_dec->add_option("--replay", dec.replay, "Register replay file");
  s_dec->add_option("--address", dec.address, "Register address to select from the replay (hex)");
  s_dec->add_option("--vid", dec.vid, "Already-extracted VID (repeatable)");
  s_dec->add_option("--v-offset", dec.v_offset, "AMD offset voltage (V)");
  s_dec->add_option("--k-step", dec.k_step, "AMD step (V per VID unit)");
  s_dec->add_option("--vid-lsb", dec.vid_lsb, "AMD: lowest bit of the VID field in raw values");
  s_dec->add_option("--vid-width", dec.vid_width, "AMD: width of the VID field in bits");
  add_common(s_dec, dec.common);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Run the energy-aware federated-learning simulation.\n"
                                               "Output: round,peer_id,alpha,workload_cycles,e_estimated_j,e_true_j,"
                                               "global_accuracy,cumulative_true_energy_j\n"
                                               "(one aggregate row per round with an empty peer_id).");
  s_sim->add_option("--config", sim.config, "FL config JSON")->required();
  s_sim->add_option("--seed", sim.seed, "Override the config seed");
  s_sim->add_option("--max-rounds", sim.max_rounds, "Override max_rounds");
  s_sim->add_option("--estimator", sim.estimator, "Override the energy estimator")
      ->check(CLI::IsMember({"analytical", "approximate"}));
  s_sim->add_flag("-q,--quiet", sim.quiet, "Do not print the run summary");
  add_common(s_sim, sim.common);

  SynthArgs syn;
  auto* s_syn = app.add_subcommand("synth", "Generate a synthetic protocol trace or regulator log from ground truth "
                                            "JSON ('kind': trace | rail).");
  s_syn->add_option("--truth", syn.truth, "Ground-truth JSON")->required();
  s_syn->add_option("--kind", syn.kind, "Override the document's kind")->check(CLI::IsMember({"trace", "rail"}));
  s_syn->add_option("--seed", syn.seed, "Override the document's seed");
  s_syn->add_option("--schedule-out", syn.schedule_out, "rail: also write the activation schedule JSON");
  add_common(s_syn, syn.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(kExitInput, "usage", e.what());
    return kExitInput;
  }

  try {
    if (s_fit->parsed()) return run_fit(fit);
    if (s_pred->parsed()) return run_predict(pred);
    if (s_val->parsed()) return run_validate(val);
    if (s_red->parsed()) return run_reduce(red);
    if (s_rm->parsed()) return run_railmap(rm);
    if (s_dec->parsed()) return run_decode(dec);
    if (s_sim->parsed()) return run_simulate(sim);
    if (s_syn->parsed()) return run_synth(syn);
  } catch (const cp::DivergenceError& e) {
    report(kExitDivergence, cp::to_string(e.kind()), std::string(e.what()) + " (round=" + std::to_string(e.round()) + ")");
    return kExitDivergence;
  } catch (const cp::Error& e) {
    const int code = exit_code(e.kind());
    report(code, cp::to_string(e.kind()), e.what());
    return code;
  } catch (const json::exception& e) {
    report(kExitInput, "input_format", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    report(kExitSemantic, "internal", e.what());
    return kExitSemantic;
  }
  return kExitInput;
}
