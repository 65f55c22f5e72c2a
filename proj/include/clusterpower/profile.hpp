#pragma once

// Device profile document:
//
//   { "device": "...", "soc": "...",
//     "clusters": [ { "name", "core_ids", "f_min", "f_max", "v_min", "v_max",
//                     "rail_id"?,
//                     "c_eff_at_fmin"?, "c_eff_at_fmax"?, "c_eff_mean"?,
//                     "epsilon_at_fmin"?, "epsilon_at_fmax"?, "epsilon_mean"? } ] }
//
// The fitted fields are all present or all absent.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clusterpower/error.hpp"
#include "clusterpower/powermodel.hpp"

namespace clusterpower {

struct ClusterProfile {
  ClusterSpec spec;
  std::optional<FittedParams> params;
  std::optional<std::string> rail_id;
};

struct DeviceProfile {
  std::string device;
  std::string soc;
  std::vector<ClusterProfile> clusters;

  const ClusterProfile* find(const std::string& name) const {
    for (const auto& c : clusters)
      if (c.spec.name == name) return &c;
    return nullptr;
  }
  ClusterProfile* find(const std::string& name) {
    for (auto& c : clusters)
      if (c.spec.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline const char* kFittedKeys[] = {"c_eff_at_fmin",   "c_eff_at_fmax",   "c_eff_mean",
                                    "epsilon_at_fmin", "epsilon_at_fmax", "epsilon_mean"};

template <typename T>
T json_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw Error(ErrorKind::input_format, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::input_format, where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ClusterProfile& c) {
  nlohmann::json j;
  j["name"] = c.spec.name;
  j["core_ids"] = c.spec.core_ids;
  j["f_min"] = c.spec.f_min;
  j["f_max"] = c.spec.f_max;
  j["v_min"] = c.spec.v_min;
  j["v_max"] = c.spec.v_max;
  if (c.rail_id) j["rail_id"] = *c.rail_id;
  if (c.params) {
    j["c_eff_at_fmin"] = c.params->c_eff_at_fmin;
    j["c_eff_at_fmax"] = c.params->c_eff_at_fmax;
    j["c_eff_mean"] = c.params->c_eff_mean;
    j["epsilon_at_fmin"] = c.params->epsilon_at_fmin;
    j["epsilon_at_fmax"] = c.params->epsilon_at_fmax;
    j["epsilon_mean"] = c.params->epsilon_mean;
  }
  return j;
}

inline nlohmann::json to_json(const DeviceProfile& p) {
  nlohmann::json j;
  j["device"] = p.device;
  j["soc"] = p.soc;
  j["clusters"] = nlohmann::json::array();
  for (const auto& c : p.clusters) j["clusters"].push_back(to_json(c));
  return j;
}

inline ClusterProfile cluster_profile_from_json(const nlohmann::json& j) {
  using detail::json_field;
  ClusterProfile c;
  const std::string where = "cluster";
  c.spec.name = json_field<std::string>(j, "name", where);
  const std::string here = "cluster '" + c.spec.name + "'";
  c.spec.core_ids = json_field<std::vector<int>>(j, "core_ids", here);
  c.spec.f_min = json_field<double>(j, "f_min", here);
  c.spec.f_max = json_field<double>(j, "f_max", here);
  c.spec.v_min = json_field<double>(j, "v_min", here);
  c.spec.v_max = json_field<double>(j, "v_max", here);
  c.spec.validate();
  if (j.contains("rail_id") && !j["rail_id"].is_null())
    c.rail_id = json_field<std::string>(j, "rail_id", here);

  int present = 0;
  for (const char* k : detail::kFittedKeys) present += j.contains(k) ? 1 : 0;
  if (present == 6) {
    FittedParams p;
    p.c_eff_at_fmin = json_field<double>(j, "c_eff_at_fmin", here);
    p.c_eff_at_fmax = json_field<double>(j, "c_eff_at_fmax", here);
    p.c_eff_mean = json_field<double>(j, "c_eff_mean", here);
    p.epsilon_at_fmin = json_field<double>(j, "epsilon_at_fmin", here);
    p.epsilon_at_fmax = json_field<double>(j, "epsilon_at_fmax", here);
    p.epsilon_mean = json_field<double>(j, "epsilon_mean", here);
    c.params = p;
  } else if (present != 0) {
    throw Error(ErrorKind::input_format, here + ": fitted parameters are partially present");
  }
  return c;
}

inline DeviceProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::input_format, "device profile must be a JSON object");
  DeviceProfile p;
  p.device = j.value("device", std::string{});
  p.soc = j.value("soc", std::string{});
  if (!j.contains("clusters") || !j["clusters"].is_array())
    throw Error(ErrorKind::input_format, "device profile: 'clusters' array missing");
  for (const auto& c : j["clusters"]) {
    auto cp = cluster_profile_from_json(c);
    if (p.find(cp.spec.name))
      throw Error(ErrorKind::input_format, "duplicate cluster '" + cp.spec.name + "'");
    p.clusters.push_back(std::move(cp));
  }
  return p;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input_format, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::input_format, path + ": " + e.what());
  }
}

inline DeviceProfile load_profile(const std::string& path) {
  return profile_from_json(read_json_file(path));
}

}  // namespace clusterpower
