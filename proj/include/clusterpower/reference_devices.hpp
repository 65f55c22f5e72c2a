#pragma once

// Characterisation data for the two profiled phones and the x86 workstation:
// cluster operating ranges, measured full-load dynamic power at both corners,
// and the published predictions/errors used as golden values in tests.

#include <cstdint>
#include <string>
#include <vector>

#include "clusterpower/powermodel.hpp"
#include "clusterpower/profile.hpp"
#include "clusterpower/traces.hpp"

namespace clusterpower::reference {

inline DeviceProfile samsung_a16() {
  return {"Samsung A16",
          "MediaTek Helio G99",
          {{{"LITTLE", {0, 1, 2, 3, 4, 5}, 5.00e8, 2.00e9, 0.55, 0.81}, {}, {}},
           {{"big", {6, 7}, 7.25e8, 2.20e9, 0.55, 0.76}, {}, {}}}};
}

inline DeviceProfile pixel_8_pro() {
  return {"Google Pixel 8 Pro",
          "Google Tensor G3",
          {{{"LITTLE", {0, 1, 2, 3}, 3.24e8, 1.70e9, 0.56, 0.85}, {}, {}},
           {{"big", {4, 5, 6, 7}, 4.02e8, 2.37e9, 0.55, 1.13}, {}, {}},
           {{"Prime", {8}, 5.00e8, 2.91e9, 0.53, 1.20}, {}, {}}}};
}

/// One row of a published validation table.
struct PublishedRow {
  std::string device;
  std::string cluster;
  Strategy strategy = Strategy::single;
  Corner corner = Corner::min;
  double p_measured_w = 0.0;
  double p_analytical_w = 0.0;
  double err_analytical_pct = 0.0;
  // Approximate-model columns, single strategy only (0 otherwise).
  double p_approximate_w = 0.0;
  double err_approximate_pct = 0.0;
};

/// Single-activation rows: measured power, analytical and approximate
/// predictions with their signed errors.
inline std::vector<PublishedRow> single_strategy_rows() {
  using S = Strategy;
  using C = Corner;
  return {
      {"Samsung A16", "LITTLE", S::single, C::min, 0.100, 0.102, 1.6, 0.057, -43.3},
      {"Samsung A16", "LITTLE", S::single, C::max, 0.859, 0.846, -1.5, 3.630, 322.0},
      {"Samsung A16", "big", S::single, C::min, 0.206, 0.211, 2.5, 0.118, -42.5},
      {"Samsung A16", "big", S::single, C::max, 0.862, 0.841, -2.4, 3.310, 284.0},
      {"Google Pixel 8 Pro", "LITTLE", S::single, C::min, 0.142, 0.136, -3.9, 0.077, -45.8},
      {"Google Pixel 8 Pro", "LITTLE", S::single, C::max, 1.056, 1.100, 4.3, 11.200, 959.0},
      {"Google Pixel 8 Pro", "big", S::single, C::min, 0.199, 0.193, -3.1, 0.111, -44.3},
      {"Google Pixel 8 Pro", "big", S::single, C::max, 4.639, 4.790, 3.3, 22.600, 388.0},
      {"Google Pixel 8 Pro", "Prime", S::single, C::min, 0.100, 0.103, 3.1, 0.058, -42.0},
      {"Google Pixel 8 Pro", "Prime", S::single, C::max, 3.178, 3.080, -2.9, 11.500, 262.0},
  };
}

/// Per-cluster activation rows (analytical columns only).
inline std::vector<PublishedRow> per_cluster_rows() {
  using S = Strategy;
  using C = Corner;
  return {
      {"Samsung A16", "LITTLE", S::per_cluster, C::min, 0.182, 0.099, 8.5},
      {"Samsung A16", "LITTLE", S::per_cluster, C::max, 0.549, 0.825, -7.3},
      {"Samsung A16", "big", S::per_cluster, C::min, 0.189, 0.198, 4.8},
      {"Samsung A16", "big", S::per_cluster, C::max, 0.806, 0.787, -4.4},
      {"Google Pixel 8 Pro", "LITTLE", S::per_cluster, C::min, 0.146, 0.135, -8.0},
      {"Google Pixel 8 Pro", "LITTLE", S::per_cluster, C::max, 0.995, 1.090, 9.6},
      {"Google Pixel 8 Pro", "big", S::per_cluster, C::min, 0.142, 0.157, 10.2},
      {"Google Pixel 8 Pro", "big", S::per_cluster, C::max, 4.267, 3.910, -8.5},
      {"Google Pixel 8 Pro", "Prime", S::per_cluster, C::min, 0.100, 0.102, 2.0},
      {"Google Pixel 8 Pro", "Prime", S::per_cluster, C::max, 3.114, 3.050, -2.0},
  };
}

/// Fits every cluster of `device` from its rows in `rows`.
inline DeviceProfile fitted(DeviceProfile device, const std::vector<PublishedRow>& rows) {
  for (auto& c : device.clusters) {
    double p_min = -1.0;
    double p_max = -1.0;
    for (const auto& r : rows) {
      if (r.device != device.device || r.cluster != c.spec.name) continue;
      (r.corner == Corner::min ? p_min : p_max) = r.p_measured_w;
    }
    if (p_min <= 0.0 || p_max <= 0.0)
      throw Error(ErrorKind::missing_data, device.device + " " + c.spec.name + ": corner missing");
    c.params = fit_profile({c.spec.f_min, c.spec.v_min, p_min}, {c.spec.f_max, c.spec.v_max, p_max});
  }
  return device;
}

/// Both phones fitted from their single-activation corners.
inline std::vector<DeviceProfile> fitted_phones() {
  const auto rows = single_strategy_rows();
  return {fitted(samsung_a16(), rows), fitted(pixel_8_pro(), rows)};
}

// Xeon W-2123 workstation: VID codes, decoded voltages, RAPL dynamic power
// and the fitted constants.
struct WorkstationCorner {
  double freq_hz;
  std::uint16_t vid;
  double voltage_v;
  double p_dyn_w;
  double p_analytical_w;
  double p_approximate_w;
};

inline constexpr double kWorkstationCeff = 8.2e-9;
inline constexpr double kWorkstationEpsilon = 1.91e-27;

inline std::vector<WorkstationCorner> workstation_corners() {
  return {{1.2e9, 6193, 0.756, 5.57, 5.62, 3.31}, {3.6e9, 7971, 0.973, 28.21, 27.95, 89.3}};
}

}  // namespace clusterpower::reference
