#pragma once

// Per-round computation energy of a federated-learning peer.
//
//   W = tau * |D| * alpha * W_sample                 (cycles)
//   E_analytical  = C_eff * V(f)^2 * W
//   E_approximate = eps * f^2 * W
//
// Both are linear in alpha, so a peer with a fixed joule budget picks
// alpha = budget / E(alpha = 1), clamped to [0, 1]. An estimator that
// over-predicts E(alpha = 1) therefore shrinks alpha by the same factor.

#include <algorithm>
#include <cmath>
#include <string>

#include "clusterpower/error.hpp"
#include "clusterpower/powermodel.hpp"

namespace clusterpower::fl {

inline double compute_workload(double tau, double dataset_size, double alpha, double w_sample) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha", "must lie in [0, 1]");
  clusterpower::detail::require_positive(tau, "tau");
  clusterpower::detail::require_positive(dataset_size, "dataset_size");
  clusterpower::detail::require_positive(w_sample, "w_sample");
  return tau * dataset_size * alpha * w_sample;
}

inline double energy_analytical(double c_eff, double v, double workload_cycles) {
  clusterpower::detail::require_positive(c_eff, "c_eff");
  clusterpower::detail::require_positive(v, "v");
  clusterpower::detail::require_positive(workload_cycles, "workload");
  return c_eff * v * v * workload_cycles;
}

inline double energy_approximate(double epsilon, double f, double workload_cycles) {
  clusterpower::detail::require_positive(epsilon, "epsilon");
  clusterpower::detail::require_positive(f, "f");
  clusterpower::detail::require_positive(workload_cycles, "workload");
  return epsilon * f * f * workload_cycles;
}

struct PeerProfile {
  std::string id;
  ClusterSpec cluster;
  FittedParams params;
  double freq_hz = 0.0;
  double dataset_size = 0.0;
  double w_sample = 1.0e6;
  double budget_j = 0.0;  // per round

  void validate() const {
    cluster.validate();
    if (freq_hz < cluster.f_min || freq_hz > cluster.f_max)
      throw Error(ErrorKind::range, "peer " + id + ": frequency outside the cluster range");
    clusterpower::detail::require_positive(dataset_size, "dataset_size");
    clusterpower::detail::require_positive(w_sample, "w_sample");
    if (!(budget_j >= 0.0) || !std::isfinite(budget_j)) throw DomainError("budget_j", "must be >= 0");
  }
};

/// Energy of one round at the given alpha; zero workload costs nothing.
inline double round_energy(const PeerProfile& p, ModelKind kind, double tau, double alpha) {
  const double w = compute_workload(tau, p.dataset_size, alpha, p.w_sample);
  if (w == 0.0) return 0.0;
  if (kind == ModelKind::analytical)
    return energy_analytical(p.params.c_eff_mean, interpolate_voltage(p.cluster, p.freq_hz), w);
  return energy_approximate(p.params.epsilon_mean, p.freq_hz, w);
}

inline double select_alpha(const PeerProfile& p, ModelKind estimator, double tau) {
  const double full = round_energy(p, estimator, tau, 1.0);
  if (!(full > 0.0))
    throw Error(ErrorKind::degenerate_peer, "peer " + p.id + ": estimated full-workload energy is zero");
  return std::clamp(p.budget_j / full, 0.0, 1.0);
}

}  // namespace clusterpower::fl
