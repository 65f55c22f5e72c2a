#pragma once

// Deterministic energy-aware federated averaging.
//
// Every round each peer picks its shrink factor alpha from a fixed per-round
// joule budget and the configured energy estimator, trains the shared linear
// model locally for tau epochs at that alpha, and the server averages the
// parameters weighted by dataset size. The energy actually spent is always
// charged with the analytical model; the estimator only steers alpha.
//
// Shrink modes:
//   width    the peer trains a sub-model over the leading ceil(alpha * d)
//            input features (plus bias). Each parameter row is averaged over
//            the peers that trained it; untouched rows keep the global value.
//   samples  the peer trains the full model on a random ceil(alpha * n)
//            subset of its shard, redrawn every round.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "clusterpower/csv.hpp"
#include "clusterpower/flsim/dataset.hpp"
#include "clusterpower/flsim/energy.hpp"
#include "clusterpower/flsim/learner.hpp"
#include "clusterpower/profile.hpp"
#include "clusterpower/reference_devices.hpp"

namespace clusterpower::fl {

enum class ShrinkMode { width, samples };
enum class OperatingPoint { f_min, f_max };

inline ShrinkMode parse_shrink_mode(std::string_view s) {
  if (s == "width") return ShrinkMode::width;
  if (s == "samples") return ShrinkMode::samples;
  throw Error(ErrorKind::input_format, "unknown shrink mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ShrinkMode m) { return m == ShrinkMode::width ? "width" : "samples"; }

struct DatasetConfig {
  std::string kind = "blobs";  // blobs | idx
  BlobsSpec blobs;
  IdxPaths idx;
};

struct FlConfig {
  std::size_t n_peers = 10;
  std::size_t tau = 1;
  double target_accuracy = 0.8;
  std::size_t max_rounds = 50;
  ModelKind estimator = ModelKind::analytical;
  std::uint64_t seed = 0;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  double w_sample = 1.0e6;
  double budget_alpha = 0.8;  // budget = analytical cost of this alpha
  ShrinkMode shrink = ShrinkMode::width;
  std::optional<double> alpha_override;
  OperatingPoint operating_point = OperatingPoint::f_max;
  DatasetConfig dataset;
  std::vector<std::string> profile_paths;  // empty: built-in phone profiles

  void validate() const {
    if (n_peers == 0) throw Error(ErrorKind::input_format, "n_peers must be >= 1");
    if (tau == 0) throw Error(ErrorKind::input_format, "tau must be >= 1");
    if (!(target_accuracy > 0.0 && target_accuracy < 1.0))
      throw Error(ErrorKind::input_format, "target_accuracy must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::input_format, "learning_rate must be > 0");
    if (batch_size == 0) throw Error(ErrorKind::input_format, "batch_size must be >= 1");
    if (!(w_sample > 0.0)) throw Error(ErrorKind::input_format, "w_sample must be > 0");
    if (!(budget_alpha >= 0.0 && budget_alpha <= 1.0))
      throw Error(ErrorKind::input_format, "budget_alpha must lie in [0, 1]");
    if (alpha_override && !(*alpha_override >= 0.0 && *alpha_override <= 1.0))
      throw Error(ErrorKind::input_format, "alpha_override must lie in [0, 1]");
    if (dataset.kind != "blobs" && dataset.kind != "idx")
      throw Error(ErrorKind::input_format, "dataset.kind must be 'blobs' or 'idx'");
  }
};

inline FlConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::input_format, "FL config must be a JSON object");
  FlConfig c;
  try {
    c.n_peers = j.value("n_peers", c.n_peers);
    c.tau = j.value("tau", c.tau);
    c.target_accuracy = j.value("target_accuracy", c.target_accuracy);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    if (j.contains("estimator")) c.estimator = parse_model_kind(j["estimator"].get<std::string>());
    if (j.contains("ground_truth") && j["ground_truth"].get<std::string>() != "analytical")
      throw Error(ErrorKind::input_format, "ground_truth is fixed to 'analytical'");
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.w_sample = j.value("w_sample", c.w_sample);
    c.budget_alpha = j.value("budget_alpha", c.budget_alpha);
    if (j.contains("shrink")) c.shrink = parse_shrink_mode(j["shrink"].get<std::string>());
    if (j.contains("alpha_override") && !j["alpha_override"].is_null())
      c.alpha_override = j["alpha_override"].get<double>();
    if (j.contains("operating_point")) {
      const auto op = j["operating_point"].get<std::string>();
      if (op == "f_min") c.operating_point = OperatingPoint::f_min;
      else if (op == "f_max") c.operating_point = OperatingPoint::f_max;
      else throw Error(ErrorKind::input_format, "operating_point must be 'f_min' or 'f_max'");
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      c.dataset.kind = d.value("kind", std::string("blobs"));
      auto& b = c.dataset.blobs;
      b.n_train = d.value("n_train", b.n_train);
      b.n_test = d.value("n_test", b.n_test);
      b.n_features = d.value("n_features", b.n_features);
      b.n_classes = d.value("n_classes", b.n_classes);
      b.class_spread = d.value("class_spread", b.class_spread);
      c.dataset.idx.train_images = d.value("train_images", std::string{});
      c.dataset.idx.train_labels = d.value("train_labels", std::string{});
      c.dataset.idx.test_images = d.value("test_images", std::string{});
      c.dataset.idx.test_labels = d.value("test_labels", std::string{});
    }
    if (j.contains("profiles")) c.profile_paths = j["profiles"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::input_format, std::string("FL config: ") + e.what());
  }
  c.validate();
  return c;
}

struct PeerRound {
  std::string peer_id;
  double alpha = 0.0;
  double workload_cycles = 0.0;
  double e_estimated_j = 0.0;
  double e_true_j = 0.0;
};

struct FlRoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<PeerRound> peers;
  double global_accuracy = 0.0;
  double cumulative_true_energy_j = 0.0;
};

struct FlRunResult {
  std::vector<FlRoundRecord> rounds;
  bool reached_target = false;

  double final_accuracy() const { return rounds.empty() ? 0.0 : rounds.back().global_accuracy; }
  double cumulative_true_energy_j() const {
    return rounds.empty() ? 0.0 : rounds.back().cumulative_true_energy_j;
  }
};

inline Dataset load_dataset(const FlConfig& c) {
  if (c.dataset.kind == "idx") return load_idx(c.dataset.idx);
  return make_blobs(c.dataset.blobs, c.seed);
}

/// Seeded shuffle of the training indices split into near-equal contiguous
/// shards (the first n % peers shards get one extra sample).
inline std::vector<std::vector<std::size_t>> make_shards(std::size_t n_train, std::size_t n_peers,
                                                         std::uint64_t seed) {
  if (n_peers == 0 || n_train < n_peers)
    throw Error(ErrorKind::dataset, "training set smaller than the number of peers");
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5A4Du};
  std::mt19937_64 rng(seq);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> shards(n_peers);
  const std::size_t base = n_train / n_peers;
  const std::size_t extra = n_train % n_peers;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < n_peers; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    shards[p].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                     idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return shards;
}

/// Peers assigned round-robin to the clusters of `devices` (in document
/// order), each running at the configured corner with a budget equal to the
/// analytical cost of `budget_alpha`.
inline std::vector<PeerProfile> make_peers(const FlConfig& c, const std::vector<DeviceProfile>& devices,
                                           const std::vector<std::size_t>& shard_sizes) {
  std::vector<const ClusterProfile*> clusters;
  for (const auto& d : devices)
    for (const auto& cl : d.clusters) {
      if (!cl.params)
        throw Error(ErrorKind::missing_data, d.device + " " + cl.spec.name + ": profile has no fitted parameters");
      clusters.push_back(&cl);
    }
  if (clusters.empty()) throw Error(ErrorKind::missing_data, "no clusters to assign peers to");

  std::vector<PeerProfile> peers;
  for (std::size_t i = 0; i < shard_sizes.size(); ++i) {
    const auto& cl = *clusters[i % clusters.size()];
    PeerProfile p;
    char id[32];
    std::snprintf(id, sizeof(id), "peer-%02zu", i);
    p.id = id;
    p.cluster = cl.spec;
    p.params = *cl.params;
    p.freq_hz = c.operating_point == OperatingPoint::f_max ? cl.spec.f_max : cl.spec.f_min;
    p.dataset_size = static_cast<double>(shard_sizes[i]);
    p.w_sample = c.w_sample;
    p.budget_j = c.budget_alpha * round_energy(p, ModelKind::analytical, static_cast<double>(c.tau), 1.0);
    peers.push_back(std::move(p));
  }
  return peers;
}

inline std::vector<DeviceProfile> load_devices(const FlConfig& c) {
  if (c.profile_paths.empty()) return reference::fitted_phones();
  std::vector<DeviceProfile> out;
  for (const auto& p : c.profile_paths) out.push_back(load_profile(p));
  return out;
}

namespace detail {

inline std::mt19937_64 peer_rng(std::uint64_t seed, std::size_t round, std::size_t peer) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(peer), 0x7EA1u};
  return std::mt19937_64(seq);
}

inline std::size_t fraction_count(double alpha, std::size_t n) {
  if (alpha <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9)));
}

}  // namespace detail

/// Trains one peer for a round starting from the global model. Returns the
/// local model and the width it trained.
inline std::pair<LinearModel, std::size_t> local_update(const FlConfig& c, const LinearModel& global,
                                                        const Dataset& data, const std::vector<std::size_t>& shard,
                                                        double alpha, std::size_t round, std::size_t peer) {
  auto rng = detail::peer_rng(c.seed, round, peer);
  LinearModel local = global;
  std::vector<std::size_t> pool = shard;
  std::size_t width = data.n_features;
  if (c.shrink == ShrinkMode::width) {
    width = std::max<std::size_t>(1, detail::fraction_count(alpha, data.n_features));
  } else {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::max<std::size_t>(1, detail::fraction_count(alpha, pool.size())));
  }
  const SgdOptions sgd{c.learning_rate, c.batch_size};
  for (std::size_t e = 0; e < c.tau; ++e) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const double loss = sgd_epoch(local, data, pool, width, sgd);
    if (!std::isfinite(loss)) throw DivergenceError(round);
  }
  for (double w : local.w)
    if (!std::isfinite(w)) throw DivergenceError(round);
  return {std::move(local), width};
}

/// Row-wise weighted average over the peers that trained each row.
inline LinearModel aggregate(const LinearModel& global, const std::vector<LinearModel>& locals,
                             const std::vector<std::size_t>& widths, const std::vector<double>& weights) {
  LinearModel out = global;
  const std::size_t k = global.n_classes;
  for (std::size_t j = 0; j <= global.n_features; ++j) {
    const bool bias = j == global.bias_row();
    double total = 0.0;
    for (std::size_t p = 0; p < locals.size(); ++p)
      if (bias || widths[p] > j) total += weights[p];
    if (total <= 0.0) continue;
    double* dst = out.row(j);
    std::fill(dst, dst + k, 0.0);
    for (std::size_t p = 0; p < locals.size(); ++p) {
      if (!(bias || widths[p] > j)) continue;
      const double w = weights[p] / total;
      const double* src = locals[p].row(j);
      for (std::size_t c = 0; c < k; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

inline FlRunResult run_simulation(const FlConfig& c, const std::vector<PeerProfile>& peers, const Dataset& data) {
  c.validate();
  if (peers.empty()) throw Error(ErrorKind::input_format, "at least one peer is required");
  const auto shards = make_shards(data.n_train(), peers.size(), c.seed);
  for (std::size_t i = 0; i < peers.size(); ++i) {
    peers[i].validate();
    if (peers[i].dataset_size != static_cast<double>(shards[i].size()))
      throw Error(ErrorKind::input_format, "peer " + peers[i].id + ": dataset_size does not match its shard");
  }

  const double tau = static_cast<double>(c.tau);
  FlRunResult result;
  LinearModel global(data.n_features, data.n_classes);
  double cumulative = 0.0;

  for (std::size_t round = 1; round <= c.max_rounds; ++round) {
    FlRoundRecord rec;
    rec.round = round;
    std::vector<LinearModel> locals;
    std::vector<std::size_t> widths;
    std::vector<double> weights;
    for (std::size_t i = 0; i < peers.size(); ++i) {
      const auto& p = peers[i];
      const double alpha = c.alpha_override ? *c.alpha_override : select_alpha(p, c.estimator, tau);
      PeerRound pr;
      pr.peer_id = p.id;
      pr.alpha = alpha;
      pr.workload_cycles = compute_workload(tau, p.dataset_size, alpha, p.w_sample);
      pr.e_estimated_j = round_energy(p, c.estimator, tau, alpha);
      pr.e_true_j = round_energy(p, ModelKind::analytical, tau, alpha);
      cumulative += pr.e_true_j;
      rec.peers.push_back(pr);
      if (alpha <= 0.0) continue;
      auto [local, width] = local_update(c, global, data, shards[i], alpha, round, i);
      locals.push_back(std::move(local));
      widths.push_back(width);
      weights.push_back(p.dataset_size);
    }
    if (!locals.empty()) global = aggregate(global, locals, widths, weights);
    rec.global_accuracy = test_accuracy(global, data);
    rec.cumulative_true_energy_j = cumulative;
    result.rounds.push_back(std::move(rec));
    if (result.rounds.back().global_accuracy >= c.target_accuracy) {
      result.reached_target = true;
      break;
    }
  }
  return result;
}

/// Builds the dataset and peers described by the config and runs it.
inline FlRunResult run_simulation(const FlConfig& c) {
  c.validate();
  const auto data = load_dataset(c);
  const auto shards = make_shards(data.n_train(), c.n_peers, c.seed);
  std::vector<std::size_t> sizes;
  for (const auto& s : shards) sizes.push_back(s.size());
  const auto peers = make_peers(c, load_devices(c), sizes);
  return run_simulation(c, peers, data);
}

inline constexpr const char* kRecordHeader =
    "round,peer_id,alpha,workload_cycles,e_estimated_j,e_true_j,global_accuracy,cumulative_true_energy_j";

/// Peer rows followed by one aggregate row (empty peer_id, mean alpha,
/// summed workload and energies) per round.
inline void write_records_csv(std::ostream& out, const FlRunResult& r, const csv::NumberFormat& fmt = {}) {
  out << kRecordHeader << '\n';
  for (const auto& rec : r.rounds) {
    double alpha = 0.0, work = 0.0, est = 0.0, tru = 0.0;
    for (const auto& p : rec.peers) {
      out << rec.round << ',' << p.peer_id << ',' << fmt(p.alpha) << ',' << fmt(p.workload_cycles) << ','
          << fmt(p.e_estimated_j) << ',' << fmt(p.e_true_j) << ',' << fmt(rec.global_accuracy) << ','
          << fmt(rec.cumulative_true_energy_j) << '\n';
      alpha += p.alpha;
      work += p.workload_cycles;
      est += p.e_estimated_j;
      tru += p.e_true_j;
    }
    alpha /= static_cast<double>(std::max<std::size_t>(1, rec.peers.size()));
    out << rec.round << ",," << fmt(alpha) << ',' << fmt(work) << ',' << fmt(est) << ',' << fmt(tru) << ','
        << fmt(rec.global_accuracy) << ',' << fmt(rec.cumulative_true_energy_j) << '\n';
  }
}

/// Cumulative true energy when the target was first met, or the energy spent
/// so far (a lower bound) when it never was.
struct EnergyToTarget {
  double joules = 0.0;
  bool reached = false;
  std::size_t rounds = 0;
};

inline EnergyToTarget energy_to_target(const FlRunResult& r) {
  return {r.cumulative_true_energy_j(), r.reached_target, r.rounds.size()};
}

}  // namespace clusterpower::fl
