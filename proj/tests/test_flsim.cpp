#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "clusterpower/flsim/simulator.hpp"
#include "clusterpower/reference_devices.hpp"

using namespace clusterpower;
using namespace clusterpower::fl;
using Catch::Approx;

namespace {

constexpr int kCases = 1000;

PeerProfile samsung_little_peer(double budget) {
  const auto dev = reference::fitted(reference::samsung_a16(), reference::single_strategy_rows());
  PeerProfile p;
  p.id = "p";
  p.cluster = dev.clusters[0].spec;
  p.params = *dev.clusters[0].params;
  p.freq_hz = p.cluster.f_max;
  p.dataset_size = 1000;
  p.w_sample = 1e6;
  p.budget_j = budget;
  return p;
}

FlConfig small_config() {
  FlConfig c;
  c.n_peers = 3;
  c.max_rounds = 4;
  c.target_accuracy = 0.999;
  c.dataset.blobs = {600, 300, 8, 3, 1.0};
  return c;
}

}  // namespace

TEST_CASE("workload examples") {
  CHECK(compute_workload(1, 1000, 1.0, 1e6) == 1e9);
  CHECK(compute_workload(3, 77, 0.0, 2e6) == 0.0);
  CHECK(compute_workload(2, 500, 0.5, 2e6) == 1e9);
  CHECK_THROWS_AS(compute_workload(1, 10, 1.5, 1e6), DomainError);
  CHECK_THROWS_AS(compute_workload(1, 10, -0.1, 1e6), DomainError);
}

TEST_CASE("energy examples") {
  CHECK(energy_analytical(6.58e-10, 0.81, 1e9) == Approx(0.4317).margin(1e-4));
  // Cross-check through the power model: P(c, v, f) * W / f.
  CHECK(energy_analytical(6.58e-10, 0.81, 1e9) == Approx(predict_analytical(6.58e-10, 0.81, 2e9) * 1e9 / 2e9));
  CHECK(energy_analytical(3e-10, 1.0, 5e8) == Approx(3e-10 * 5e8));
  CHECK(energy_analytical(3e-10, 0.7, 2e9) == Approx(2.0 * energy_analytical(3e-10, 0.7, 1e9)));
  CHECK(energy_approximate(4.537e-28, 2e9, 1e9) == Approx(1.815).margin(1e-3));
  CHECK(energy_approximate(2e-3, 1.0, 4.0) == Approx(8e-3));
  CHECK_THROWS_AS(energy_analytical(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(energy_approximate(1.0, 1.0, 0.0), DomainError);
  // Energy ratio equals the power-prediction ratio at the corner.
  const double c = 6.579e-10, e = 4.5369e-28, v = 0.81, f = 2e9, w = 3e9;
  CHECK(energy_approximate(e, f, w) / energy_analytical(c, v, w) ==
        Approx(predict_approximate(e, f) / predict_analytical(c, v, f)).epsilon(1e-12));
}

TEST_CASE("alpha selection examples") {
  auto p = samsung_little_peer(0.0);
  const double full = round_energy(p, ModelKind::analytical, 1.0, 1.0);
  p.budget_j = full;
  CHECK(select_alpha(p, ModelKind::analytical, 1.0) == 1.0);
  p.budget_j = 0.0;
  CHECK(select_alpha(p, ModelKind::analytical, 1.0) == 0.0);
  CHECK(round_energy(p, ModelKind::analytical, 1.0, 0.0) == 0.0);
  p.budget_j = 10.0 * full;
  CHECK(select_alpha(p, ModelKind::analytical, 1.0) == 1.0);

  // Over-prediction by r shrinks alpha by exactly 1/r.
  p.budget_j = 0.8 * full;
  const double r = round_energy(p, ModelKind::approximate, 1.0, 1.0) / full;
  CHECK(r == Approx(4.2).margin(0.05));
  CHECK(select_alpha(p, ModelKind::approximate, 1.0) ==
        Approx(select_alpha(p, ModelKind::analytical, 1.0) / r).epsilon(1e-12));
}

TEST_CASE("peer validation") {
  auto p = samsung_little_peer(1.0);
  CHECK_NOTHROW(p.validate());
  p.freq_hz = 3e9;
  CHECK_THROWS_AS(p.validate(), Error);
  p = samsung_little_peer(-1.0);
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("config JSON parsing") {
  const auto c = config_from_json(nlohmann::json::parse(R"({
      "n_peers": 4, "tau": 2, "target_accuracy": 0.7, "max_rounds": 9, "estimator": "approximate",
      "ground_truth": "analytical", "seed": 12, "shrink": "samples", "operating_point": "f_min",
      "dataset": {"kind": "blobs", "n_train": 100, "n_test": 50, "n_features": 4, "n_classes": 2}})"));
  CHECK(c.n_peers == 4);
  CHECK(c.tau == 2);
  CHECK(c.estimator == ModelKind::approximate);
  CHECK(c.seed == 12);
  CHECK(c.shrink == ShrinkMode::samples);
  CHECK(c.operating_point == OperatingPoint::f_min);
  CHECK(c.dataset.blobs.n_features == 4);
  CHECK(c.dataset.blobs.class_spread == 0.75);

  auto bad = [](const char* text) {
    try {
      config_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.kind() == ErrorKind::input_format;
    }
    return false;
  };
  CHECK(bad(R"({"target_accuracy": 1.0})"));
  CHECK(bad(R"({"target_accuracy": 0})"));
  CHECK(bad(R"({"tau": 0})"));
  CHECK(bad(R"({"ground_truth": "approximate"})"));
  CHECK(bad(R"({"estimator": "oracle"})"));
  CHECK(bad(R"({"n_peers": "ten"})"));
  CHECK(bad(R"([1, 2])"));
}

TEST_CASE("shards are disjoint, cover the training set and are near-equal") {
  const auto shards = make_shards(1003, 10, 5);
  std::set<std::size_t> seen;
  for (const auto& s : shards) {
    CHECK((s.size() == 100 || s.size() == 101));
    for (auto i : s) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 1003);
  CHECK(make_shards(1003, 10, 5) == shards);
  CHECK_THROWS_AS(make_shards(3, 10, 0), Error);
}

TEST_CASE("default peers use the phone clusters round-robin") {
  FlConfig c;
  const auto peers = make_peers(c, reference::fitted_phones(), std::vector<std::size_t>(7, 100));
  REQUIRE(peers.size() == 7);
  CHECK(peers[0].id == "peer-00");
  CHECK(peers[0].cluster.name == "LITTLE");
  CHECK(peers[2].cluster.name == "LITTLE");  // Pixel LITTLE
  CHECK(peers[4].cluster.name == "Prime");
  CHECK(peers[5].cluster.name == peers[0].cluster.name);
  for (const auto& p : peers) {
    CHECK(p.freq_hz == p.cluster.f_max);
    CHECK(select_alpha(p, ModelKind::analytical, 1.0) == Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("simulation is deterministic and records are consistent") {
  const auto c = small_config();
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  std::ostringstream sa, sb;
  write_records_csv(sa, a);
  write_records_csv(sb, b);
  CHECK(sa.str() == sb.str());
  REQUIRE(a.rounds.size() == 4);
  double prev = 0.0;
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    const auto& r = a.rounds[i];
    CHECK(r.round == i + 1);
    CHECK(r.cumulative_true_energy_j >= prev);
    prev = r.cumulative_true_energy_j;
    for (const auto& p : r.peers) {
      CHECK(p.alpha >= 0.0);
      CHECK(p.alpha <= 1.0);
      CHECK(p.e_estimated_j == Approx(p.e_true_j));  // analytical estimator
    }
  }
  // One peer row per peer plus one aggregate row per round, plus the header.
  const auto text = sa.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == 1 + 4 * (3 + 1));
}

TEST_CASE("zero rounds yields no records") {
  auto c = small_config();
  c.max_rounds = 0;
  const auto r = run_simulation(c);
  CHECK(r.rounds.empty());
  CHECK_FALSE(r.reached_target);
  std::ostringstream out;
  write_records_csv(out, r);
  CHECK(out.str() == std::string(kRecordHeader) + "\n");
}

TEST_CASE("the run halts once the target accuracy is met") {
  auto c = small_config();
  c.target_accuracy = 0.5;
  c.max_rounds = 30;
  const auto r = run_simulation(c);
  CHECK(r.reached_target);
  CHECK(r.rounds.back().global_accuracy >= 0.5);
  for (std::size_t i = 0; i + 1 < r.rounds.size(); ++i) CHECK(r.rounds[i].global_accuracy < 0.5);
}

TEST_CASE("divergence names the round") {
  auto c = small_config();
  c.learning_rate = 1e306;
  try {
    run_simulation(c);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.round() == 1);
    CHECK(std::string(e.what()).find("round 1") != std::string::npos);
  }
}

TEST_CASE("peers with alpha zero do not train") {
  auto c = small_config();
  c.alpha_override = 0.0;
  const auto r = run_simulation(c);
  for (const auto& rec : r.rounds) {
    CHECK(rec.cumulative_true_energy_j == 0.0);
    CHECK(rec.global_accuracy == r.rounds.front().global_accuracy);
  }
}

TEST_CASE("aggregation with a single peer reduces to that peer's model") {
  std::mt19937_64 rng(501);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < kCases; ++i) {
    LinearModel g(5, 3), local(5, 3);
    for (auto& w : g.w) w = n(rng);
    for (auto& w : local.w) w = n(rng);
    const auto out = aggregate(g, {local}, {5}, {137.0});
    REQUIRE(out.w == local.w);
  }
}

TEST_CASE("width-mode aggregation averages each row over the peers that trained it") {
  LinearModel g(3, 1);
  g.w = {9, 9, 9, 9};
  LinearModel a(3, 1), b(3, 1);
  a.w = {1, 1, 0, 2};  // width 2 (rows 0, 1) + bias
  b.w = {3, 0, 0, 4};  // width 1 (row 0) + bias
  const auto out = aggregate(g, {a, b}, {2, 1}, {1.0, 3.0});
  CHECK(out.w[0] == Approx(0.25 * 1 + 0.75 * 3));
  CHECK(out.w[1] == 1.0);  // only a trained row 1
  CHECK(out.w[2] == 9.0);  // nobody trained row 2
  CHECK(out.w[3] == Approx(0.25 * 2 + 0.75 * 4));
}

TEST_CASE("with alpha forced to 1 the simulator is plain federated averaging") {
  auto c = small_config();
  c.alpha_override = 1.0;
  c.max_rounds = 3;
  const auto data = load_dataset(c);
  const auto shards = make_shards(data.n_train(), c.n_peers, c.seed);
  std::vector<std::size_t> sizes;
  for (const auto& s : shards) sizes.push_back(s.size());
  const auto peers = make_peers(c, reference::fitted_phones(), sizes);
  const auto sim = run_simulation(c, peers, data);

  // Reference: each round every peer runs one epoch from the global model
  // with its own shuffled order; the server takes the size-weighted mean.
  LinearModel global(data.n_features, data.n_classes);
  for (std::size_t round = 1; round <= c.max_rounds; ++round) {
    std::vector<double> acc(global.w.size(), 0.0);
    double total = 0.0;
    for (std::size_t p = 0; p < shards.size(); ++p) {
      auto rng = fl::detail::peer_rng(c.seed, round, p);
      auto order = shards[p];
      LinearModel local = global;
      std::shuffle(order.begin(), order.end(), rng);
      sgd_epoch(local, data, order, data.n_features, {c.learning_rate, c.batch_size});
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += static_cast<double>(order.size()) * local.w[k];
      total += static_cast<double>(order.size());
    }
    for (std::size_t k = 0; k < acc.size(); ++k) global.w[k] = acc[k] / total;
    CHECK(sim.rounds[round - 1].global_accuracy == Approx(test_accuracy(global, data)).margin(1.0 / 300));
  }
}

TEST_CASE("samples mode trains on an alpha fraction of the shard") {
  auto c = small_config();
  c.shrink = ShrinkMode::samples;
  const auto r = run_simulation(c);
  REQUIRE(r.rounds.size() == 4);
  CHECK(r.rounds[0].peers[0].alpha == Approx(0.8).epsilon(1e-12));
}

TEST_CASE("learner sanity") {
  const auto d = make_blobs({2000, 1000, 4, 3, 2.0}, 9);
  LinearModel m(4, 3);
  std::vector<std::size_t> idx(d.n_train());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const double first = sgd_epoch(m, d, idx, 4, {});
  const double second = sgd_epoch(m, d, idx, 4, {});
  CHECK(second < first);
  CHECK(test_accuracy(m, d) > 0.8);
  // Width 0 leaves every feature row untouched.
  LinearModel narrow(4, 3);
  sgd_epoch(narrow, d, idx, 0, {});
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < 3; ++k) CHECK(narrow.row(j)[k] == 0.0);
}

TEST_CASE("blobs are seed-deterministic and IDX loading reports failures") {
  const auto a = make_blobs({50, 20, 3, 2, 1.0}, 4);
  const auto b = make_blobs({50, 20, 3, 2, 1.0}, 4);
  CHECK(a.train_x == b.train_x);
  CHECK(a.test_y == b.test_y);
  CHECK_THROWS_AS(make_blobs({0, 20, 3, 2, 1.0}, 4), Error);
  CHECK_THROWS_AS(load_idx({"/nonexistent/a", "/nonexistent/b", "/nonexistent/c", "/nonexistent/d"}), Error);
}

// ---------------------------------------------------------------------------
// Properties

TEST_CASE("property: energies are linear in workload and hence in alpha") {
  std::mt19937_64 rng(502);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < kCases; ++i) {
    const double c = 1e-10 * (1 + 9 * u(rng)), v = 0.5 + u(rng), f = 1e9 * (0.3 + 2 * u(rng));
    const double e = 1e-28 * (1 + 9 * u(rng));
    const double w1 = 1e9 * u(rng), w2 = 1e9 * u(rng);
    REQUIRE(energy_analytical(c, v, w1 + w2) ==
            Approx(energy_analytical(c, v, w1) + energy_analytical(c, v, w2)).epsilon(1e-12));
    REQUIRE(energy_approximate(e, f, w1 + w2) ==
            Approx(energy_approximate(e, f, w1) + energy_approximate(e, f, w2)).epsilon(1e-12));
    auto p = samsung_little_peer(1.0);
    const double a = u(rng);
    REQUIRE(round_energy(p, ModelKind::analytical, 2.0, a) ==
            Approx(a * round_energy(p, ModelKind::analytical, 2.0, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("property: an over-predicting estimator strictly shrinks alpha") {
  std::mt19937_64 rng(503);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < kCases; ++i) {
    auto p = samsung_little_peer(0.0);
    p.freq_hz = p.cluster.f_min + u(rng) * (p.cluster.f_max - p.cluster.f_min);
    const double truth = round_energy(p, ModelKind::analytical, 1.0, 1.0);
    const double est = round_energy(p, ModelKind::approximate, 1.0, 1.0);
    p.budget_j = truth * (0.05 + 0.9 * u(rng));
    const double a_true = select_alpha(p, ModelKind::analytical, 1.0);
    const double a_est = select_alpha(p, ModelKind::approximate, 1.0);
    if (est > truth) {
      REQUIRE(a_est < a_true);
      REQUIRE(a_est == Approx(a_true * truth / est).epsilon(1e-12));
    } else {
      REQUIRE(a_est >= a_true);
    }
  }
}
