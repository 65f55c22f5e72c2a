#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "clusterpower/csv.hpp"
#include "clusterpower/profile.hpp"
#include "clusterpower/reference_devices.hpp"

using namespace clusterpower;
using Catch::Approx;

TEST_CASE("device profile JSON round trip") {
  const auto phones = reference::fitted_phones();
  for (const auto& p : phones) {
    const auto j = to_json(p);
    const auto back = profile_from_json(j);
    CHECK(back.device == p.device);
    REQUIRE(back.clusters.size() == p.clusters.size());
    for (std::size_t i = 0; i < p.clusters.size(); ++i) {
      CHECK(back.clusters[i].spec.core_ids == p.clusters[i].spec.core_ids);
      REQUIRE(back.clusters[i].params);
      CHECK(back.clusters[i].params->c_eff_mean == p.clusters[i].params->c_eff_mean);
      CHECK(back.clusters[i].params->epsilon_at_fmax == p.clusters[i].params->epsilon_at_fmax);
    }
    CHECK(to_json(back) == j);
  }
}

TEST_CASE("profile JSON field names are lower_snake_case") {
  const auto j = to_json(reference::fitted_phones()[0]);
  CHECK(j.contains("device"));
  CHECK(j.contains("soc"));
  const auto& c = j["clusters"][0];
  for (const char* k : {"name", "core_ids", "f_min", "f_max", "v_min", "v_max", "c_eff_at_fmin", "c_eff_at_fmax",
                        "c_eff_mean", "epsilon_at_fmin", "epsilon_at_fmax", "epsilon_mean"})
    CHECK(c.contains(k));
}

TEST_CASE("profile JSON errors") {
  auto kind = [](const char* text) {
    try {
      profile_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::dataset;  // sentinel: nothing thrown
  };
  CHECK(kind(R"({"device": "x"})") == ErrorKind::input_format);
  CHECK(kind(R"({"clusters": [{"name": "a", "core_ids": [0], "f_min": 1, "f_max": 2, "v_min": 0.5}]})") ==
        ErrorKind::input_format);
  CHECK(kind(R"({"clusters": [{"name": "a", "core_ids": [0], "f_min": 1, "f_max": 2, "v_min": 0.5, "v_max": 0.6,
                 "c_eff_mean": 1e-9}]})") == ErrorKind::input_format);
  CHECK(kind(R"({"clusters": [{"name": "a", "core_ids": [0], "f_min": 1, "f_max": 2, "v_min": 0.5, "v_max": 0.6},
                              {"name": "a", "core_ids": [1], "f_min": 1, "f_max": 2, "v_min": 0.5, "v_max": 0.6}]})") ==
        ErrorKind::input_format);
  CHECK(kind(R"({"clusters": [{"name": "a", "core_ids": [0], "f_min": 3, "f_max": 2, "v_min": 0.5, "v_max": 0.6}]})") ==
        ErrorKind::domain);
  CHECK(kind(R"({"clusters": [{"name": "a", "core_ids": "0", "f_min": 1, "f_max": 2, "v_min": 0.5, "v_max": 0.6}]})") ==
        ErrorKind::input_format);
}

TEST_CASE("reference fits") {
  const auto s = reference::fitted(reference::samsung_a16(), reference::single_strategy_rows());
  const auto& little = *s.find("LITTLE")->params;
  CHECK(little.c_eff_at_fmin == Approx(6.6116e-10).epsilon(1e-4));
  CHECK(little.c_eff_at_fmax == Approx(6.5462e-10).epsilon(1e-4));
  CHECK(little.epsilon_mean == Approx(4.5369e-28).epsilon(1e-4));
  CHECK_NOTHROW(reference::fitted(reference::samsung_a16(), reference::per_cluster_rows()));
  CHECK_THROWS_AS(reference::fitted(reference::samsung_a16(), {}), Error);
}

TEST_CASE("csv helpers") {
  CHECK(csv::parse_double(" 1.5e3 ", 1, "x") == 1500.0);
  CHECK_THROWS_AS(csv::parse_double("1.5x", 4, "x"), Error);
  try {
    csv::parse_double("", 7, "p_dyn_w");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    CHECK(std::string(e.what()).find("p_dyn_w") != std::string::npos);
  }
  CHECK(csv::parse_hex("0x1F", 1, "h") == 31);
  CHECK(csv::parse_hex("ff", 1, "h") == 255);
  CHECK(csv::parse_int("-3", 1, "i") == -3);
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::NumberFormat{2}(3.14159) == "3.14");

  const auto t = csv::Table::parse_string("b,a\n1,2\n\n3,4\n");
  CHECK(t.size() == 2);
  CHECK(t.number(1, "a") == 4.0);
  CHECK(t.line_number(1) == 4);
  CHECK_THROWS_AS(t.column("c"), Error);
  CHECK_THROWS_AS(csv::Table::parse_string("a,b\n1\n"), Error);
}

TEST_CASE("property: shortest formatting round-trips every double") {
  std::mt19937_64 rng(601);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    REQUIRE(csv::parse_double(csv::format_double(v), 1, "x") == v);
  }
}
