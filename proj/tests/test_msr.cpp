#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "clusterpower/msr.hpp"

using namespace clusterpower;
using namespace clusterpower::msr;
using Catch::Approx;

namespace {

Msr64 with_field(std::uint16_t field, std::uint64_t other = 0) {
  const std::uint64_t mask = std::uint64_t{0xFFFF} << 32;
  return Msr64{(other & ~mask) | (std::uint64_t{field} << 32)};
}

}  // namespace

TEST_CASE("Intel VID decode examples") {
  CHECK(decode_intel_vid(with_field(6193)).volts == Approx(0.756).margin(0.0005));
  CHECK(decode_intel_vid(with_field(7971)).volts == Approx(0.973).margin(0.0005));
  CHECK(decode_intel_vid(with_field(6193)).vid == 6193);
  const auto zero = decode_intel_vid(with_field(0));
  CHECK(zero.volts == 0.0);
  CHECK(zero.implausible);
  CHECK_FALSE(decode_intel_vid(with_field(6193)).implausible);
  CHECK(decode_intel_vid(with_field(0xFFFF)).implausible);  // ~8 V
}

TEST_CASE("AMD SVI2 decode examples") {
  const AmdSviParams p{1.55, 0.00625};
  CHECK(decode_amd_svi2(0, p).volts == 1.55);
  CHECK(decode_amd_svi2(100, p).volts == Approx(0.925).epsilon(1e-12));
  const auto sat = decode_amd_svi2(255, AmdSviParams{0.5, 0.00625});
  CHECK(sat.volts < 0.0);
  CHECK(sat.implausible);
  CHECK_THROWS_AS(decode_amd_svi2(1, AmdSviParams{0.0, 0.00625}), DomainError);
  CHECK_THROWS_AS(decode_amd_svi2(1, AmdSviParams{1.55, 0.0}), DomainError);
}

TEST_CASE("bit extraction") {
  const Msr64 m{0x0123456789ABCDEFull};
  CHECK(m.bits(0, 4) == 0xF);
  CHECK(m.bits(32, 16) == 0x4567);
  CHECK(m.bits(0, 64) == m.raw);
  CHECK(intel_vid_field(m) == 0x4567);
}

TEST_CASE("replay register source") {
  std::istringstream in(
      "# captured on a workstation\n"
      "msr_address_hex,raw_value_hex\n"
      "0x198,0x0000183100000c00\n"
      "\n"
      "0x199,0xdeadbeef\n"
      "198,1f2300002400\n");
  auto src = ReplayRegisterSource::parse(in);
  REQUIRE(src.records().size() == 3);
  auto a = src.read(kIa32PerfStatus);
  REQUIRE(a);
  CHECK(decode_intel_vid(*a).vid == 6193);
  auto b = src.read(kIa32PerfStatus);
  REQUIRE(b);
  CHECK(decode_intel_vid(*b).vid == 7971);
  CHECK_FALSE(src.read(kIa32PerfStatus));
  CHECK(src.read(0x199)->raw == 0xdeadbeefull);

  std::istringstream bad("0x198,zz\n");
  CHECK_THROWS_AS(ReplayRegisterSource::parse(bad), Error);
  std::istringstream three("0x198,1,2\n");
  CHECK_THROWS_AS(ReplayRegisterSource::parse(three), Error);
}

// ---------------------------------------------------------------------------
// Properties

TEST_CASE("property: Intel decode depends only on bits 47:32") {
  std::mt19937_64 rng(401);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t raw = rng();
    const std::uint64_t noise = rng();
    const std::uint64_t mask = std::uint64_t{0xFFFF} << 32;
    const Msr64 a{raw};
    const Msr64 b{(raw & mask) | (noise & ~mask)};
    REQUIRE(decode_intel_vid(a).volts == decode_intel_vid(b).volts);
    // Flipping any single bit outside the field changes nothing.
    const unsigned bit = static_cast<unsigned>(rng() % 48);
    const unsigned outside = bit < 32 ? bit : bit + 16;
    REQUIRE(decode_intel_vid(Msr64{raw ^ (std::uint64_t{1} << outside)}).volts == decode_intel_vid(a).volts);
  }
}

TEST_CASE("property: Intel decode is linear in the field with slope 2^-13") {
  std::mt19937_64 rng(402);
  for (int i = 0; i < 10000; ++i) {
    const auto f = static_cast<std::uint16_t>(rng() % 0xFFFF);
    const double v0 = decode_intel_vid(with_field(f, rng())).volts;
    const double v1 = decode_intel_vid(with_field(static_cast<std::uint16_t>(f + 1), rng())).volts;
    REQUIRE(v1 - v0 == std::ldexp(1.0, -13));
    REQUIRE(v0 == std::ldexp(static_cast<double>(f), -13));
  }
}

TEST_CASE("property: AMD decode strictly decreases in vid") {
  std::mt19937_64 rng(403);
  std::uniform_real_distribution<double> off(0.5, 2.0);
  std::uniform_real_distribution<double> step(1e-4, 0.02);
  for (int i = 0; i < 1000; ++i) {
    const AmdSviParams p{off(rng), step(rng)};
    for (int v = 0; v < 255; ++v)
      REQUIRE(decode_amd_svi2(static_cast<std::uint8_t>(v + 1), p).volts <
              decode_amd_svi2(static_cast<std::uint8_t>(v), p).volts);
  }
}
