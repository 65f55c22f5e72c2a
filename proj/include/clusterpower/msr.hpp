#pragma once

// x86 voltage-identifier decoding.
//
// Intel: IA32_PERF_STATUS (0x198) bits 47:32 hold the core VID in units of
// 2^-13 V. AMD: SVI2 VID codes map linearly downwards from an offset,
// V = v_offset - k_step * vid, with generation-specific constants.

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>
#include <utility>

#include "clusterpower/csv.hpp"
#include "clusterpower/error.hpp"

namespace clusterpower::msr {

inline constexpr std::uint32_t kIa32PerfStatus = 0x198;
inline constexpr double kImplausibleLowV = 0.2;
inline constexpr double kImplausibleHighV = 1.6;

/// Raw 64-bit model-specific-register value.
struct Msr64 {
  std::uint64_t raw = 0;

  constexpr std::uint64_t bits(unsigned lsb, unsigned width) const {
    const std::uint64_t mask = width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
    return (raw >> lsb) & mask;
  }
};

struct AmdSviParams {
  double v_offset = 0.0;
  double k_step = 0.0;
};

struct VoltageReading {
  std::uint32_t vid = 0;
  double volts = 0.0;
  bool implausible = false;  // outside [0.2, 1.6] V
};

constexpr bool is_implausible(double v) { return v < kImplausibleLowV || v > kImplausibleHighV; }

constexpr std::uint16_t intel_vid_field(Msr64 m) { return static_cast<std::uint16_t>(m.bits(32, 16)); }

inline VoltageReading decode_intel_vid(Msr64 m) {
  VoltageReading r;
  r.vid = intel_vid_field(m);
  r.volts = static_cast<double>(r.vid) / 8192.0;
  r.implausible = is_implausible(r.volts);
  return r;
}

inline VoltageReading decode_amd_svi2(std::uint8_t vid, AmdSviParams params) {
  if (!(params.v_offset > 0.0)) throw DomainError("v_offset", "must be strictly positive");
  if (!(params.k_step > 0.0)) throw DomainError("k_step", "must be strictly positive");
  VoltageReading r;
  r.vid = vid;
  r.volts = params.v_offset - params.k_step * static_cast<double>(vid);
  r.implausible = is_implausible(r.volts);
  return r;
}

/// Source of register values. Live access needs privileges and is
/// host-specific, so only the replayable implementation lives here.
class RegisterSource {
 public:
  virtual ~RegisterSource() = default;
  /// Next value of `address`, or nullopt once exhausted.
  virtual std::optional<Msr64> read(std::uint32_t address) = 0;
};

struct RegisterRecord {
  std::uint32_t address = 0;
  Msr64 value;
};

/// Replays `msr_address_hex,raw_value_hex` lines. Successive reads of one
/// address return its recorded values in file order.
class ReplayRegisterSource final : public RegisterSource {
 public:
  explicit ReplayRegisterSource(std::vector<RegisterRecord> records) : records_(std::move(records)) {}

  static ReplayRegisterSource parse(std::istream& in) {
    std::vector<RegisterRecord> recs;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = csv::trim(line);
      if (body.empty() || body.front() == '#') continue;
      const bool header_allowed = std::exchange(first, false);
      const auto fields = csv::split(body);
      if (fields.size() != 2)
        throw Error(ErrorKind::input_format, csv::row_context(line_no) + "expected 'address,value'");
      // Tolerate a header line.
      if (header_allowed && fields[0].find_first_not_of("0123456789abcdefABCDEFxX") != std::string_view::npos)
        continue;
      const auto addr = csv::parse_hex(fields[0], line_no, "msr_address_hex");
      if (addr > 0xFFFFFFFFull)
        throw Error(ErrorKind::input_format, csv::row_context(line_no) + "address exceeds 32 bits");
      recs.push_back({static_cast<std::uint32_t>(addr), Msr64{csv::parse_hex(fields[1], line_no, "raw_value_hex")}});
    }
    return ReplayRegisterSource(std::move(recs));
  }

  std::optional<Msr64> read(std::uint32_t address) override {
    auto& pos = cursor_[address];
    for (; pos < records_.size(); ++pos) {
      if (records_[pos].address == address) return records_[pos++].value;
    }
    return std::nullopt;
  }

  const std::vector<RegisterRecord>& records() const { return records_; }

 private:
  std::vector<RegisterRecord> records_;
  std::map<std::uint32_t, std::size_t> cursor_;
};

}  // namespace clusterpower::msr
