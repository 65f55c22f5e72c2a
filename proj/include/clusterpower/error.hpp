#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clusterpower {

enum class ErrorKind {
  domain,               // non-positive / non-finite numeric input
  range,                // value outside an allowed interval
  input_format,         // malformed file, bad column, unparsable number
  missing_data,         // required phase / corner / window absent
  pairing,              // idle and load phases that do not belong together
  empty_phase,          // every sample rejected by the thermal filter
  unmapped_cluster,     // no rail rose above the spike threshold
  rail_conflict,        // two clusters claim the same rail
  incomplete_schedule,  // no f_min or f_max window for a cluster
  degenerate_peer,      // estimated full-workload energy is zero
  divergence,           // non-finite training loss
  dataset               // dataset could not be loaded or generated
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::range: return "range";
    case ErrorKind::input_format: return "input_format";
    case ErrorKind::missing_data: return "missing_data";
    case ErrorKind::pairing: return "pairing";
    case ErrorKind::empty_phase: return "empty_phase";
    case ErrorKind::unmapped_cluster: return "unmapped_cluster";
    case ErrorKind::rail_conflict: return "rail_conflict";
    case ErrorKind::incomplete_schedule: return "incomplete_schedule";
    case ErrorKind::degenerate_peer: return "degenerate_peer";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::dataset: return "dataset";
  }
  return "unknown";
}

/// Base of every exception thrown by the library. The kind drives the CLI
/// exit-code mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  DomainError(std::string parameter, const std::string& what)
      : Error(ErrorKind::domain, parameter + ": " + what),
        parameter_(std::move(parameter)) {}

  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t round)
      : Error(ErrorKind::divergence,
              "non-finite training loss in round " + std::to_string(round)),
        round_(round) {}

  std::size_t round() const noexcept { return round_; }

 private:
  std::size_t round_;
};

}  // namespace clusterpower
