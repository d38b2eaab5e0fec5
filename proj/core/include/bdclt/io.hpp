#pragma once

// JSON / CSV surfaces: chain and observable spec files, report exports.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "bdclt/chain.hpp"
#include "bdclt/observable.hpp"
#include "bdclt/simulate.hpp"
#include "bdclt/spectral.hpp"

namespace bdclt {

inline constexpr const char* kSchemaVersion = "bdclt.report/1";

/// Malformed spec file (bad JSON, unknown family, missing field).
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

ChainSpec chain_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChainSpec& spec);

struct TableObservableSpec {
  std::vector<double> values;
  double tail = 0.0;
};
struct IndicatorObservableSpec {
  std::size_t state = 0;
};
/// V built from its cumulative profile G; only G = sqrt(pi) is supported.
/// `cap` zeroes V beyond that state.
struct CumulativeObservableSpec {
  std::string profile = "sqrt_pi";
  std::optional<std::size_t> cap;
};
using ObservableSpec =
    std::variant<TableObservableSpec, IndicatorObservableSpec, CumulativeObservableSpec>;

ObservableSpec observable_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ObservableSpec& spec);

/// Realizes the spec on the truncation of `pi` (uncentered).
Observable materialize(const ObservableSpec& spec, const StationaryMeasure& pi);

/// Support truncation: V(x) = 0 for x > cap.
Observable cap_support(const Observable& v, std::size_t cap);

nlohmann::json read_json_file(const std::filesystem::path& path);

nlohmann::json to_json(const Regime& regime);
nlohmann::json to_json(const ClassifyEvidence& evidence);
nlohmann::json to_json(const SpectralReport& report);
nlohmann::json to_json(const H1MinusReport& report);
nlohmann::json to_json(const Sigma2Result& result);
nlohmann::json to_json(const CltReport& report);

/// Columns x, log_pi_tilde, pi (pi left empty for an unnormalized measure).
void write_measure_csv(std::ostream& os, const StationaryMeasure& measure);

/// Non-finite doubles become null in JSON; this keeps +inf visible as a string.
nlohmann::json number_or_inf(double v);

}  // namespace bdclt
