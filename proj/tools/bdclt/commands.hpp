#pragma once

// Subcommands of the bdclt tool. Every command is a pure function of its
// RunManifest, which the report embeds so `replay` can re-run it.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bdclt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDisagreement = 3;

struct RunManifest {
  std::string command;
  std::optional<std::string> chain_path;
  nlohmann::json chain;  // inline chain spec
  std::optional<std::string> observable_path;
  nlohmann::json observable;  // inline observable spec or null

  std::uint64_t seed = 1;
  std::size_t truncation = 0;  // 0: automatic
  std::size_t sigma2_truncation = 0;

  std::vector<std::size_t> sizes{100, 1000, 10000};
  std::size_t delete_state = 0;
  double eps_gap = 5e-3;
  double cauchy_window = 1e-4;

  double finite_tol = 1e-3;
  double divergent_ratio = 1.5;
  std::size_t sustained = 3;

  std::size_t replicas = 1000;
  std::size_t steps = 10000;
  std::size_t burn_in = 0;
  std::optional<std::size_t> start;
  std::vector<std::size_t> ladder;
  std::size_t pilot_steps = 100000;
  double trend_tol = 0.05;
  double agreement_tol = 0.05;
  double growth_ratio = 1.2;

  std::optional<std::string> out;
  std::string format = "json";
  std::optional<std::string> trajectory_path;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Report JSON plus the process exit code.
struct Outcome {
  nlohmann::json report;
  int exit_code = kExitOk;
  std::optional<std::string> csv;  // set when format == "csv"
};

/// Dispatches on m.command.
Outcome run(const RunManifest& m);

std::string tool_version();

}  // namespace bdclt::cli
