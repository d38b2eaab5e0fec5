// bdclt: classify birth-death chains, certify the CLT condition for an
// observable and check the certificates against eigensolvers and Monte Carlo.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bdclt/errors.hpp"
#include "bdclt/io.hpp"
#include "commands.hpp"

namespace {

using bdclt::cli::RunManifest;

struct Inputs {
  std::string chain_path;
  std::string observable_path;
  std::string report_path;
  std::string out;
  std::string trajectory;
  long long start = -1;
};

void add_chain(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--chain", in.chain_path, "Chain spec JSON file")->required();
}

void add_observable(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--observable", in.observable_path, "Observable spec JSON file")->required();
}

void add_output(CLI::App* cmd, RunManifest& m, Inputs& in, bool csv) {
  cmd->add_option("--out", in.out, "Write the report here instead of stdout");
  if (csv) {
    cmd->add_option("--format", m.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
  }
}

void add_truncation(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--truncation", m.truncation, "Measure truncation M (0: automatic)")
      ->capture_default_str();
}

void add_certificate(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--finite-tol", m.finite_tol, "Phi* relative change counted as converged")
      ->capture_default_str();
  cmd->add_option("--divergent-ratio", m.divergent_ratio, "Phi* doubling ratio counted as divergent")
      ->capture_default_str();
  cmd->add_option("--sustained", m.sustained, "Doublings the divergent ratio must persist")
      ->capture_default_str();
  cmd->add_option("--sigma2-truncation", m.sigma2_truncation,
                  "Poisson-solve truncation (0: half the measure truncation)")
      ->capture_default_str();
}

void add_simulation(CLI::App* cmd, RunManifest& m, Inputs& in) {
  cmd->add_option("--seed", m.seed, "Master seed")->capture_default_str();
  cmd->add_option("--replicas", m.replicas, "Independent replicas")->capture_default_str();
  cmd->add_option("--steps", m.steps, "Steps per replica")->capture_default_str();
  cmd->add_option("--burn-in", m.burn_in, "Steps discarded before n = 0")->capture_default_str();
  cmd->add_option("--start", in.start, "Fixed start state (default: draw from pi)");
  cmd->add_option("--ladder", m.ladder, "N rungs, comma separated (default: doubling ladder)")
      ->delimiter(',');
  cmd->add_option("--pilot-steps", m.pilot_steps, "Pilot length for the batch size")
      ->capture_default_str();
  cmd->add_option("--trend-tol", m.trend_tol, "Relative D2 change that raises the trend warning")
      ->capture_default_str();
}

std::string read_text_json(const std::string& path, nlohmann::json& dst) {
  dst = bdclt::read_json_file(path);
  return path;
}

void emit(const bdclt::cli::Outcome& o, const RunManifest& m, const std::string& out) {
  const std::string text = (m.format == "csv" && o.csv) ? *o.csv : o.report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot write '" + out + "'");
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Birth-death chain spectral and CLT certificates"};
  app.set_version_flag("--version", bdclt::cli::tool_version());
  app.require_subcommand(1);

  RunManifest m;
  Inputs in;

  auto* classify = app.add_subcommand("classify", "Regime of a chain plus a normalization probe");
  add_chain(classify, in);
  add_truncation(classify, m);
  add_output(classify, m, in, false);

  auto* stationary = app.add_subcommand("stationary", "Reversible weights and the normalized law");
  add_chain(stationary, in);
  add_truncation(stationary, m);
  add_output(stationary, m, in, true);

  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalue ladder, witness, Chen delta, verdict");
  add_chain(spectrum, in);
  spectrum->add_option("--sizes", m.sizes, "Truncation sizes, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  spectrum->add_option("--delete-state", m.delete_state, "State removed for the reduced matrix")
      ->capture_default_str();
  spectrum->add_option("--eps-gap", m.eps_gap, "No-gap threshold on 1 - lambda")
      ->capture_default_str();
  spectrum->add_option("--cauchy-window", m.cauchy_window, "Stability window for a gap verdict")
      ->capture_default_str();
  add_output(spectrum, m, in, true);

  auto* hminus = app.add_subcommand("hminus", "Phi* certificate for an observable");
  add_chain(hminus, in);
  add_observable(hminus, in);
  add_truncation(hminus, m);
  add_certificate(hminus, m);
  add_output(hminus, m, in, true);

  auto* sigma2 = app.add_subcommand("sigma2", "Asymptotic variance by the truncated Poisson solve");
  add_chain(sigma2, in);
  add_observable(sigma2, in);
  add_truncation(sigma2, m);
  sigma2->add_option("--sigma2-truncation", m.sigma2_truncation,
                     "Poisson-solve truncation (0: half the measure truncation)")
      ->capture_default_str();
  add_output(sigma2, m, in, false);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo variance growth and normality");
  add_chain(simulate, in);
  add_observable(simulate, in);
  add_truncation(simulate, m);
  add_simulation(simulate, m, in);
  simulate->add_option("--dump-trajectory", in.trajectory, "CSV of replica 0's path (n, X_n)");
  add_output(simulate, m, in, true);

  auto* clt = app.add_subcommand("clt", "Certificate, resolvent and simulation in one report");
  add_chain(clt, in);
  add_observable(clt, in);
  add_truncation(clt, m);
  add_certificate(clt, m);
  add_simulation(clt, m, in);
  clt->add_option("--agreement-tol", m.agreement_tol, "Relative D2 vs sigma2 tolerance")
      ->capture_default_str();
  clt->add_option("--growth-ratio", m.growth_ratio, "Per-rung D2 ratio counted as superdiffusive")
      ->capture_default_str();
  add_output(clt, m, in, false);

  auto* replay = app.add_subcommand("replay", "Re-run the manifest embedded in a report");
  replay->add_option("--report", in.report_path, "Report JSON file")->required();
  replay->add_option("--out", in.out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bdclt::cli::kExitInput;
  }

  try {
    RunManifest run_m;
    if (replay->parsed()) {
      const auto report = bdclt::read_json_file(in.report_path);
      if (!report.is_object() || !report.contains("manifest")) {
        throw bdclt::SpecError("'" + in.report_path + "' has no embedded manifest");
      }
      run_m = bdclt::cli::manifest_from_json(report.at("manifest"));
    } else {
      run_m = m;
      run_m.command = app.get_subcommands().front()->get_name();
      run_m.chain_path = read_text_json(in.chain_path, run_m.chain);
      if (!in.observable_path.empty()) {
        run_m.observable_path = read_text_json(in.observable_path, run_m.observable);
      }
      if (in.start >= 0) run_m.start = static_cast<std::size_t>(in.start);
      if (!in.out.empty()) run_m.out = in.out;
      if (!in.trajectory.empty()) run_m.trajectory_path = in.trajectory;
    }
    const auto outcome = bdclt::cli::run(run_m);
    const std::string out = !in.out.empty() ? in.out : (replay->parsed() ? "" : run_m.out.value_or(""));
    emit(outcome, run_m, out);
    return outcome.exit_code;
  } catch (const bdclt::SpecError& e) {
    std::cerr << "bdclt: input error: " << e.what() << '\n';
  } catch (const bdclt::DomainError& e) {
    std::cerr << "bdclt: invalid chain: " << e.what() << '\n';
  } catch (const bdclt::DivergentMeasure& e) {
    std::cerr << "bdclt: stationary measure does not normalize: " << e.what() << '\n';
  } catch (const bdclt::NotInL2& e) {
    std::cerr << "bdclt: observable not in L2(pi): " << e.what() << '\n';
  } catch (const bdclt::NotCentered& e) {
    std::cerr << "bdclt: " << e.what() << '\n';
  } catch (const bdclt::SingularSystem& e) {
    std::cerr << "bdclt: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "bdclt: invalid argument: " << e.what() << '\n';
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bdclt: malformed JSON: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "bdclt: internal error: " << e.what() << '\n';
    return 1;
  }
  return bdclt::cli::kExitInput;
}
