#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bdclt/chain.hpp"
#include "bdclt/errors.hpp"
#include "bdclt/io.hpp"
#include "bdclt/observable.hpp"
#include "bdclt/simulate.hpp"
#include "bdclt/spectral.hpp"

#ifndef BDCLT_VERSION_STRING
#define BDCLT_VERSION_STRING "0.0.0"
#endif

namespace bdclt::cli {

using nlohmann::json;

namespace {

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <class T>
void read_field(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  return os;
}

BirthDeathChain chain_of(const RunManifest& m) { return build_chain(chain_spec_from_json(m.chain)); }

ObservableSpec observable_of(const RunManifest& m) {
  if (m.observable.is_null()) throw SpecError("this command needs --observable");
  return observable_spec_from_json(m.observable);
}

/// Measure on max(user truncation, automatic truncation, floor). Without an
/// explicit truncation the floor stops where pi(x) leaves the double range.
StationaryMeasure measure_for(const BirthDeathChain& chain, const RunManifest& m,
                              std::size_t floor) {
  constexpr double kLogPiFloor = -600.0;
  const std::size_t auto_m = auto_truncation(chain);
  std::size_t big = std::max({m.truncation, auto_m, floor});
  auto pi = normalize(chain, stationary_weights(chain, big));
  if (m.truncation == 0 && big > auto_m) {
    std::size_t x = auto_m;
    while (x < big && pi.log_pi(x + 1) > kLogPiFloor) ++x;
    if (x < big) pi = normalize(chain, stationary_weights(chain, x));
  }
  return pi;
}

DoublingRule doubling_rule(const RunManifest& m) {
  return DoublingRule{m.finite_tol, m.divergent_ratio, m.sustained};
}

SimConfig sim_config(const RunManifest& m) {
  SimConfig c;
  c.seed = m.seed;
  c.replicas = m.replicas;
  c.steps = m.steps;
  c.burn_in = m.burn_in;
  c.fixed_start = m.start;
  c.ladder = m.ladder;
  c.pilot_steps = m.pilot_steps;
  c.trend_tol = m.trend_tol;
  return c;
}

struct PreparedObservable {
  Observable v;
  bool l2_finite = true;
  double l2_norm_sq = 0.0;
};

/// Centers V; an observable outside L2 is kept as given (the certificate
/// still applies when its cumulative sum vanishes).
PreparedObservable prepare(const Observable& raw, const StationaryMeasure& pi) {
  PreparedObservable p;
  try {
    p.v = center(raw, pi);
  } catch (const NotInL2&) {
    p.v = raw;
    p.l2_finite = false;
  }
  p.l2_norm_sq = l2_norm_sq(p.v, pi);
  return p;
}

json observable_summary(const PreparedObservable& p) {
  return json{{"mean_pi", p.v.mean_pi},
              {"centered", p.v.centered},
              {"l2_finite", p.l2_finite},
              {"l2_norm_sq", number_or_inf(p.l2_norm_sq)}};
}

json cmd_classify(const RunManifest& m) {
  const auto spec = chain_spec_from_json(m.chain);
  const auto chain = build_chain(spec);
  const std::size_t base = m.truncation ? m.truncation : 10000;
  const Regime regime = classify(spec);
  json out = to_json(regime);
  if (regime.kind == RegimeKind::Unclassified) out["evidence"] = to_json(classify_evidence(spec, base));
  try {
    const auto n = normalize(chain, stationary_weights(chain, base));
    out["normalization"] = json{{"status", "finite"},
                                {"truncation", base},
                                {"log_z", n.log_z},
                                {"tail_bound", number_or_inf(n.tail_bound)},
                                {"tail_certified", n.tail_certified}};
  } catch (const DivergentMeasure& e) {
    out["normalization"] = json{{"status", "divergent"},
                                {"truncation", base},
                                {"growth", number_or_inf(e.growth())},
                                {"message", e.what()}};
  }
  return out;
}

Outcome cmd_stationary(const RunManifest& m) {
  const auto chain = chain_of(m);
  const std::size_t big = m.truncation ? m.truncation : auto_truncation(chain);
  const auto pi = normalize(chain, stationary_weights(chain, big));
  Outcome o;
  if (m.format == "csv") {
    auto os = csv_stream();
    write_measure_csv(os, pi);
    o.csv = os.str();
  }
  o.report = json{{"truncation", pi.truncation()},
                  {"log_z", pi.log_z},
                  {"Z", number_or_inf(std::exp(pi.log_z))},
                  {"tail_bound", number_or_inf(pi.tail_bound)},
                  {"tail_certified", pi.tail_certified},
                  {"truncated_mass", pi.truncated_mass()},
                  {"detailed_balance_residual", detailed_balance_residual(chain, pi)},
                  {"log_pi_tilde", pi.log_weights},
                  {"pi", pi.probabilities()}};
  return o;
}

Outcome cmd_spectrum(const RunManifest& m) {
  if (m.sizes.empty()) throw std::invalid_argument("--sizes must list at least one size");
  if (!std::is_sorted(m.sizes.begin(), m.sizes.end())) {
    throw std::invalid_argument("--sizes must be ascending");
  }
  if (m.sizes.front() < 2) throw std::invalid_argument("--sizes entries must be at least 2");
  if (m.delete_state >= m.sizes.front()) {
    throw std::invalid_argument("--delete-state must index a state of the smallest truncation");
  }
  if (!(m.eps_gap > 0.0) || !(m.cauchy_window > 0.0)) {
    throw std::invalid_argument("--eps-gap and --cauchy-window must be positive");
  }
  const auto chain = chain_of(m);
  const auto report = spectral_report(chain, m.sizes, m.delete_state);
  const auto verdict = gap_verdict(report, GapThresholds{m.eps_gap, m.cauchy_window});
  Outcome o;
  o.report = to_json(report);
  o.report["verdict"] = std::string(to_string(verdict));
  o.report["thresholds"] = json{{"eps_gap", m.eps_gap}, {"cauchy_window", m.cauchy_window}};
  if (m.format == "csv") {
    auto os = csv_stream();
    os << "N,lambda1,lambda1_raw,witness,delta_running_sup\n";
    for (std::size_t i = 0; i < report.sizes.size(); ++i) {
      os << report.sizes[i] << ',' << report.lambda1[i] << ',' << report.lambda1_raw[i] << ','
         << report.witness[i] << ',' << report.delta_running_sup[i] << '\n';
    }
    o.csv = os.str();
  }
  return o;
}

std::size_t sigma2_truncation_for(const RunManifest& m, const StationaryMeasure& pi) {
  return m.sigma2_truncation ? m.sigma2_truncation : std::max<std::size_t>(pi.truncation() / 2, 1);
}

Outcome cmd_hminus(const RunManifest& m) {
  const auto chain = chain_of(m);
  const auto pi = measure_for(chain, m, 4096);
  const auto prepared = prepare(materialize(observable_of(m), pi), pi);
  auto h = phi_star(prepared.v, pi, doubling_schedule(pi.truncation()), doubling_rule(m));
  if (h.verdict == DoublingVerdict::Finite && prepared.l2_finite) {
    h.sigma2_resolvent = sigma2_resolvent(prepared.v, chain, sigma2_truncation_for(m, pi)).sigma2;
  }
  Outcome o;
  o.report = to_json(h);
  o.report["observable"] = observable_summary(prepared);
  o.report["measure_truncation"] = pi.truncation();
  if (m.format == "csv") {
    auto os = csv_stream();
    os << "x,grad_phi\n";
    for (std::size_t x = 0; x < h.gradient.size(); ++x) os << x << ',' << h.gradient[x] << '\n';
    o.csv = os.str();
  }
  return o;
}

Outcome cmd_sigma2(const RunManifest& m) {
  const auto chain = chain_of(m);
  const auto pi = measure_for(chain, m, 4096);
  const auto v = center(materialize(observable_of(m), pi), pi);
  Outcome o;
  o.report = to_json(sigma2_resolvent(v, chain, sigma2_truncation_for(m, pi)));
  return o;
}

void dump_trajectory(const RunManifest& m, const BirthDeathChain& chain, const StationaryMeasure& pi) {
  // Replica 0 reproduced from its stream: start draw, burn-in, then the path.
  Rng rng = Rng::for_stream(m.seed, 0);
  std::size_t x = m.start ? *m.start : sample_stationary_start(pi, rng);
  const TransitionTable table(chain, std::max<std::size_t>(pi.truncation() + 1, 1u << 16));
  for (std::size_t i = 0; i < m.burn_in; ++i) x = table.step(x, rng);
  const auto path = sample_path(chain, x, m.steps, rng);
  std::ofstream os(*m.trajectory_path);
  if (!os) throw std::invalid_argument("cannot write trajectory to '" + *m.trajectory_path + "'");
  os << "n,X_n\n";
  for (std::size_t n = 0; n < path.size(); ++n) os << n << ',' << path[n] << '\n';
}

Outcome cmd_simulate(const RunManifest& m) {
  const auto chain = chain_of(m);
  const auto pi = measure_for(chain, m, 0);
  const auto v = center(materialize(observable_of(m), pi), pi);
  const auto report = variance_growth(v, chain, pi, sim_config(m));
  if (m.trajectory_path) dump_trajectory(m, chain, pi);
  Outcome o;
  o.report = to_json(report);
  if (m.format == "csv") {
    auto os = csv_stream();
    os << "N,D2\n";
    for (const auto& p : report.variance_curve) os << p.n << ',' << p.d2 << '\n';
    o.csv = os.str();
  }
  return o;
}

Outcome cmd_clt(const RunManifest& m) {
  const auto chain = chain_of(m);
  const auto pi = measure_for(chain, m, 4096);
  const auto prepared = prepare(materialize(observable_of(m), pi), pi);
  auto h = phi_star(prepared.v, pi, doubling_schedule(pi.truncation()), doubling_rule(m));
  std::optional<Sigma2Result> s2;
  if (h.verdict == DoublingVerdict::Finite && prepared.l2_finite) {
    s2 = sigma2_resolvent(prepared.v, chain, sigma2_truncation_for(m, pi));
    h.sigma2_resolvent = s2->sigma2;
  }
  const auto sim = variance_growth(prepared.v, chain, pi, sim_config(m));

  json agreement;
  std::optional<bool> agree;
  if (sim.degenerate) {
    agreement["status"] = "degenerate";
    agree = true;
  } else if (h.verdict == DoublingVerdict::Finite && s2) {
    const double d2 = sim.variance_curve.back().d2;
    const double rel = s2->sigma2 > 0.0 ? std::abs(d2 - s2->sigma2) / s2->sigma2 : kInf;
    agreement["status"] = "finite";
    agreement["relative_error"] = number_or_inf(rel);
    agreement["tolerance"] = m.agreement_tol;
    agree = rel <= m.agreement_tol;
  } else if (h.verdict == DoublingVerdict::Divergent) {
    json ratios = json::array();
    bool superdiffusive = sim.variance_curve.size() >= 2;
    for (std::size_t i = 1; i < sim.variance_curve.size(); ++i) {
      const double prev = sim.variance_curve[i - 1].d2;
      const double r = prev > 0.0 ? sim.variance_curve[i].d2 / prev : kInf;
      ratios.push_back(number_or_inf(r));
      if (!(r > m.growth_ratio)) superdiffusive = false;
    }
    agreement["status"] = "divergent";
    agreement["growth_ratios"] = ratios;
    agreement["growth_threshold"] = m.growth_ratio;
    agreement["superdiffusive"] = superdiffusive;
    agree = superdiffusive;
  } else {
    agreement["status"] = "inconclusive";
  }
  agreement["agree"] = agree ? json(*agree) : json(nullptr);

  Outcome o;
  o.report = json{{"certificate", to_json(h)},
                  {"observable", observable_summary(prepared)},
                  {"measure_truncation", pi.truncation()},
                  {"sigma2_resolvent", s2 ? to_json(*s2) : json(nullptr)},
                  {"simulation", to_json(sim)},
                  {"agreement", agreement}};
  if (agree && !*agree) o.exit_code = kExitDisagreement;
  return o;
}

}  // namespace

std::string tool_version() { return BDCLT_VERSION_STRING; }

json to_json(const RunManifest& m) {
  return json{{"command", m.command},
              {"chain_path", optional_json(m.chain_path)},
              {"chain", m.chain},
              {"observable_path", optional_json(m.observable_path)},
              {"observable", m.observable},
              {"seed", m.seed},
              {"truncation", m.truncation},
              {"sigma2_truncation", m.sigma2_truncation},
              {"sizes", m.sizes},
              {"delete_state", m.delete_state},
              {"eps_gap", m.eps_gap},
              {"cauchy_window", m.cauchy_window},
              {"finite_tol", m.finite_tol},
              {"divergent_ratio", m.divergent_ratio},
              {"sustained", m.sustained},
              {"replicas", m.replicas},
              {"steps", m.steps},
              {"burn_in", m.burn_in},
              {"start", optional_json(m.start)},
              {"ladder", m.ladder},
              {"pilot_steps", m.pilot_steps},
              {"trend_tol", m.trend_tol},
              {"agreement_tol", m.agreement_tol},
              {"growth_ratio", m.growth_ratio},
              {"out", optional_json(m.out)},
              {"format", m.format},
              {"trajectory_path", optional_json(m.trajectory_path)},
              {"tool_version", tool_version()},
              {"schema_version", kSchemaVersion}};
}

RunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("manifest must be a JSON object");
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.chain_path = optional_field<std::string>(j, "chain_path");
    m.chain = j.at("chain");
    m.observable_path = optional_field<std::string>(j, "observable_path");
    m.observable = j.value("observable", json(nullptr));
    read_field(j, "seed", m.seed);
    read_field(j, "truncation", m.truncation);
    read_field(j, "sigma2_truncation", m.sigma2_truncation);
    read_field(j, "sizes", m.sizes);
    read_field(j, "delete_state", m.delete_state);
    read_field(j, "eps_gap", m.eps_gap);
    read_field(j, "cauchy_window", m.cauchy_window);
    read_field(j, "finite_tol", m.finite_tol);
    read_field(j, "divergent_ratio", m.divergent_ratio);
    read_field(j, "sustained", m.sustained);
    read_field(j, "replicas", m.replicas);
    read_field(j, "steps", m.steps);
    read_field(j, "burn_in", m.burn_in);
    m.start = optional_field<std::size_t>(j, "start");
    read_field(j, "ladder", m.ladder);
    read_field(j, "pilot_steps", m.pilot_steps);
    read_field(j, "trend_tol", m.trend_tol);
    read_field(j, "agreement_tol", m.agreement_tol);
    read_field(j, "growth_ratio", m.growth_ratio);
    m.out = optional_field<std::string>(j, "out");
    read_field(j, "format", m.format);
    m.trajectory_path = optional_field<std::string>(j, "trajectory_path");
  } catch (const json::exception& e) {
    throw SpecError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

Outcome run(const RunManifest& m) {
  if (m.format != "json" && m.format != "csv") throw SpecError("--format must be json or csv");
  Outcome o;
  if (m.command == "classify") {
    o.report = cmd_classify(m);
  } else if (m.command == "stationary") {
    o = cmd_stationary(m);
  } else if (m.command == "spectrum") {
    o = cmd_spectrum(m);
  } else if (m.command == "hminus") {
    o = cmd_hminus(m);
  } else if (m.command == "sigma2") {
    o = cmd_sigma2(m);
  } else if (m.command == "simulate") {
    o = cmd_simulate(m);
  } else if (m.command == "clt") {
    o = cmd_clt(m);
  } else {
    throw SpecError("unknown command '" + m.command + "'");
  }
  json report{{"schema_version", kSchemaVersion}, {"command", m.command}, {"manifest", to_json(m)}};
  report.update(o.report);
  o.report = std::move(report);
  return o;
}

}  // namespace bdclt::cli
