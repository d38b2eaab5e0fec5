#include "bdclt/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

namespace bdclt {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double number_field(const json& j, const char* key) {
  if (!j.contains(key)) throw SpecError(std::string("missing field '") + key + "'");
  if (!j.at(key).is_number()) throw SpecError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw SpecError(std::string("missing string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

std::vector<double> number_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw SpecError(std::string("field '") + key + "' must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& e : j.at(key)) {
    if (!e.is_number()) throw SpecError(std::string("field '") + key + "' must contain numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

ChainSpec chain_spec_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("chain spec must be a JSON object");
  const std::string family = string_field(j, "family");
  if (family == "constant") return ConstantDrift{number_field(j, "p")};
  if (family == "lamperti") return LampertiDrift{number_field(j, "c"), number_field(j, "alpha")};
  if (family == "table") {
    const std::string tail = j.value("tail", std::string("repeat_last"));
    if (tail != "repeat_last") throw SpecError("table chain: only tail rule 'repeat_last' is supported");
    return TableDrift{number_array(j, "p")};
  }
  throw SpecError("unknown chain family '" + family + "'");
}

json to_json(const ChainSpec& spec) {
  return std::visit(Overloaded{
                        [](const ConstantDrift& s) { return json{{"family", "constant"}, {"p", s.p}}; },
                        [](const LampertiDrift& s) {
                          return json{{"family", "lamperti"}, {"c", s.c}, {"alpha", s.alpha}};
                        },
                        [](const TableDrift& s) {
                          return json{{"family", "table"}, {"p", s.p}, {"tail", "repeat_last"}};
                        },
                    },
                    spec);
}

ObservableSpec observable_spec_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("observable spec must be a JSON object");
  const std::string kind = string_field(j, "kind");
  if (kind == "table") {
    TableObservableSpec s{number_array(j, "values"), 0.0};
    if (s.values.empty()) throw SpecError("table observable: 'values' must not be empty");
    if (j.contains("tail")) s.tail = number_field(j, "tail");
    return s;
  }
  if (kind == "indicator") {
    const double state = number_field(j, "state");
    if (state < 0 || std::floor(state) != state) {
      throw SpecError("indicator observable: 'state' must be a non-negative integer");
    }
    return IndicatorObservableSpec{static_cast<std::size_t>(state)};
  }
  if (kind == "cumulative") {
    CumulativeObservableSpec s{string_field(j, "G"), std::nullopt};
    if (s.profile != "sqrt_pi") throw SpecError("cumulative observable: only G = 'sqrt_pi' is supported");
    if (j.contains("cap")) {
      const double cap = number_field(j, "cap");
      if (cap < 0 || std::floor(cap) != cap) throw SpecError("cumulative observable: bad 'cap'");
      s.cap = static_cast<std::size_t>(cap);
    }
    return s;
  }
  throw SpecError("unknown observable kind '" + kind + "'");
}

json to_json(const ObservableSpec& spec) {
  return std::visit(Overloaded{
                        [](const TableObservableSpec& s) {
                          return json{{"kind", "table"}, {"values", s.values}, {"tail", s.tail}};
                        },
                        [](const IndicatorObservableSpec& s) {
                          return json{{"kind", "indicator"}, {"state", s.state}};
                        },
                        [](const CumulativeObservableSpec& s) {
                          json j{{"kind", "cumulative"}, {"G", s.profile}};
                          if (s.cap) j["cap"] = *s.cap;
                          return j;
                        },
                    },
                    spec);
}

Observable cap_support(const Observable& v, std::size_t cap) {
  Observable out = v;
  if (out.values.size() > cap + 1) out.values.resize(cap + 1);
  out.tail_value = 0.0;
  out.centered = false;
  return out;
}

Observable materialize(const ObservableSpec& spec, const StationaryMeasure& pi) {
  return std::visit(Overloaded{
                        [&](const TableObservableSpec& s) { return table_observable(s.values, s.tail); },
                        [&](const IndicatorObservableSpec& s) {
                          return indicator_observable(s.state, pi.truncation());
                        },
                        [&](const CumulativeObservableSpec& s) {
                          auto v = observable_from_cumulative(sqrt_pi_cumulative(pi), pi);
                          return s.cap ? cap_support(v, *s.cap) : v;
                        },
                    },
                    spec);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

json to_json(const Regime& regime) {
  json j{{"regime", std::string(to_string(regime.kind))}};
  if (!regime.reason.empty()) j["reason"] = regime.reason;
  return j;
}

json to_json(const ClassifyEvidence& ev) {
  return json{{"base_truncation", ev.base_truncation},
              {"partial_sum_growth", number_or_inf(ev.partial_sum_growth)},
              {"delta_estimate", number_or_inf(ev.delta_estimate)},
              {"delta_diverging", ev.delta_diverging}};
}

json to_json(const SpectralReport& r) {
  json delta = json::array();
  for (double d : r.delta_running_sup) delta.push_back(number_or_inf(d));
  return json{{"N", r.sizes},
              {"lambda1", r.lambda1},
              {"lambda1_raw", r.lambda1_raw},
              {"witness", r.witness},
              {"delta_running_sup", delta},
              {"deleted_state", r.deleted_state},
              {"delta_diverging", r.delta_diverging}};
}

json to_json(const H1MinusReport& r) {
  json j{{"schedule", r.schedule},
         {"phi_star_partial", r.phi_star_partial},
         {"verdict", std::string(to_string(r.verdict))},
         {"cumulative_total", r.cumulative_total}};
  j["sigma2"] = r.sigma2_resolvent ? json(*r.sigma2_resolvent) : json(nullptr);
  return j;
}

json to_json(const Sigma2Result& r) {
  return json{{"truncation", r.truncation},
              {"sigma2", r.sigma2},
              {"sigma2_doubled", r.sigma2_doubled},
              {"error_estimate", r.error_estimate},
              {"recentering_shift", r.recentering_shift}};
}

json to_json(const CltReport& r) {
  json curve = json::array();
  for (const auto& p : r.variance_curve) curve.push_back(json{{"N", p.n}, {"D2", p.d2}});
  return json{{"replicas", r.replicas},
              {"steps", r.steps},
              {"variance_curve", curve},
              {"sigma2_mc", r.sigma2_mc},
              {"sigma2_mc_se", r.sigma2_mc_se},
              {"batch_length", r.batch_length},
              {"batch_length_capped", r.batch_length_capped},
              {"tau_int", r.tau_int},
              {"ks_distance", r.ks_distance},
              {"degenerate", r.degenerate},
              {"no_convergence_warning", r.no_convergence_warning},
              {"replica_sums",
               json{{"mean", r.replica_sums.mean},
                    {"sd", r.replica_sums.sd},
                    {"min", r.replica_sums.min},
                    {"max", r.replica_sums.max}}}};
}

void write_measure_csv(std::ostream& os, const StationaryMeasure& m) {
  os << "x,log_pi_tilde,pi\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t x = 0; x < m.log_weights.size(); ++x) {
    os << x << ',' << m.log_weights[x] << ',';
    if (m.normalized) os << m.pi(x);
    os << '\n';
  }
}

}  // namespace bdclt
