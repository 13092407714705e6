#include "core/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "core/errors.hpp"
#include "core/oracle.hpp"
#include "json.hpp"

namespace sgne {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

const json& object_at(const json& root, const char* key) {
  const json& v = root.at(key);
  if (!v.is_object()) throw ConfigError(key, "must be an object");
  return v;
}

double number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key, "must be a number");
  return v.get<double>();
}

long integer(const json& obj, const std::string& path, const char* key, long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key, "must be an integer");
  return v.get<long>();
}

bool boolean(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(path + "." + key, "must be true or false");
  return v.get<bool>();
}

std::string text(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key, "must be a string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  std::vector<std::string> out;
  if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  } else if (v.is_array()) {
    for (const json& e : v) {
      if (!e.is_string()) throw ConfigError(path, "entries must be strings");
      out.push_back(e.get<std::string>());
    }
  } else {
    throw ConfigError(path, "must be a string or a list of strings");
  }
  if (out.empty()) throw ConfigError(path, "must not be empty");
  return out;
}

std::vector<std::uint64_t> seed_list(const json& v) {
  if (v.is_string()) return parse_seed_range(v.get<std::string>());
  if (v.is_number_integer()) return {v.get<std::uint64_t>()};
  if (!v.is_array() || v.empty()) throw ConfigError("run.seeds", "must be a list or a range like \"0..9\"");
  std::vector<std::uint64_t> out;
  for (const json& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 0)
      throw ConfigError("run.seeds", "entries must be nonnegative integers");
    out.push_back(e.get<std::uint64_t>());
  }
  return out;
}

std::vector<Variant> variant_list(const json& v, const std::string& path) {
  std::vector<Variant> out;
  for (const std::string& name : string_list(v, path)) {
    try {
      out.push_back(parse_variant(name));
    } catch (const ConfigError& e) {
      throw ConfigError(path, "unknown variant '" + name + "'");
    }
  }
  return out;
}

std::vector<TopologySpec> topology_list(const json& v, const std::string& path) {
  std::vector<TopologySpec> out;
  for (const std::string& name : string_list(v, path)) {
    if (name != "complete" && name != "cycle" && name != "path")
      throw ConfigError(path, "unknown topology '" + name + "'");
    out.push_back({name, {}});
  }
  return out;
}

std::optional<std::vector<double>> step_values(const json& obj, const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  const std::string path = std::string("step_sizes.overrides.") + key;
  if (v.is_number()) return std::vector<double>{v.get<double>()};
  if (!v.is_array() || v.empty()) throw ConfigError(path, "must be a number or a list of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigError(path, "must contain numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

VectorXd expand(const std::vector<double>& values, int agents, const char* key) {
  if (values.size() == 1) return VectorXd::Constant(agents, values[0]);
  if (static_cast<int>(values.size()) != agents)
    throw ConfigError(std::string("step_sizes.overrides.") + key, "needs one value or one per agent");
  return Eigen::Map<const VectorXd>(values.data(), agents);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json stats(const std::vector<double>& values) {
  json out;
  out["count"] = values.size();
  if (values.empty()) {
    out["mean"] = nullptr;
    out["std"] = nullptr;
    out["variance"] = nullptr;
    return out;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  out["mean"] = mean;
  out["std"] = std::sqrt(var);
  out["variance"] = var;
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& t) {
  const auto dots = t.find("..");
  try {
    if (dots == std::string::npos) {
      std::vector<std::uint64_t> out;
      std::stringstream ss(t);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
      if (out.empty()) throw std::invalid_argument("empty");
      return out;
    }
    const std::uint64_t lo = std::stoull(t.substr(0, dots));
    const std::uint64_t hi = std::stoull(t.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("reversed");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("run.seeds", "cannot parse seed range '" + t + "'");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
  reject_unknown(root, "", {"scenario", "graph", "algorithm", "step_sizes", "batch", "run", "sign_convention"});

  ExperimentConfig c;
  if (!root.contains("scenario")) throw ConfigError("scenario", "missing");
  const json& sc = object_at(root, "scenario");
  reject_unknown(sc, "scenario", {"name", "params", "seed"});
  c.scenario = text(sc, "scenario", "name", "");
  if (c.scenario.empty()) throw ConfigError("scenario.name", "missing");
  if (sc.contains("params")) {
    if (!sc.at("params").is_object()) throw ConfigError("scenario.params", "must be an object");
    c.scenario_params = sc.at("params").dump();
  }
  const long sseed = integer(sc, "scenario", "seed", 0);
  if (sseed < 0) throw ConfigError("scenario.seed", "must be nonnegative");
  c.scenario_seed = static_cast<std::uint64_t>(sseed);

  if (root.contains("graph")) {
    const json& g = object_at(root, "graph");
    reject_unknown(g, "graph", {"topology", "edges"});
    if (g.contains("edges")) {
      if (g.contains("topology")) throw ConfigError("graph", "give either topology or edges, not both");
      TopologySpec spec{"custom", {}};
      const json& e = g.at("edges");
      if (!e.is_array() || e.empty()) throw ConfigError("graph.edges", "must be a non-empty list");
      for (const json& item : e) {
        if (!item.is_array() || item.size() < 2 || item.size() > 3 || !item[0].is_number_integer() ||
            !item[1].is_number_integer() || (item.size() == 3 && !item[2].is_number()))
          throw ConfigError("graph.edges", "entries must be [i, j] or [i, j, weight]");
        spec.edges.push_back({item[0].get<int>(), item[1].get<int>(),
                              item.size() == 3 ? item[2].get<double>() : 1.0});
      }
      c.topologies = {spec};
    } else if (g.contains("topology")) {
      c.topologies = topology_list(g.at("topology"), "graph.topology");
    }
  }
  if (root.contains("algorithm")) c.variants = variant_list(root.at("algorithm"), "algorithm");

  if (root.contains("step_sizes")) {
    const json& s = object_at(root, "step_sizes");
    reject_unknown(s, "step_sizes", {"tau", "safety_factor", "c_multiplier", "aggregative_c", "mode", "overrides"});
    c.tau = number(s, "step_sizes", "tau", c.tau);
    c.safety = number(s, "step_sizes", "safety_factor", c.safety);
    c.c_multiplier = number(s, "step_sizes", "c_multiplier", c.c_multiplier);
    c.aggregative_c = number(s, "step_sizes", "aggregative_c", c.aggregative_c);
    const std::string mode = text(s, "step_sizes", "mode", "calibrated");
    if (mode == "bounds") c.step_mode = StepMode::bounds;
    else if (mode == "calibrated") c.step_mode = StepMode::calibrated;
    else if (mode == "theory") c.step_mode = StepMode::theory;
    else throw ConfigError("step_sizes.mode", "expected bounds, calibrated or theory");
    if (s.contains("overrides")) {
      const json& o = s.at("overrides");
      if (!o.is_object()) throw ConfigError("step_sizes.overrides", "must be an object");
      reject_unknown(o, "step_sizes.overrides", {"alpha", "nu", "delta", "gamma", "c"});
      c.overrides.alpha = step_values(o, "alpha");
      c.overrides.nu = step_values(o, "nu");
      c.overrides.delta = step_values(o, "delta");
      if (o.contains("gamma")) c.overrides.gamma = number(o, "step_sizes.overrides", "gamma", 0.0);
      if (o.contains("c")) c.overrides.c = number(o, "step_sizes.overrides", "c", 0.0);
    }
    if (!(c.tau > 0)) throw ConfigError("step_sizes.tau", "must be positive");
    if (!(c.safety > 0 && c.safety <= 1)) throw ConfigError("step_sizes.safety_factor", "must lie in (0, 1]");
    if (!(c.c_multiplier > 0)) throw ConfigError("step_sizes.c_multiplier", "must be positive");
    if (!(c.aggregative_c > 0)) throw ConfigError("step_sizes.aggregative_c", "must be positive");
  }

  if (root.contains("batch")) {
    const json& b = object_at(root, "batch");
    reject_unknown(b, "batch", {"c_b", "k0", "a", "sampling"});
    c.batch.scale = number(b, "batch", "c_b", c.batch.scale);
    c.batch.offset = number(b, "batch", "k0", c.batch.offset);
    c.batch.exponent = number(b, "batch", "a", c.batch.exponent);
    const std::string sampling = text(b, "batch", "sampling", "aggregate");
    if (sampling == "aggregate") c.sampling = BatchSampling::aggregate;
    else if (sampling == "loop") c.sampling = BatchSampling::loop;
    else throw ConfigError("batch.sampling", "expected aggregate or loop");
  }
  validate_schedule(c.batch);

  if (root.contains("run")) {
    const json& r = object_at(root, "run");
    reject_unknown(r, "run", {"iters", "tol", "seeds", "jobs", "record_wallclock", "residual", "exact_gradients"});
    c.iters = integer(r, "run", "iters", c.iters);
    c.tol = number(r, "run", "tol", c.tol);
    if (r.contains("seeds")) c.seeds = seed_list(r.at("seeds"));
    c.jobs = static_cast<int>(integer(r, "run", "jobs", c.jobs));
    c.record_wallclock = boolean(r, "run", "record_wallclock", c.record_wallclock);
    c.residual = boolean(r, "run", "residual", c.residual);
    c.exact_gradients = boolean(r, "run", "exact_gradients", c.exact_gradients);
    if (c.iters < 0) throw ConfigError("run.iters", "must be nonnegative");
    if (!(c.tol >= 0)) throw ConfigError("run.tol", "must be nonnegative");
    if (c.jobs < 1) throw ConfigError("run.jobs", "must be at least 1");
  }

  if (root.contains("sign_convention")) {
    const json& s = object_at(root, "sign_convention");
    reject_unknown(s, "sign_convention", {"edge_dual", "edge_form"});
    const std::string dual = text(s, "sign_convention", "edge_dual", "derived");
    if (dual == "derived") c.edge_dual = EdgeDualSign::derived;
    else if (dual == "printed") c.edge_dual = EdgeDualSign::printed;
    else throw ConfigError("sign_convention.edge_dual", "expected derived or printed");
    const std::string form = text(s, "sign_convention", "edge_form", "z");
    if (form == "z") c.edge_form = AuxForm::edge_z;
    else if (form == "v") c.edge_form = AuxForm::edge_v;
    else throw ConfigError("sign_convention.edge_form", "expected z or v");
  }
  build_scenario(c);  // parameter validation
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_overrides(ExperimentConfig& c, const std::string& json_text) {
  if (json_text.empty()) return;
  json o;
  try {
    o = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("overrides", std::string("not valid JSON: ") + e.what());
  }
  if (!o.is_object()) throw ConfigError("overrides", "must be a JSON object");
  reject_unknown(o, "overrides", {"algorithm", "topology", "seeds", "iters", "jobs", "tol"});
  if (o.contains("algorithm")) c.variants = variant_list(o.at("algorithm"), "algorithm");
  if (o.contains("topology")) c.topologies = topology_list(o.at("topology"), "topology");
  if (o.contains("seeds")) c.seeds = seed_list(o.at("seeds"));
  c.iters = integer(o, "overrides", "iters", c.iters);
  c.jobs = static_cast<int>(integer(o, "overrides", "jobs", c.jobs));
  c.tol = number(o, "overrides", "tol", c.tol);
  if (c.iters < 0) throw ConfigError("iters", "must be nonnegative");
  if (c.jobs < 1) throw ConfigError("jobs", "must be at least 1");
}

Scenario build_scenario(const ExperimentConfig& c) {
  const json p = json::parse(c.scenario_params);
  const std::string path = "scenario.params";
  auto variance = [&](const char* key) {
    const double v = number(p, path, key, number(p, path, "variance", 1.0));
    if (v < 0) throw ConfigError(path + "." + key, "must be nonnegative");
    return v;
  };
  auto positive_int = [&](const char* key, long fallback, long min) {
    const long v = integer(p, path, key, fallback);
    if (v < min) throw ConfigError(path + "." + key, "must be at least " + std::to_string(min));
    return static_cast<int>(v);
  };
  auto mode_of = [&]() {
    const std::string m = text(p, path, "mode", "network");
    if (m == "network") return GameMode::network;
    if (m == "aggregative") return GameMode::aggregative;
    throw ConfigError(path + ".mode", "expected network or aggregative");
  };
  if (c.scenario == "nash_cournot") {
    reject_unknown(p, path, {"agents", "markets", "variance", "cost_variance", "price_variance"});
    NashCournotParams np;
    np.agents = positive_int("agents", np.agents, 2);
    np.markets = positive_int("markets", np.markets, 1);
    np.cost_variance = variance("cost_variance");
    np.price_variance = variance("price_variance");
    return nash_cournot(np, c.scenario_seed);
  }
  if (c.scenario == "ev_charging") {
    reject_unknown(p, path, {"agents", "slots", "variance", "cost_variance", "price_variance"});
    EvChargingParams ep;
    ep.agents = positive_int("agents", ep.agents, 2);
    ep.slots = positive_int("slots", ep.slots, 2);
    ep.cost_variance = variance("cost_variance");
    ep.price_variance = variance("price_variance");
    return ev_charging(ep, c.scenario_seed);
  }
  if (c.scenario == "analytic_quadratic") {
    reject_unknown(p, path, {"agents", "dim", "constraints", "coupling_strength", "noise_sigma", "active", "mode"});
    QuadraticParams qp;
    qp.agents = positive_int("agents", qp.agents, 1);
    qp.dim = positive_int("dim", qp.dim, 1);
    qp.constraints = positive_int("constraints", qp.constraints, 0);
    qp.coupling_strength = number(p, path, "coupling_strength", qp.coupling_strength);
    qp.noise_sigma = number(p, path, "noise_sigma", qp.noise_sigma);
    qp.active = boolean(p, path, "active", qp.active);
    qp.mode = mode_of();
    if (qp.coupling_strength < 0) throw ConfigError(path + ".coupling_strength", "must be nonnegative");
    if (qp.noise_sigma < 0) throw ConfigError(path + ".noise_sigma", "must be nonnegative");
    return analytic_quadratic(qp, c.scenario_seed);
  }
  if (c.scenario == "two_agent_budget") {
    reject_unknown(p, path, {"mode", "noise_sigma"});
    const double sigma = number(p, path, "noise_sigma", 0.0);
    if (sigma < 0) throw ConfigError(path + ".noise_sigma", "must be nonnegative");
    return two_agent_budget(mode_of(), sigma);
  }
  throw ConfigError("scenario.name", "unknown scenario '" + c.scenario + "'");
}

Graph build_graph(const TopologySpec& t, int agents) {
  if (t.name == "custom") return Graph(agents, t.edges);
  return Graph::from_topology(t.name, agents);
}

CellSetup prepare_cell(const ExperimentConfig& cfg, Variant variant, const Graph& graph,
                       const GameModel& game) {
  CellSetup cell;
  cell.variant = variant;
  const SpectralSummary spec = graph.spectral_summary();
  double c = cfg.aggregative_c;
  if (!is_aggregative(variant)) {
    const TheoryConstants probe = theory_constants(variant, game.constants(), spec, game.agents(), 1.0);
    c = cfg.c_multiplier * probe.c_min;
  }
  if (cfg.overrides.c) c = *cfg.overrides.c;
  if (!(c > 0)) throw ConfigError("step_sizes.overrides.c", "must be positive");

  StepSizeProfile profile = default_profile(variant, graph, game, cfg.tau, cfg.safety, c);
  if (cfg.step_mode == StepMode::calibrated) {
    const CalibrationResult cal = calibrate_profile(variant, game, graph, profile);
    profile = cal.profile;
    cell.calibration_threshold = cal.threshold_scale;
    cell.calibration_ceiling_stable = cal.ceiling_stable;
  } else if (cfg.step_mode == StepMode::theory) {
    profile = theory_profile(variant, game, graph, profile);
  }
  const int agents = game.agents();
  if (cfg.overrides.alpha) profile.alpha = expand(*cfg.overrides.alpha, agents, "alpha");
  if (cfg.overrides.nu) profile.nu = expand(*cfg.overrides.nu, agents, "nu");
  if (cfg.overrides.delta) profile.delta = expand(*cfg.overrides.delta, agents, "delta");
  if (cfg.overrides.gamma) profile.gamma = *cfg.overrides.gamma;
  validate_profile(variant, profile, agents);
  cell.profile = profile;
  cell.theory = theory_constants(variant, game.constants(), spec, agents, profile.c);
  ExtendedOperator op(variant, game, graph, profile.c);
  cell.metric = metric_diagnostic(op.assemble(profile), cell.theory);
  return cell;
}

std::string ValidationReport::text() const {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  out += ok ? "result: OK\n" : "result: FAILED\n";
  return out;
}

ValidationReport validate_config(const ExperimentConfig& cfg) {
  ValidationReport rep;
  auto line = [&](const std::string& s) { rep.lines.push_back(s); };
  auto fmt = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };

  Scenario sc = build_scenario(cfg);
  const GameModel& game = sc.game;
  line("scenario " + cfg.scenario + ": " + std::to_string(game.agents()) + " agents, n = " +
       std::to_string(game.total_dim()) + ", m = " + std::to_string(game.constraints()));
  const GameConstants& gc = game.constants();
  line("constants: eta = " + fmt(gc.eta) + ", l_F = " + fmt(gc.lip_F) + ", l_p = " + fmt(gc.lip_p) +
       (game.mode() == GameMode::aggregative ? ", l_a^x = " + fmt(gc.lip_ax) + ", l_a^u = " + fmt(gc.lip_au) : ""));
  if (!(gc.eta > 0)) {
    rep.ok = false;
    line("FAIL pseudogradient is not strongly monotone");
  }
  line("OK batch schedule M_k = ceil(" + fmt(cfg.batch.scale) + " (k + " + fmt(cfg.batch.offset) +
       ")^" + fmt(cfg.batch.exponent + 1.0) + "), M_1 = " + std::to_string(batch_size(cfg.batch, 1)));
  if (game.slater_witness()) {
    const SlaterReport s = check_slater(game, *game.slater_witness());
    line(std::string(s.holds ? "OK" : "WARN") + " Slater witness: min slack " + fmt(s.min_slack) +
         ", min box margin " + fmt(s.min_box_margin));
  }

  for (const TopologySpec& topo : cfg.topologies) {
    Graph graph = build_graph(topo, game.agents());
    const SpectralSummary spec = graph.spectral_summary();
    line("graph " + topo.name + ": lambda2 = " + fmt(spec.lambda2) + ", lambdaN = " + fmt(spec.lambda_n) +
         ", d_max = " + fmt(spec.max_degree));
    for (Variant v : cfg.variants) {
      const std::string tag = "  [" + variant_name(v) + "/" + topo.name + "] ";
      if (is_aggregative(v) != (game.mode() == GameMode::aggregative)) {
        rep.ok = false;
        line(tag + "FAIL variant does not match the game mode");
        continue;
      }
      CellSetup cell;
      try {
        cell = prepare_cell(cfg, v, graph, game);
      } catch (const Error& e) {
        rep.ok = false;
        line(tag + "FAIL " + e.what());
        continue;
      }
      const StepSizeBounds b = step_size_bounds(v, graph, game, cfg.tau);
      for (int i = 0; i < game.agents(); ++i)
        line(tag + "agent " + std::to_string(i) + ": alpha " + fmt(cell.profile.alpha(i)) + " / ceiling " +
             fmt(b.alpha(i)) + " (" + fmt(cell.profile.alpha(i) / b.alpha(i)) + "), nu " +
             fmt(cell.profile.nu(i)) + " / " + fmt(b.nu(i)) + ", delta " + fmt(cell.profile.delta(i)) +
             " / " + fmt(b.delta(i)));
      if (is_aggregative(v)) line(tag + "gamma = " + fmt(cell.profile.gamma));
      for (const BoundViolation& bv : bound_violations(cell.profile, b)) {
        rep.ok = false;
        line(tag + "FAIL " + bv.step + "[" + std::to_string(bv.agent) + "] = " + fmt(bv.value) +
             " violates its ceiling " + fmt(bv.bound));
      }
      if (cfg.step_mode == StepMode::calibrated)
        line(tag + "calibration: alpha ceiling " + (cell.calibration_ceiling_stable ? "stable" : "unstable") +
             ", largest settling scale " + fmt(cell.calibration_threshold) + " x ceiling");
      if (!is_aggregative(v))
        line(tag + (cell.profile.c > cell.theory.c_min ? "OK" : "WARN") + " c = " + fmt(cell.profile.c) +
             ", c_min = " + fmt(cell.theory.c_min));
      else
        line(tag + "c = " + fmt(cell.profile.c) + " (no c_min for aggregative variants)");
      for (const std::string& w : cell.theory.warnings) line(tag + "WARN " + w);
      ExtendedOperator op(v, game, graph, cell.profile.c);
      const Preconditioner phi = op.assemble(cell.profile);
      const double lmin = phi.min_eigenvalue();
      if (lmin > 0)
        line(tag + "OK preconditioner positive definite, lambda_min = " + fmt(lmin));
      else {
        rep.ok = false;
        line(tag + "FAIL preconditioner not positive definite, lambda_min = " + fmt(lmin));
      }
      line(tag + "metric condition ||Phi^-1|| < 2 beta: " + fmt(cell.metric.inverse_norm) + " vs " +
           fmt(cell.metric.two_beta) + (cell.metric.holds ? " (holds)" : " (does not hold)"));
    }
  }
  return rep;
}

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  out << "iter,dist_to_ref,primal_consensus_gap,dual_consensus_gap,constraint_violation,"
         "residual_or_nan,batch_size,wallclock_ms\n";
  const auto& recs = trace.records;
  for (std::size_t idx = 0; idx < recs.size(); ++idx) {
    const IterationRecord& r = recs[idx];
    const bool keep = r.iter <= 1000 || r.iter % 10 == 0 || idx + 1 == recs.size();
    if (!keep) continue;
    out << r.iter << ',' << format_number(r.dist_to_ref) << ',' << format_number(r.primal_consensus_gap)
        << ',' << format_number(r.dual_consensus_gap) << ',' << format_number(r.constraint_violation)
        << ',' << format_number(r.residual) << ',' << r.batch_size << ','
        << format_number(r.wallclock_ms) << '\n';
  }
}

std::string trace_file_name(Variant v, const std::string& topology, std::uint64_t seed) {
  return variant_name(v) + "__" + topology + "__seed" + std::to_string(seed) + ".csv";
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw Error("cannot create output directory " + output_dir + ": " + ec.message());

  const Scenario sc = build_scenario(cfg);
  const GameModel& game = sc.game;
  for (Variant v : cfg.variants)
    if (is_aggregative(v) != (game.mode() == GameMode::aggregative))
      throw ConfigError("algorithm", "variant " + variant_name(v) + " does not match scenario " + cfg.scenario);

  VectorXd x_star;
  if (sc.x_star) {
    x_star = *sc.x_star;
  } else {
    x_star = solve_vgne(game).x;
  }

  struct Cell {
    Graph graph;
    TopologySpec topo;
    Variant variant;
    CellSetup setup;
  };
  std::vector<Graph> graphs;
  for (const TopologySpec& t : cfg.topologies) graphs.push_back(build_graph(t, game.agents()));
  std::vector<Cell> cells;
  for (std::size_t t = 0; t < cfg.topologies.size(); ++t)
    for (Variant v : cfg.variants)
      cells.push_back({graphs[t], cfg.topologies[t], v, prepare_cell(cfg, v, graphs[t], game)});

  struct SeedOutcome {
    bool diverged = false;
    long diverged_at = 0;
    bool converged = false;
    long iterations = 0;
    double final_dist = 0.0;
    double final_dual_gap = 0.0;
    double final_primal_gap = 0.0;
  };
  const std::size_t seeds = cfg.seeds.size();
  std::vector<SeedOutcome> results(cells.size() * seeds);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= results.size()) return;
      const Cell& cell = cells[task / seeds];
      const std::uint64_t seed = cfg.seeds[task % seeds];
      SeedOutcome& out = results[task];
      try {
        SolverOptions opt;
        opt.aux_form = is_edge(cell.variant) ? cfg.edge_form : AuxForm::node;
        opt.edge_dual = cfg.edge_dual;
        opt.schedule = cfg.batch;
        opt.sampling = cfg.sampling;
        opt.exact_gradients = cfg.exact_gradients;
        opt.seed = seed;
        DistributedSolver solver(cell.variant, game, cell.graph, cell.setup.profile, opt);
        RunControls rc;
        rc.max_iters = cfg.iters;
        rc.tol = cfg.tol;
        rc.reference = x_star;
        rc.residual = cfg.residual;
        rc.record_wallclock = cfg.record_wallclock;
        IterationTrace trace;
        try {
          RunResult r = solver.run(init_state(cell.variant, opt.aux_form, game, cell.graph, seed), rc);
          trace = std::move(r.trace);
          out.converged = r.converged;
          out.iterations = r.iterations;
          const VectorXd x = r.state.decisions(game);
          out.final_dist = (x - x_star).norm();
          const ConsensusGaps gaps = consensus_gaps(r.state);
          out.final_dual_gap = gaps.dual;
          out.final_primal_gap = gaps.primal;
        } catch (const DivergenceError& e) {
          out.diverged = true;
          out.diverged_at = e.iteration();
        }
        std::ofstream csv(fs::path(output_dir) / trace_file_name(cell.variant, cell.topo.name, seed));
        write_trace_csv(csv, trace);
        if (!csv) throw Error("cannot write trace file in " + output_dir);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(results.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw Error(first_error);

  json summary;
  summary["scenario"] = cfg.scenario;
  summary["agents"] = game.agents();
  summary["iters"] = cfg.iters;
  summary["tol"] = cfg.tol;
  summary["seeds"] = cfg.seeds;
  summary["reference_norm"] = x_star.norm();
  summary["cells"] = json::array();
  ExperimentOutcome outcome;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    std::vector<double> dist, rel, iters_to_tol;
    int diverged = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const SeedOutcome& o = results[c * seeds + s];
      if (o.diverged) {
        ++diverged;
        continue;
      }
      dist.push_back(o.final_dist);
      rel.push_back(x_star.norm() > 0 ? o.final_dist / x_star.norm() : o.final_dist);
      if (o.converged) iters_to_tol.push_back(static_cast<double>(o.iterations));
    }
    json j;
    j["algorithm"] = variant_name(cell.variant);
    j["topology"] = cell.topo.name;
    j["final_dist"] = stats(dist);
    j["final_relative_dist_median"] = rel.empty() ? json(nullptr) : json(median(rel));
    json itt;
    itt["converged"] = iters_to_tol.size();
    itt["median"] = iters_to_tol.empty() ? json(nullptr) : json(median(iters_to_tol));
    j["iterations_to_tol"] = itt;
    j["diverged_count"] = diverged;
    json prof;
    prof["alpha"] = std::vector<double>(cell.setup.profile.alpha.data(),
                                        cell.setup.profile.alpha.data() + cell.setup.profile.alpha.size());
    prof["nu"] = std::vector<double>(cell.setup.profile.nu.data(),
                                     cell.setup.profile.nu.data() + cell.setup.profile.nu.size());
    prof["delta"] = std::vector<double>(cell.setup.profile.delta.data(),
                                        cell.setup.profile.delta.data() + cell.setup.profile.delta.size());
    prof["gamma"] = cell.setup.profile.gamma;
    prof["c"] = cell.setup.profile.c;
    prof["calibration_threshold"] = cell.setup.calibration_threshold;
    j["step_sizes"] = prof;
    j["metric_condition_holds"] = cell.setup.metric.holds;
    summary["cells"].push_back(j);
    ++outcome.cells;
    if (seeds > 0 && diverged == static_cast<int>(seeds)) ++outcome.diverged_cells;
  }
  outcome.summary_json = summary.dump(2);
  std::ofstream out(fs::path(output_dir) / "summary.json");
  out << outcome.summary_json << '\n';
  if (!out) throw Error("cannot write summary.json in " + output_dir);
  return outcome;
}

}  // namespace sgne
