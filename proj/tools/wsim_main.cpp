// command-line front end: one subcommand per experiment family
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wsim/experiments.hpp"

namespace {

using namespace wsim;

struct Options {
  // physics (units of kappa except eta/phi)
  double kappa = 1.0, chi = -0.11, epsilon = 2.0, g = 10.0;
  std::vector<double> gamma = {4e-3};
  double eta = 1.0, phi = 0.0, f_max = 2.0, dt = 1e-3;
  std::string stray = "off";
  bool steady_start = false;

  // run shape
  int trajectories = 1000;
  double t_final = 350.0;
  std::uint64_t seed = 1;
  int stride = 100;
  int workers = 1;
  std::string out = "wsim_out";
  std::string engine = "polaron";
  std::string filter_engine;  // empty = per-subcommand default
  std::string initial = "psi_i";
  double readout_time = 350.0;
  std::string sign_rule = "zero";  // sgn(0) of the bang-bang law

  // sweep
  std::string param;
  std::vector<double> grid;

  // decay-sets
  std::vector<std::string> sets;

  // oracle-check
  int fock = 0;
  double t_unconditional = 5.0;
  double t_amplitude = 1.0;
  double dt_conditional = 1e-4;

  // which run-shape keys the config file pinned (flags still win)
  bool t_final_from_config = false;
  bool trajectories_from_config = false;
};

bool parse_onoff(const std::string& s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw CLI::ValidationError("expected on/off, got '" + s + "'");
}

Engine parse_engine(const std::string& s) {
  if (s == "polaron") return Engine::polaron;
  if (s == "adiabatic") return Engine::adiabatic;
  throw CLI::ValidationError("unknown engine '" + s + "'");
}

StateLabel parse_initial(const std::string& s) {
  if (s == "000" || s == "ground") return StateLabel::ground;
  if (s == "111" || s == "excited") return StateLabel::excited;
  if (s == "w-" || s == "w_minus") return StateLabel::w_minus;
  if (s == "w+" || s == "w_plus") return StateLabel::w_plus;
  if (s == "psi_i" || s == "separable_plus") return StateLabel::separable_plus;
  throw CLI::ValidationError("unknown initial state '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::array<double, 3> gamma_triple(const std::vector<double>& v) {
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw CLI::ValidationError("gamma needs one value or three");
}

// flat key=value file; '#' starts a comment, blank lines ignored
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config(Options& o, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "kappa") o.kappa = std::stod(value);
    else if (key == "chi") o.chi = std::stod(value);
    else if (key == "epsilon") o.epsilon = std::stod(value);
    else if (key == "g") o.g = std::stod(value);
    else if (key == "gamma") o.gamma = parse_list(value);
    else if (key == "eta") o.eta = std::stod(value);
    else if (key == "phi") o.phi = std::stod(value);
    else if (key == "f_max") o.f_max = std::stod(value);
    else if (key == "dt") o.dt = std::stod(value);
    else if (key == "stray_drive") o.stray = value;
    else if (key == "steady_start") o.steady_start = parse_onoff(value);
    else if (key == "trajectories") {
      o.trajectories = std::stoi(value);
      o.trajectories_from_config = true;
    }
    else if (key == "t_final") {
      o.t_final = std::stod(value);
      o.t_final_from_config = true;
    }
    else if (key == "seed") o.seed = std::stoull(value);
    else if (key == "stride") o.stride = std::stoi(value);
    else if (key == "workers") o.workers = std::stoi(value);
    else if (key == "out") o.out = value;
    else if (key == "engine") o.engine = value;
    else if (key == "filter_engine") o.filter_engine = value;
    else if (key == "initial") o.initial = value;
    else if (key == "readout_time") o.readout_time = std::stod(value);
    else if (key == "sign_rule") o.sign_rule = value;
    else if (key == "param") o.param = value;
    else if (key == "grid") o.grid = parse_list(value);
    else if (key == "fock") o.fock = std::stoi(value);
    else if (key == "t_unconditional") o.t_unconditional = std::stod(value);
    else if (key == "t_amplitude") o.t_amplitude = std::stod(value);
    else if (key == "dt_conditional") o.dt_conditional = std::stod(value);
    else throw std::runtime_error("unknown config key '" + key + "'");
  }
}

ExperimentConfig to_experiment(const Options& o, Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.params.kappa = o.kappa;
  cfg.params.chi = o.chi;
  cfg.params.epsilon = o.epsilon;
  cfg.params.g = o.g;
  cfg.params.gamma = gamma_triple(o.gamma);
  cfg.params.eta = o.eta;
  cfg.params.phi = o.phi;
  cfg.params.f_max = o.f_max;
  cfg.params.dt = o.dt;
  cfg.params.include_stray_drive = parse_onoff(o.stray);
  cfg.params.steady_start = o.steady_start;
  cfg.n_trajectories = o.trajectories;
  cfg.t_final = o.t_final;
  cfg.master_seed = o.seed;
  cfg.stride = o.stride;
  cfg.workers = o.workers;
  cfg.output_path = o.out;
  cfg.engine = parse_engine(o.engine);
  cfg.filter_engine = o.filter_engine.empty()
                          ? (scenario == Scenario::filter_mismatch
                                 ? Engine::adiabatic
                                 : cfg.engine)
                          : parse_engine(o.filter_engine);
  cfg.initial = parse_initial(o.initial);
  cfg.grid = o.grid;
  cfg.readout_time = o.readout_time;
  if (o.sign_rule == "zero") cfg.sign_rule_at_zero = 0;
  else if (o.sign_rule == "positive") cfg.sign_rule_at_zero = 1;
  else throw CLI::ValidationError("sign_rule must be zero or positive, got '" +
                                  o.sign_rule + "'");
  return cfg;
}

void print_summary(const EnsembleResult& r, const std::string& out) {
  std::printf("scenario: %s\n", scenario_name(r.config.scenario));
  std::printf("trajectories: %d effective, %d failed\n", r.n_effective,
              r.n_failed);
  if (!r.times.empty()) {
    std::printf("final mean fidelity: %.4f\n", r.mean_fidelity.back());
    std::printf("stabilized fidelity: %.4f\n", stabilized_fidelity(r));
  }
  if (r.config.scenario == Scenario::measure_only) {
    std::printf("class counts (3,2,1,0 excitations):");
    for (int c = 0; c < 4; ++c) std::printf(" %d", r.classes.counts[c]);
    std::printf("  unclassified: %d\n", r.classes.unclassified);
  }
  for (const auto& row : r.sweep_rows)
    std::printf("%s = %.4g  F = %.4f +- %.4f\n", row.parameter_name.c_str(),
                row.value, row.fidelity, row.stderr_fidelity);
  std::printf("wrote %s\n", out.c_str());
}

int run_single(const Options& o, Scenario scenario) {
  const ExperimentConfig cfg = to_experiment(o, scenario);
  const EnsembleResult r = run_ensemble(cfg);
  export_result(r, o.out);
  print_summary(r, o.out);
  return 0;
}

int run_sweep(const Options& o) {
  Scenario scenario;
  if (o.param == "chi") scenario = Scenario::sweep_chi;
  else if (o.param == "epsilon") scenario = Scenario::sweep_epsilon;
  else if (o.param == "f") scenario = Scenario::sweep_f;
  else if (o.param == "eta") scenario = Scenario::sweep_eta;
  else throw std::runtime_error("--param must be chi, epsilon, f or eta");
  const ExperimentConfig cfg = to_experiment(o, scenario);
  const EnsembleResult r = sweep(cfg);
  export_result(r, o.out);
  print_summary(r, o.out);
  return 0;
}

int run_decay_sets(const Options& o) {
  std::vector<std::array<double, 3>> sets;
  if (o.sets.empty()) {
    for (double gm : {4e-3, 1e-2, 2e-2, 4e-2}) sets.push_back({gm, gm, gm});
  } else {
    for (const auto& s : o.sets) sets.push_back(gamma_triple(parse_list(s)));
  }
  for (const auto& set : sets) {
    char label[96];
    std::snprintf(label, sizeof label, "set_%.3g_%.3g_%.3g", set[0], set[1],
                  set[2]);
    Options po = o;
    po.gamma = {set[0], set[1], set[2]};

    ExperimentConfig fb = to_experiment(po, Scenario::decay_rate_sets);
    const EnsembleResult rf = run_ensemble(fb);
    export_result(rf, o.out + "/" + label + "/feedback");
    std::printf("%s feedback: stabilized F = %.4f (%d trajectories)\n", label,
                stabilized_fidelity(rf), rf.n_effective);

    ExperimentConfig nf = to_experiment(po, Scenario::no_feedback_decay);
    nf.initial = StateLabel::w_minus;
    const EnsembleResult rn = run_ensemble(nf);
    export_result(rn, o.out + "/" + label + "/no_feedback");
    std::printf("%s no-feedback decay: final F = %.4f\n", label,
                rn.mean_fidelity.back());
  }
  std::printf("wrote %s\n", o.out.c_str());
  return 0;
}

int run_oracle(const Options& o) {
  OracleCheckConfig cfg;
  const ExperimentConfig base = to_experiment(o, Scenario::oracle_check);
  cfg.params = base.params;
  cfg.n_conditional = o.trajectories;
  cfg.t_conditional = o.t_final;
  cfg.t_unconditional = o.t_unconditional;
  cfg.t_amplitude = o.t_amplitude;
  cfg.dt_conditional = o.dt_conditional;
  cfg.master_seed = o.seed;
  cfg.n_fock = o.fock;
  const OracleReport rep = run_oracle_check(cfg);

  std::printf("photon space: %d levels\n", rep.n_fock);
  std::printf("frozen-qubit amplitude max err: %.3e\n", rep.amplitude_max_err);
  std::printf("unconditional population max gap: %.3e\n",
              rep.population_max_gap);
  std::printf("unconditional fidelity max gap: %.3e\n", rep.fidelity_max_gap);
  std::printf("conditional classes (3,2,1,0 excitations):");
  for (int c = 0; c < 4; ++c) std::printf(" %d", rep.class_counts[c]);
  std::printf("  unclassified: %d\n", rep.unclassified);
  std::printf("plateau worst relative err: %.3e\n", rep.plateau_worst_rel_err);
  std::printf("joint trace drift: %.3e, top-Fock population: %.3e\n",
              rep.max_trace_drift, rep.max_top_fock);

  nlohmann::json j;
  j["n_fock"] = rep.n_fock;
  j["amplitude_max_err"] = rep.amplitude_max_err;
  j["population_max_gap"] = rep.population_max_gap;
  j["fidelity_max_gap"] = rep.fidelity_max_gap;
  j["class_counts"] = rep.class_counts;
  j["unclassified"] = rep.unclassified;
  j["plateau_worst_rel_err"] = rep.plateau_worst_rel_err;
  j["max_trace_drift"] = rep.max_trace_drift;
  j["max_top_fock"] = rep.max_top_fock;
  std::filesystem::create_directories(o.out);
  std::ofstream out(o.out + "/oracle.json", std::ios::binary);
  out << j.dump(2) << '\n';
  std::printf("wrote %s/oracle.json\n", o.out.c_str());
  return 0;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", "flat key=value config file")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--trajectories", o.trajectories, "trajectories per ensemble");
  sub->add_option("--t-final", o.t_final, "horizon in units of 1/kappa");
  sub->add_option("--dt", o.dt, "step in units of 1/kappa");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--workers", o.workers, "worker threads");
  sub->add_option("--engine", o.engine, "plant engine: polaron or adiabatic");
  sub->add_option("--filter-engine", o.filter_engine,
                  "estimator engine (defaults to the plant engine)");
  sub->add_option("--stray-drive", o.stray, "qubit drive via the cavity: on/off");
  sub->add_option("--initial", o.initial,
                  "initial state: 000, 111, w-, w+ or psi_i");
  sub->add_option("--stride", o.stride, "steps between recorded samples");
  sub->add_option("--readout-time", o.readout_time,
                  "sweep readout instant in units of 1/kappa");
  sub->add_option("--sign-rule", o.sign_rule,
                  "bang-bang sgn(0): zero (no drive) or positive; exact "
                  "basis-state starts need positive to engage");
}

}  // namespace

int main(int argc, char** argv) {
  Options o;

  // config file first, explicit flags override
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc)
        apply_config(o, read_config(argv[i + 1]));
      else if (arg.rfind("--config=", 0) == 0)
        apply_config(o, read_config(arg.substr(9)));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  CLI::App app{"three-qubit entanglement stabilization by joint dispersive "
               "measurement and bang-bang feedback"};
  app.require_subcommand(1);

  auto* mo = app.add_subcommand("measure-only",
                                "collapse under measurement, no control");
  auto* fb = app.add_subcommand("feedback", "closed-loop stabilization");
  auto* sw = app.add_subcommand("sweep", "parameter sweep, closed loop");
  auto* ds = app.add_subcommand("decay-sets",
                                "feedback vs free decay per damping set");
  auto* fm = app.add_subcommand("filter-mismatch",
                                "adiabatic estimator on a polaron plant");
  auto* oc = app.add_subcommand("oracle-check",
                                "validate engines against the joint model");
  for (CLI::App* sub : {mo, fb, sw, ds, fm, oc}) add_common(sub, o);

  sw->add_option("--param", o.param, "chi, epsilon, f or eta")->required();
  sw->add_option("--grid", o.grid, "sweep values")
      ->required()
      ->delimiter(',');
  ds->add_option("--set", o.sets,
                 "gamma triple a,b,c (or one value), repeatable");
  oc->add_option("--fock", o.fock, "photon levels (0 = minimum admissible)");
  oc->add_option("--t-unconditional", o.t_unconditional,
                 "horizon of the unconditional comparison");
  oc->add_option("--t-amplitude", o.t_amplitude,
                 "horizon of the frozen-qubit amplitude check");
  oc->add_option("--dt-conditional", o.dt_conditional,
                 "step of conditional oracle trajectories");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mo->parsed()) return run_single(o, Scenario::measure_only);
    if (fb->parsed()) return run_single(o, Scenario::feedback);
    if (sw->parsed()) return run_sweep(o);
    if (ds->parsed()) return run_decay_sets(o);
    if (fm->parsed()) return run_single(o, Scenario::filter_mismatch);
    if (oc->parsed()) {
      // the oracle is expensive; untouched defaults shrink to a spot check
      if (oc->count("--t-final") == 0 && !o.t_final_from_config)
        o.t_final = 3.0;
      if (oc->count("--trajectories") == 0 && !o.trajectories_from_config)
        o.trajectories = 2;
      return run_oracle(o);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
