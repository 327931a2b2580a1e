#include "wsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "wsim/joint.hpp"

namespace wsim {

namespace {

const char* engine_name(Engine e) {
  return e == Engine::polaron ? "polaron" : "adiabatic";
}

const char* state_name(StateLabel s) {
  switch (s) {
    case StateLabel::ground: return "ground";
    case StateLabel::excited: return "excited";
    case StateLabel::w_minus: return "w_minus";
    case StateLabel::w_plus: return "w_plus";
    case StateLabel::separable_plus: return "separable_plus";
  }
  return "?";
}

bool is_sweep(Scenario s) {
  return s == Scenario::sweep_chi || s == Scenario::sweep_epsilon ||
         s == Scenario::sweep_f || s == Scenario::sweep_eta;
}

bool wants_controller(Scenario s) {
  return s == Scenario::feedback || s == Scenario::decay_rate_sets ||
         s == Scenario::filter_mismatch;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);  // no platform newline translation
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

double tail_mean(const std::vector<double>& v, double fraction) {
  if (v.empty()) return 0.0;
  size_t first = static_cast<size_t>(std::floor((1.0 - fraction) * v.size()));
  if (first >= v.size()) first = v.size() - 1;
  double acc = 0;
  for (size_t i = first; i < v.size(); ++i) acc += v[i];
  return acc / static_cast<double>(v.size() - first);
}

}  // namespace

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::measure_only: return "measure_only";
    case Scenario::feedback: return "feedback";
    case Scenario::no_feedback_decay: return "no_feedback_decay";
    case Scenario::sweep_chi: return "sweep_chi";
    case Scenario::sweep_epsilon: return "sweep_epsilon";
    case Scenario::sweep_f: return "sweep_f";
    case Scenario::sweep_eta: return "sweep_eta";
    case Scenario::decay_rate_sets: return "decay_rate_sets";
    case Scenario::filter_mismatch: return "filter_mismatch";
    case Scenario::oracle_check: return "oracle_check";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  params.validate();
  if (n_trajectories < 1)
    throw std::invalid_argument("n_trajectories must be >= 1");
  if (!(t_final > 0)) throw std::invalid_argument("t_final must be positive");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (is_sweep(scenario) && grid.empty())
    throw std::invalid_argument("sweep scenario needs a value grid");
  if (!(readout_time > 0))
    throw std::invalid_argument("readout_time must be positive");
  if (sign_rule_at_zero < -1 || sign_rule_at_zero > 1)
    throw std::invalid_argument("sign_rule_at_zero must be -1, 0, or 1");
}

EnsembleResult run_ensemble(const ExperimentConfig& cfg) {
  cfg.validate();
  if (is_sweep(cfg.scenario))
    throw std::invalid_argument("sweep scenarios go through sweep()");
  if (cfg.scenario == Scenario::oracle_check)
    throw std::invalid_argument("oracle_check is not an ensemble scenario");

  const PureState initial = named_state(cfg.initial);
  const bool with_controller = wants_controller(cfg.scenario);
  const int n = cfg.n_trajectories;

  std::vector<std::optional<TrajectoryRecord>> recs(n);
  std::vector<std::string> errors(n);
  std::atomic<int> next{0};

  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        FeedbackLaw law;
        law.f_max = cfg.params.f_max;
        law.filter_engine = cfg.filter_engine;
        law.share_plant_noise = cfg.scenario == Scenario::filter_mismatch;
        law.sign_rule_at_zero = cfg.sign_rule_at_zero;
        recs[i] = run_trajectory(cfg.params, initial, cfg.engine,
                                 with_controller ? &law : nullptr, cfg.t_final,
                                 trajectory_seed(cfg.master_seed, i),
                                 cfg.stride);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown failure";
      }
    }
  };

  const int n_workers = std::min(cfg.workers, n);
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  EnsembleResult r;
  r.config = cfg;
  std::vector<TrajectoryRecord> good;
  good.reserve(n);
  for (int i = 0; i < n; ++i) {  // index order: reduction is order-stable
    if (recs[i]) {
      good.push_back(std::move(*recs[i]));
    } else {
      ++r.n_failed;
    }
  }
  if (r.n_failed > 0 && 100 * r.n_failed >= n) {
    for (int i = 0; i < n; ++i)
      if (!errors[i].empty())
        throw std::runtime_error(
            "ensemble failure rate >= 1% (" + std::to_string(r.n_failed) +
            " of " + std::to_string(n) + "); first: trajectory " +
            std::to_string(i) + ": " + errors[i]);
  }
  r.n_effective = static_cast<int>(good.size());
  if (good.empty()) throw std::runtime_error("ensemble produced no records");

  const size_t n_samples = good.front().times.size();
  r.times = good.front().times;
  r.mean_fidelity.assign(n_samples, 0.0);
  r.stderr_fidelity.assign(n_samples, 0.0);
  for (const auto& rec : good) {
    if (rec.times.size() != n_samples)
      throw std::runtime_error("inconsistent sample grids across ensemble");
    for (size_t s = 0; s < n_samples; ++s)
      r.mean_fidelity[s] += rec.fidelity[s];
  }
  for (double& m : r.mean_fidelity) m /= r.n_effective;
  if (r.n_effective > 1) {
    for (const auto& rec : good)
      for (size_t s = 0; s < n_samples; ++s) {
        const double d = rec.fidelity[s] - r.mean_fidelity[s];
        r.stderr_fidelity[s] += d * d;
      }
    const double norm = 1.0 / (r.n_effective - 1.0) / r.n_effective;
    for (double& v : r.stderr_fidelity) v = std::sqrt(v * norm);
  }

  if (cfg.scenario == Scenario::measure_only)
    r.classes = classify_and_average(good, cfg.params);
  return r;
}

std::array<double, 4> outcome_plateaus(const SystemParams& p) {
  const SteadyRates sr = steady_rate_formulas(p.chi / p.kappa, p);
  const double s0 = sr.sqrt_kappa_gamma0 / std::sqrt(p.kappa);
  const double s1 = sr.sqrt_kappa_gamma1 / std::sqrt(p.kappa);
  // <c0 + c0^dag> targets for 3, 2, 1, 0 excitations
  return {3 * s0 - s1, s0 + s1, -s0 - s1, -3 * s0 + s1};
}

ClassSummary classify_and_average(const std::vector<TrajectoryRecord>& records,
                                  const SystemParams& p) {
  ClassSummary cs;
  cs.plateau = outcome_plateaus(p);

  std::array<double, 4> sorted = cs.plateau;
  std::sort(sorted.begin(), sorted.end());
  double min_gap = sorted[1] - sorted[0];
  for (int i = 1; i < 3; ++i) min_gap = std::min(min_gap, sorted[i + 1] - sorted[i]);
  const double threshold = 0.5 * min_gap;

  if (records.empty()) return cs;
  const size_t n_samples = records.front().times.size();
  for (auto& trace : cs.mean_current) trace.assign(n_samples, 0.0);
  std::array<double, 4> tail_acc{};

  for (const auto& rec : records) {
    const double tail = tail_mean(rec.expect_c, 0.2);
    int best = 0;
    double best_d = std::abs(tail - cs.plateau[0]);
    for (int c = 1; c < 4; ++c) {
      const double d = std::abs(tail - cs.plateau[c]);
      if (d < best_d) { best_d = d; best = c; }
    }
    if (best_d > threshold) {
      ++cs.unclassified;
      continue;
    }
    ++cs.counts[best];
    tail_acc[best] += tail;
    for (size_t s = 0; s < n_samples; ++s)
      cs.mean_current[best][s] += rec.current[s];
  }
  for (int c = 0; c < 4; ++c) {
    if (cs.counts[c] == 0) continue;
    tail_acc[c] /= cs.counts[c];
    cs.tail_mean[c] = tail_acc[c];
    for (double& v : cs.mean_current[c]) v /= cs.counts[c];
  }
  return cs;
}

EnsembleResult sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!is_sweep(cfg.scenario))
    throw std::invalid_argument("sweep() needs a sweep_* scenario");

  const char* name = nullptr;
  switch (cfg.scenario) {
    case Scenario::sweep_chi: name = "chi"; break;
    case Scenario::sweep_epsilon: name = "epsilon"; break;
    case Scenario::sweep_f: name = "f"; break;
    case Scenario::sweep_eta: name = "eta"; break;
    default: break;
  }

  EnsembleResult out;
  out.config = cfg;
  for (double value : cfg.grid) {
    ExperimentConfig point = cfg;
    point.scenario = Scenario::feedback;  // every sweep runs closed loop
    point.grid.clear();
    point.output_path.clear();
    switch (cfg.scenario) {
      case Scenario::sweep_chi: point.params.chi = value; break;
      case Scenario::sweep_epsilon: point.params.epsilon = value; break;
      case Scenario::sweep_f: point.params.f_max = value; break;
      case Scenario::sweep_eta: point.params.eta = value; break;
      default: break;
    }
    const EnsembleResult er = run_ensemble(point);

    size_t idx = 0;  // sample closest to the readout instant
    double best = std::abs(er.times.front() - cfg.readout_time);
    for (size_t s = 1; s < er.times.size(); ++s) {
      const double d = std::abs(er.times[s] - cfg.readout_time);
      if (d < best) { best = d; idx = s; }
    }
    out.sweep_rows.push_back({name, value, er.mean_fidelity[idx],
                              er.stderr_fidelity[idx], er.n_effective});
    out.n_effective = er.n_effective;
    out.n_failed += er.n_failed;
  }
  return out;
}

OracleReport run_oracle_check(const OracleCheckConfig& cfg) {
  cfg.params.validate();
  OracleReport rep;
  const PureState w = named_state(StateLabel::w_minus);
  const PureState psi_i = named_state(StateLabel::separable_plus);

  // (a) frozen qubits: the oracle's <a>(t) against the amplitude ODE,
  // basis state by basis state.  Decay and the stray drive would unfreeze
  // the qubits, so both are off here.
  {
    SystemParams p = cfg.params;
    p.gamma = {0, 0, 0};
    p.include_stray_drive = false;
    const int n_fock = cfg.n_fock > 0 ? cfg.n_fock : minimum_fock_dimension(p);
    rep.n_fock = n_fock;
    const long n_steps = std::lround(cfg.t_amplitude / p.dt);
    for (int x = 0; x < 8; ++x) {
      PureState basis = PureState::Zero();
      basis(x) = 1.0;
      JointState s = JointState::qubits_with_vacuum(basis, n_fock);
      CoherentAmplitudeSet amps = CoherentAmplitudeSet::vacuum(p);
      double t = 0;
      for (long n = 0; n < n_steps; ++n) {
        s = joint_unconditional_step(s, p, t, p.dt);
        amps = evolve_amplitudes(amps, p, p.dt);
        t = (n + 1) * p.dt;
        const double err = std::abs(cavity_amplitude(s) - amps.alpha[x]);
        rep.amplitude_max_err = std::max(rep.amplitude_max_err, err);
        rep.max_top_fock = std::max(rep.max_top_fock, top_fock_population(s));
      }
    }
  }

  // (b) unconditional joint vs effective model from |psi_i> x vacuum; both
  // frames coincide at t = 0 and the compared observables (populations and
  // target fidelity) are insensitive to the residual frame mismatch
  {
    const SystemParams p = cfg.params;
    const int n_fock = cfg.n_fock > 0 ? cfg.n_fock : minimum_fock_dimension(p);
    JointState s = JointState::qubits_with_vacuum(psi_i, n_fock);
    DensityMatrix rho = projector(psi_i);
    CoherentAmplitudeSet amps = CoherentAmplitudeSet::vacuum(p);
    const long n_steps = std::lround(cfg.t_unconditional / p.dt);
    double t = 0;
    for (long n = 0; n < n_steps; ++n) {
      s = joint_unconditional_step(s, p, t, p.dt);
      rho = unconditional_step(rho, amps, p, t, p.dt);
      t = (n + 1) * p.dt;
      if ((n + 1) % 100 == 0 || n + 1 == n_steps) {
        const DensityMatrix red = reduced_qubit_state(s);
        for (int x = 0; x < 8; ++x)
          rep.population_max_gap =
              std::max(rep.population_max_gap,
                       std::abs(red(x, x).real() - rho(x, x).real()));
        const double fj = (w.adjoint() * red * w)(0).real();
        const double fe = (w.adjoint() * rho * w)(0).real();
        rep.fidelity_max_gap =
            std::max(rep.fidelity_max_gap, std::abs(fj - fe));
        rep.max_top_fock = std::max(rep.max_top_fock, top_fock_population(s));
      }
    }
  }

  // (c) conditional collapse: oracle trajectories classify onto the four
  // closed-form plateaus
  {
    SystemParams p = cfg.params;
    p.gamma = {0, 0, 0};  // plateaus are exact only without decay
    p.eta = 1.0;
    const int n_fock = cfg.n_fock > 0 ? cfg.n_fock : minimum_fock_dimension(p);
    const std::array<double, 4> plateau = outcome_plateaus(p);
    std::array<double, 4> sorted = plateau;
    std::sort(sorted.begin(), sorted.end());
    double min_gap = sorted[1] - sorted[0];
    for (int i = 1; i < 3; ++i)
      min_gap = std::min(min_gap, sorted[i + 1] - sorted[i]);

    for (int i = 0; i < cfg.n_conditional; ++i) {
      const JointRecord rec = run_joint_trajectory(
          p, psi_i, n_fock, cfg.t_conditional,
          trajectory_seed(cfg.master_seed, i), 100, cfg.dt_conditional);
      const double tail = tail_mean(rec.expect_c, 0.2);
      int best = 0;
      double best_d = std::abs(tail - plateau[0]);
      for (int c = 1; c < 4; ++c) {
        const double d = std::abs(tail - plateau[c]);
        if (d < best_d) { best_d = d; best = c; }
      }
      if (best_d > 0.5 * min_gap) {
        ++rep.unclassified;
      } else {
        ++rep.class_counts[best];
        rep.plateau_worst_rel_err =
            std::max(rep.plateau_worst_rel_err,
                     best_d / std::abs(plateau[best]));
      }
      rep.max_trace_drift = std::max(rep.max_trace_drift, rec.max_trace_drift);
      rep.max_top_fock = std::max(rep.max_top_fock, rec.max_top_fock);
    }
  }
  return rep;
}

double stabilized_fidelity(const EnsembleResult& r) {
  if (r.times.empty()) throw std::invalid_argument("no fidelity trace");
  const double t_end = r.times.back();
  const double t_lo = t_end >= 350.0 ? 150.0 : 0.4 * t_end;
  double acc = 0;
  int count = 0;
  for (size_t s = 0; s < r.times.size(); ++s) {
    if (r.times[s] < t_lo) continue;
    acc += r.mean_fidelity[s];
    ++count;
  }
  if (count == 0) throw std::invalid_argument("empty stabilization window");
  return acc / count;
}

void export_result(const EnsembleResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  fs::create_directories(base);

  if (!r.times.empty()) {
    auto out = open_out(base / "fidelity.csv");
    out << "time_per_kappa,mean_fidelity,stderr,n_effective\n";
    for (size_t s = 0; s < r.times.size(); ++s)
      out << fmt(r.times[s]) << ',' << fmt(r.mean_fidelity[s]) << ','
          << fmt(r.stderr_fidelity[s]) << ',' << r.n_effective << '\n';
  }

  if (r.config.scenario == Scenario::measure_only) {
    {
      auto out = open_out(base / "classes.csv");
      out << "class,plateau,count,tail_mean\n";
      for (int c = 0; c < 4; ++c)
        out << c << ',' << fmt(r.classes.plateau[c]) << ','
            << r.classes.counts[c] << ',' << fmt(r.classes.tail_mean[c])
            << '\n';
      out << "unclassified,," << r.classes.unclassified << ",\n";
    }
    if (!r.times.empty()) {
      auto out = open_out(base / "class_currents.csv");
      out << "time_per_kappa,class0,class1,class2,class3\n";
      for (size_t s = 0; s < r.times.size(); ++s) {
        out << fmt(r.times[s]);
        for (int c = 0; c < 4; ++c) {
          out << ',';
          if (r.classes.counts[c] > 0)
            out << fmt(r.classes.mean_current[c][s]);
          else
            out << "nan";
        }
        out << '\n';
      }
    }
  }

  if (!r.sweep_rows.empty()) {
    auto out = open_out(base / "sweep.csv");
    out << "parameter_name,value,fidelity_at_readout,stderr\n";
    for (const auto& row : r.sweep_rows)
      out << row.parameter_name << ',' << fmt(row.value) << ','
          << fmt(row.fidelity) << ',' << fmt(row.stderr_fidelity) << '\n';
  }

  if (r.config.scenario == Scenario::sweep_chi) {
    auto out = open_out(base / "separation.csv");
    out << "chi_over_kappa,separation\n";
    for (int i = 1; i <= 200; ++i) {  // analytic reference curve
      const double u = -0.005 * i;
      out << fmt(u) << ',' << fmt(outcome_separation(u, r.config.params))
          << '\n';
    }
  }

  nlohmann::json j;
  j["tool"] = "wsim";
  j["version"] = "1.0.0";
  j["scenario"] = scenario_name(r.config.scenario);
  j["master_seed"] = r.config.master_seed;
  j["n_trajectories"] = r.config.n_trajectories;
  j["n_effective"] = r.n_effective;
  j["n_failed"] = r.n_failed;
  j["t_final"] = r.config.t_final;
  j["stride"] = r.config.stride;
  j["readout_time"] = r.config.readout_time;
  j["engine"] = engine_name(r.config.engine);
  j["filter_engine"] = engine_name(r.config.filter_engine);
  j["initial"] = state_name(r.config.initial);
  j["grid"] = r.config.grid;
  j["workers"] = r.config.workers;
  j["sign_rule_at_zero"] = r.config.sign_rule_at_zero;
  const SystemParams& p = r.config.params;
  j["params"] = {{"kappa", p.kappa},
                 {"chi", p.chi},
                 {"epsilon", p.epsilon},
                 {"g", p.g},
                 {"gamma", p.gamma},
                 {"eta", p.eta},
                 {"phi", p.phi},
                 {"f_max", p.f_max},
                 {"dt", p.dt},
                 {"include_stray_drive", p.include_stray_drive},
                 {"steady_start", p.steady_start}};
  auto out = open_out(base / "provenance.json");
  out << j.dump(2) << '\n';
}

}  // namespace wsim
