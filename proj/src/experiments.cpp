#include "giantatom/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <numbers>
#include <thread>

#include "giantatom/error.hpp"
#include "giantatom/reference_models.hpp"

namespace giantatom {

namespace {

constexpr double kPi = std::numbers::pi;

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << '\n';
}

std::string preamble(const ExperimentConfig& cfg, const std::string& extra = "") {
  std::string p = std::string(kCodeVersion) + "\nseed = " + std::to_string(cfg.seed) + "\n" + cfg.to_ini();
  if (!extra.empty()) p += extra;
  return p;
}

ChainRep chain_for(const ExperimentConfig& cfg, const EmitterSpec& em) {
  const ModeBasis basis = cfg.mode_basis();
  const CouplingVector cv = coupling_vector(basis, em);
  ChainOptions opts;
  opts.chain_length = cfg.numerics.chain_length;
  opts.lanczos.reorth_mode = cfg.numerics.reorth;
  opts.lanczos.rng_seed ^= cfg.seed;
  return build_chain(basis, cv, opts);
}

DmrgOptions dmrg_options(const ExperimentConfig& cfg) {
  DmrgOptions o;
  o.max_sweeps = cfg.numerics.max_sweeps;
  o.energy_tol = cfg.numerics.energy_tol;
  o.policy = {cfg.numerics.max_bond, cfg.numerics.svd_cutoff, cfg.numerics.n_b};
  if (cfg.numerics.penalty_weight > 0) o.penalty_weight = cfg.numerics.penalty_weight;
  return o;
}

std::vector<double> time_grid(double t_max, double step) {
  std::vector<double> t;
  const long n = std::lround(t_max / step);
  for (long i = 0; i <= n; ++i) t.push_back(step * static_cast<double>(i));
  return t;
}

int chain_sites(const ExperimentConfig& cfg) {
  const int dim = cfg.physics.sector == Sector::Full ? 2 * cfg.physics.cutoff : cfg.physics.cutoff;
  return cfg.numerics.chain_length > 0 ? std::min(cfg.numerics.chain_length, dim) : dim;
}

struct Output {
  std::string name;
  ObservableTable table;
};

// Writes every table only after all were computed, so a failing run leaves
// no partial output behind.
std::vector<std::string> write_all(const std::string& dir, std::vector<Output>& outs) {
  std::vector<std::string> files;
  for (auto& o : outs) {
    const std::string path = (std::filesystem::path(dir) / o.name).string();
    o.table.write_csv(path);
    files.push_back(path);
  }
  return files;
}

// ---------------------------------------------------------------------------

std::vector<Output> run_modes(const ExperimentConfig& cfg) {
  const ModeBasis basis = cfg.mode_basis();
  const EmitterSpec em = cfg.emitter(cfg.physics.lambda);
  const CouplingVector cv = coupling_vector(basis, em);
  ObservableTable t({"j", "k", "omega", "re_f", "im_f", "abs_f"});
  std::string extra = "mu0 = " + format_double(cv.mu0) + "\nsqrt_mu0 = " + format_double(std::sqrt(cv.mu0)) + "\n";
  for (const auto& w : cv.warnings) extra += "warning: " + w + "\n";
  t.preamble = preamble(cfg, extra);
  for (std::size_t p = 0; p < basis.size(); ++p) {
    const cplx f = cv.coefficients[static_cast<Eigen::Index>(p)];
    t.add_row({static_cast<double>(basis.indices[p]), basis.wavenumbers[p], basis.frequencies[p], f.real(), f.imag(),
               std::abs(f)});
  }
  return {{"modes.csv", std::move(t)}};
}

std::vector<Output> run_chain(const ExperimentConfig& cfg, const std::string& dir) {
  const ChainRep chain = chain_for(cfg, cfg.emitter(cfg.physics.lambda));
  const auto& orth = chain.report.orthogonality_estimate;
  const std::string extra = "mu0 = " + format_double(chain.mu0) + "\nreorth_steps = " +
                            std::to_string(chain.report.reorth_steps.size()) + "\nmax_orthogonality_estimate = " +
                            format_double(orth.empty() ? 0.0 : *std::max_element(orth.begin(), orth.end())) + "\n";
  // chain.csv and lambda.csv come from the chain writer, which is atomic per file
  const std::string chain_path = (std::filesystem::path(dir) / "chain.csv").string();
  const std::string lambda_path = (std::filesystem::path(dir) / "lambda.csv").string();
  write_chain_csv(chain, chain_path, lambda_path, preamble(cfg, extra));
  return {};
}

std::vector<Output> run_scans(const ExperimentConfig& cfg, int threads, bool occupations_wanted,
                              const RunOptions& ro) {
  const EmitterSpec base = cfg.emitter(0.0);
  const ChainRep chain = chain_for(cfg, base);
  const int n = static_cast<int>(cfg.lambdas.size());
  std::vector<GroundPair> pairs(n);
  parallel_for(n, threads, [&](int i) {
    EmitterSpec em = base;
    em.coupling = cfg.lambdas[i];
    pairs[i] = solve_ground_pair(chain, em, cfg.numerics.variant, dmrg_options(cfg), cfg.seed + 7919u * i);
  });
  say(ro, "solved " + std::to_string(n) + " coupling points");

  std::vector<Output> outs;
  if (!occupations_wanted) {
    ObservableTable t({"lambda", "e_gs", "e_a", "e_f", "e_int", "gap_total", "gap_a", "gap_f", "gap_int"});
    t.preamble = preamble(cfg);
    for (int i = 0; i < n; ++i) {
      EmitterSpec em = base;
      em.coupling = cfg.lambdas[i];
      const auto H = hamiltonian_mpos(chain, em, cfg.numerics.variant, cfg.numerics.n_b);
      const auto g = energy_breakdown(pairs[i].gs.state, H);
      const auto e = energy_breakdown(pairs[i].es.state, H);
      t.add_row({cfg.lambdas[i], g.e_total, g.e_atom, g.e_field, g.e_int, e.e_total - g.e_total, e.e_atom - g.e_atom,
                 e.e_field - g.e_field, e.e_int - g.e_int});
    }
    outs.push_back({"ground_scan.csv", std::move(t)});
    return outs;
  }
  ObservableTable occ({"lambda", "p_e", "n_field", "n_1", "d_p_e", "d_n_field", "d_n_1"});
  ObservableTable ov({"lambda", "ov_gs_g0", "ov_es_e0", "ov_es_a1gs"});
  std::string warn;
  const TruncationPolicy policy{cfg.numerics.max_bond, cfg.numerics.svd_cutoff, cfg.numerics.n_b};
  for (int i = 0; i < n; ++i) {
    const auto g = occupations(pairs[i].gs.state, chain);
    const auto e = occupations(pairs[i].es.state, chain);
    occ.add_row({cfg.lambdas[i], g.p_e, g.n_field, g.n_1, e.p_e - g.p_e, e.n_field - g.n_field, e.n_1 - g.n_1});
    const auto o = overlaps(pairs[i].gs.state, pairs[i].es.state, chain, policy);
    ov.add_row({cfg.lambdas[i], o.gs_g0, o.es_e0, o.es_a1gs});
    double max_site = 0.0;
    for (double v : g.n_chain) max_site = std::max(max_site, v);
    for (double v : e.n_chain) max_site = std::max(max_site, v);
    if (max_site >= 0.8 * (cfg.numerics.n_b - 1)) {
      warn += "warning: lambda = " + format_double(cfg.lambdas[i]) + " max site occupation " +
              format_double(max_site) + " near the boson truncation\n";
    }
  }
  occ.preamble = preamble(cfg, warn);
  ov.preamble = preamble(cfg, warn);
  outs.push_back({"occupations.csv", std::move(occ)});
  outs.push_back({"overlaps.csv", std::move(ov)});
  return outs;
}

std::vector<Output> run_dynamics(const ExperimentConfig& cfg, bool compare_rwa) {
  const EmitterSpec em = cfg.emitter(cfg.physics.lambda);
  const ChainRep chain = chain_for(cfg, em);
  const TebdEvolver ev(chain, em, cfg.numerics.variant, cfg.evolution());
  std::vector<int> init(ev.layout().size(), 0);
  init[0] = 1;
  const std::vector<Observable> obs{Observable::Population, Observable::FieldNumber, Observable::TotalEnergy};
  ObservableTable t = ev.evolve(product_state(ev.layout(), init), obs);
  t.preamble = preamble(cfg);
  if (!compare_rwa) return {{"dynamics.csv", std::move(t)}};

  // Single-excitation propagation of the rotating-wave model on the same modes.
  const ModeBasis basis = cfg.mode_basis();
  const std::vector<EmitterSpec> ems{em};
  const auto setup = rwa_single_excitation(basis, ems);
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
  psi0[0] = 1.0;
  const std::vector<double> times = t.column("t");
  const auto rwa = single_excitation_evolve(setup, psi0, times);
  const auto pe = t.column("p_e");
  const auto pr = rwa.populations.column("p_e_1");
  ObservableTable c({"t", "p_e", "p_e_rwa"});
  c.preamble = preamble(cfg);
  for (std::size_t i = 0; i < times.size(); ++i) c.add_row({times[i], pe[i], pr[i]});
  return {{"dynamics.csv", std::move(t)}, {"rwa_compare.csv", std::move(c)}};
}

std::vector<Output> run_dark_states(const ExperimentConfig& cfg) {
  const DarkStateParams p = cfg.dark_params();
  const auto sols = dark_state_conditions(p, cfg.dark.n_max);
  ObservableTable t({"n", "parity", "re_beta", "im_beta", "abs_beta2"});
  t.preamble = preamble(cfg);
  for (const auto& s : sols)
    t.add_row({static_cast<double>(s.n), std::string(to_string(s.parity)), s.amplitude.real(), s.amplitude.imag(),
               std::norm(s.amplitude)});
  std::vector<Output> outs{{"darkstates.csv", std::move(t)}};
  if (!cfg.dark.propagate) return outs;

  DarkStateDiscretization disc;
  disc.half_band = cfg.dark.half_band;
  disc.length = cfg.dark.disc_length;
  const auto setup = dark_state_setup(p, disc);
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
  psi0[0] = 1.0;
  const auto times = time_grid(cfg.dark.t_max, cfg.dark.t_step);
  const auto r = single_excitation_evolve(setup, psi0, times);
  ObservableTable d({"t", "p_e_1", "p_e_2", "photon", "p_e_1_dark"});
  d.preamble = preamble(cfg);
  const auto p1 = r.populations.column("p_e_1"), p2 = r.populations.column("p_e_2");
  const auto ph = r.populations.column("photon");
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double dark = sols.empty() ? 0.0 : std::norm(dark_state_superposition(p, cfg.dark.n_max, times[i]));
    d.add_row({times[i], p1[i], p2[i], ph[i], dark});
  }
  outs.push_back({"dark_dynamics.csv", std::move(d)});
  return outs;
}

std::vector<Output> run_two_atom_density(const ExperimentConfig& cfg) {
  const auto& dc = cfg.density;
  const double L = cfg.physics.length;
  const ModeBasis basis = build_mode_basis(L, dc.cutoff, Sector::Full);
  const double omega = 2.0 * kPi * dc.omega_tau_2pi / dc.tau;
  const auto prof = CouplingProfile::gaussian(dc.width);
  const std::vector<EmitterSpec> ems{{omega, dc.lambda, {0.0, dc.tau}, prof},
                                     {omega, dc.lambda, {0.5 * dc.tau, 1.5 * dc.tau}, prof}};
  const auto setup = rwa_single_excitation(basis, ems);
  const auto grid = uniform_grid(L, dc.grid);
  const auto times = time_grid(dc.t_max, dc.t_step);
  std::vector<BellState> states;
  if (dc.state != "singlet") states.push_back(BellState::Triplet);
  if (dc.state != "triplet") states.push_back(BellState::Singlet);

  std::vector<Output> outs;
  ObservableTable summary({"state", "t", "p_e_1", "p_e_2", "field_energy", "inner_energy"});
  summary.preamble = preamble(cfg, "omega = " + format_double(omega) + "\n");
  for (BellState b : states) {
    const auto r = bell_state_emission(setup, b, times, grid);
    ObservableTable d({"t", "x", "T00"});
    d.preamble = preamble(cfg, std::string("state = ") + to_string(b) + "\n");
    for (std::size_t i = 0; i < times.size(); ++i)
      for (std::size_t g = 0; g < grid.size(); ++g) d.add_row({times[i], grid[g], r.densities[i].t00[g]});
    for (const auto& row : r.summary.rows) {
      std::vector<Cell> cells{std::string(to_string(b))};
      cells.insert(cells.end(), row.begin(), row.end());
      summary.add_row(std::move(cells));
    }
    const std::string name = states.size() == 1 ? "density.csv" : std::string("density_") + to_string(b) + ".csv";
    outs.push_back({name, std::move(d)});
  }
  outs.push_back({"bell_summary.csv", std::move(summary)});
  return outs;
}

}  // namespace

// ---------------------------------------------------------------------------

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("GIANTATOM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  // lowest index first, independent of completion order
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double estimate_memory_mb(const ExperimentConfig& cfg, int threads) {
  constexpr double c16 = 16.0;
  const double n_modes = cfg.physics.sector == Sector::Full ? 2.0 * cfg.physics.cutoff : cfg.physics.cutoff;
  const double m = chain_sites(cfg);
  const double D = cfg.numerics.max_bond, nb = cfg.numerics.n_b;
  const double chain_bytes = 3.0 * n_modes * m * c16;
  double bytes = chain_bytes;
  switch (cfg.kind) {
    case ExperimentKind::Modes: bytes = n_modes * 6 * 8; break;
    case ExperimentKind::Chain: break;
    case ExperimentKind::GroundScan:
    case ExperimentKind::OccupationScan: {
      // two states + penalty state, environments, and the Krylov space of the two-site problem
      const double per = 3.0 * m * nb * D * D * c16 + 2.0 * m * D * D * 6 * c16 + 26.0 * nb * nb * D * D * c16;
      bytes += std::max(1, std::min<int>(threads, static_cast<int>(cfg.lambdas.size()))) * per;
      break;
    }
    case ExperimentKind::Dynamics:
    case ExperimentKind::RwaCompare:
      bytes += 2.0 * m * nb * D * D * c16 + 4.0 * nb * nb * D * D * c16;
      if (cfg.kind == ExperimentKind::RwaCompare) bytes += 3.0 * (n_modes + 1) * (n_modes + 1) * c16;
      break;
    case ExperimentKind::DarkStates:
      if (cfg.dark.propagate) {
        const double modes = 2.0 * (2.0 * cfg.dark.half_band * cfg.dark.disc_length / (2 * kPi) + 1);
        bytes = modes * 10 * c16;
      } else {
        bytes = 1e6;
      }
      break;
    case ExperimentKind::TwoAtomDensity: {
      const double dim = 2.0 * cfg.density.cutoff + 2;
      const double times = std::floor(cfg.density.t_max / cfg.density.t_step) + 1;
      bytes = 3.0 * dim * dim * c16 + times * (dim * c16 + 4.0 * cfg.density.grid * 8);
      break;
    }
    case ExperimentKind::OracleCheck: bytes = 64e6; break;
  }
  return bytes / (1024.0 * 1024.0);
}

GroundPair solve_ground_pair(const ChainRep& chain, const EmitterSpec& emitter, Variant variant,
                             const DmrgOptions& options, std::uint64_t seed) {
  const auto H = hamiltonian_mpos(chain, emitter, variant, options.policy.n_b);
  const int d0 = std::min(8, options.policy.max_bond);
  GroundPair p;
  p.gs = dmrg_minimize(H.total, random_mps(H.total.layout, d0, seed), options);
  const std::vector<MpsState> ortho{p.gs.state};
  p.es = dmrg_minimize(H.total, random_mps(H.total.layout, d0, seed ^ 0x9e3779b97f4a7c15ULL), options, ortho);
  return p;
}

OracleSystem oracle_system(double ratio, int modes) {
  OracleSystem s;
  s.basis = build_mode_basis(1.0, modes, Sector::Even);
  s.emitter = EmitterSpec::equidistant(2.0 * kPi, 0.0, 3, 1.0 / 20.0, CouplingProfile::gaussian(1.0 / 500.0));
  s.coupling = coupling_vector(s.basis, s.emitter);
  s.chain = build_chain(s.basis, s.coupling);
  s.emitter.coupling = ratio * s.emitter.frequency / std::sqrt(s.coupling.mu0);
  return s;
}

ObservableTable oracle_check_table(double total_time) {
  ObservableTable t({"check", "value", "reference", "deviation", "tolerance", "pass"});
  auto add = [&](const std::string& name, double v, double ref, double dev, double tol) {
    t.add_row({name, v, ref, dev, tol, std::string(dev <= tol ? "pass" : "fail")});
  };
  const int nb = 4;
  DmrgOptions dopt;
  dopt.policy = {64, 1e-14, nb};
  for (double r : {0.1, 0.5, 1.0}) {
    const auto sys = oracle_system(r);
    const EdOracle ed(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, nb));
    const auto spec = ed.lowest(2);
    const auto pair = solve_ground_pair(sys.chain, sys.emitter, Variant::Full, dopt, 11);
    const std::string tag = "_r" + format_double(r);
    add("ground_energy" + tag, pair.gs.energy, spec.energies[0], std::abs(pair.gs.energy - spec.energies[0]), 1e-8);
    add("excited_energy" + tag, pair.es.energy, spec.energies[1], std::abs(pair.es.energy - spec.energies[1]), 1e-7);
  }
  {
    const auto sys = oracle_system(0.5);
    const EdOracle ed(EdModel::from_chain(sys.chain, sys.emitter, Variant::Full, nb));
    EvolutionConfig ec;
    ec.dt = 1e-3;
    ec.total_time = total_time;
    ec.stride = 1e-2;
    ec.policy = {64, 1e-20, nb};
    const TebdEvolver ev(sys.chain, sys.emitter, Variant::Full, ec);
    const std::vector<int> init{1, 0, 0, 0, 0};
    const std::vector<Observable> obs{Observable::Population};
    const auto tab = ev.evolve(product_state(ev.layout(), init), obs);
    const auto times = tab.column("t");
    const auto ref = ed.evolve_observables(ed.basis_state(init), times).column("p_e");
    const auto pe = tab.column("p_e");
    double dev = 0.0;
    for (std::size_t i = 0; i < pe.size(); ++i) dev = std::max(dev, std::abs(pe[i] - ref[i]));
    add("tebd_population_r0.5", pe.back(), ref.back(), dev, 1e-4);
  }
  {
    // rotating-wave model: TEBD on the chain vs single-excitation propagator on the modes
    const auto sys = oracle_system(0.1);
    EvolutionConfig ec;
    ec.dt = 1e-3;
    ec.total_time = total_time;
    ec.stride = 1e-2;
    ec.policy = {64, 1e-20, 2};
    const TebdEvolver ev(sys.chain, sys.emitter, Variant::Rwa, ec);
    const std::vector<int> init{1, 0, 0, 0, 0};
    const std::vector<Observable> obs{Observable::Population, Observable::ExcitationNumber};
    const auto tab = ev.evolve(product_state(ev.layout(), init), obs);
    const std::vector<EmitterSpec> ems{sys.emitter};
    const auto setup = rwa_single_excitation(sys.basis, ems);
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(setup.dimension());
    psi0[0] = 1.0;
    const auto times = tab.column("t");
    const auto ref = single_excitation_evolve(setup, psi0, times).populations.column("p_e_1");
    const auto pe = tab.column("p_e");
    const auto nexc = tab.column("n_exc");
    double dev = 0.0, drift = 0.0;
    for (std::size_t i = 0; i < pe.size(); ++i) {
      dev = std::max(dev, std::abs(pe[i] - ref[i]));
      drift = std::max(drift, std::abs(nexc[i] - nexc[0]));
    }
    add("rwa_population_r0.1", pe.back(), ref.back(), dev, 1e-4);
    add("rwa_excitation_drift", nexc.back(), nexc.front(), drift, 1e-8);
  }
  return t;
}

RunReport run_experiment(ExperimentConfig cfg, const RunOptions& options) {
  if (options.seed) cfg.seed = *options.seed;
  cfg.validate();
  const int threads = resolve_threads(options.threads);
  const double need = estimate_memory_mb(cfg, threads);
  if (need > cfg.limits.max_memory_mb) {
    throw Error(ErrorKind::ResourceCapExceeded,
                std::string(to_string(cfg.kind)) + " needs about " + std::to_string(static_cast<long>(need)) +
                    " MiB, above limits.max_memory_mb = " + std::to_string(static_cast<long>(cfg.limits.max_memory_mb)));
  }
  const std::string dir = options.output_dir.empty() ? cfg.output : options.output_dir;
  say(options, std::string("running ") + to_string(cfg.kind) + " -> " + dir);

  std::vector<Output> outs;
  RunReport report;
  switch (cfg.kind) {
    case ExperimentKind::Modes: outs = run_modes(cfg); break;
    case ExperimentKind::Chain:
      run_chain(cfg, dir);
      report.files = {(std::filesystem::path(dir) / "chain.csv").string(),
                      (std::filesystem::path(dir) / "lambda.csv").string()};
      return report;
    case ExperimentKind::GroundScan: outs = run_scans(cfg, threads, false, options); break;
    case ExperimentKind::OccupationScan: outs = run_scans(cfg, threads, true, options); break;
    case ExperimentKind::Dynamics: outs = run_dynamics(cfg, false); break;
    case ExperimentKind::RwaCompare: outs = run_dynamics(cfg, true); break;
    case ExperimentKind::DarkStates: outs = run_dark_states(cfg); break;
    case ExperimentKind::TwoAtomDensity: outs = run_two_atom_density(cfg); break;
    case ExperimentKind::OracleCheck: {
      ObservableTable t = oracle_check_table();
      t.preamble = preamble(cfg);
      for (const auto& row : t.rows) report.all_passed &= std::get<std::string>(row.back()) == "pass";
      outs.push_back({"oracle_check.csv", std::move(t)});
      break;
    }
  }
  report.files = write_all(dir, outs);
  return report;
}

}  // namespace giantatom
