#include "giantatom/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "giantatom/error.hpp"
#include "giantatom/table.hpp"

namespace giantatom {

namespace {

constexpr double kPi = 3.141592653589793;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double to_double(const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

long to_long(const std::string& v) {
  long x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

Sector parse_sector(const std::string& v) {
  const std::string l = lower(v);
  if (l == "full") return Sector::Full;
  if (l == "even") return Sector::Even;
  throw std::invalid_argument("sector must be full or even");
}

Reorthogonalization parse_reorth(const std::string& v) {
  const std::string l = lower(v);
  if (l == "none") return Reorthogonalization::None;
  if (l == "partial") return Reorthogonalization::Partial;
  if (l == "full") return Reorthogonalization::Full;
  throw std::invalid_argument("reorth must be none, partial or full");
}

const char* reorth_name(Reorthogonalization r) {
  switch (r) {
    case Reorthogonalization::None: return "none";
    case Reorthogonalization::Partial: return "partial";
    case Reorthogonalization::Full: return "full";
  }
  return "?";
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["experiment.kind"] = [](auto& c, auto& v) { c.kind = parse_experiment_kind(v); };
    t["experiment.output"] = [](auto& c, auto& v) { c.output = v; };
    t["experiment.seed"] = [](auto& c, auto& v) {
      std::uint64_t s = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
      if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("seed must be a u64");
      c.seed = s;
    };
    t["physics.length"] = [](auto& c, auto& v) { c.physics.length = to_double(v); };
    t["physics.omega"] = [](auto& c, auto& v) { c.physics.omega = to_double(v); };
    t["physics.lambda"] = [](auto& c, auto& v) { c.physics.lambda = to_double(v); };
    t["physics.points"] = [](auto& c, auto& v) { c.physics.points = static_cast<int>(to_long(v)); };
    t["physics.tau"] = [](auto& c, auto& v) { c.physics.tau = to_double(v); };
    t["physics.width"] = [](auto& c, auto& v) { c.physics.width = to_double(v); };
    t["physics.profile"] = [](auto& c, auto& v) { c.physics.profile = parse_profile_kind(lower(v)); };
    t["physics.cutoff"] = [](auto& c, auto& v) { c.physics.cutoff = static_cast<int>(to_long(v)); };
    t["physics.sector"] = [](auto& c, auto& v) { c.physics.sector = parse_sector(v); };
    t["numerics.n_b"] = [](auto& c, auto& v) { c.numerics.n_b = static_cast<int>(to_long(v)); };
    t["numerics.max_bond"] = [](auto& c, auto& v) { c.numerics.max_bond = static_cast<int>(to_long(v)); };
    t["numerics.svd_cutoff"] = [](auto& c, auto& v) { c.numerics.svd_cutoff = to_double(v); };
    t["numerics.chain_length"] = [](auto& c, auto& v) { c.numerics.chain_length = static_cast<int>(to_long(v)); };
    t["numerics.reorth"] = [](auto& c, auto& v) { c.numerics.reorth = parse_reorth(v); };
    t["numerics.variant"] = [](auto& c, auto& v) { c.numerics.variant = parse_variant(lower(v)); };
    t["numerics.dt"] = [](auto& c, auto& v) { c.numerics.dt = to_double(v); };
    t["numerics.total_time"] = [](auto& c, auto& v) { c.numerics.total_time = to_double(v); };
    t["numerics.stride"] = [](auto& c, auto& v) { c.numerics.stride = to_double(v); };
    t["numerics.order"] = [](auto& c, auto& v) { c.numerics.order = static_cast<int>(to_long(v)); };
    t["numerics.max_sweeps"] = [](auto& c, auto& v) { c.numerics.max_sweeps = static_cast<int>(to_long(v)); };
    t["numerics.energy_tol"] = [](auto& c, auto& v) { c.numerics.energy_tol = to_double(v); };
    t["numerics.penalty_weight"] = [](auto& c, auto& v) { c.numerics.penalty_weight = to_double(v); };
    t["scan.lambdas"] = [](auto& c, auto& v) { c.lambdas = to_list(v); };
    t["darkstates.omega_tau"] = [](auto& c, auto& v) { c.dark.omega_tau = to_double(v); };
    t["darkstates.gamma_tau"] = [](auto& c, auto& v) { c.dark.gamma_tau = to_double(v); };
    t["darkstates.ratio"] = [](auto& c, auto& v) { c.dark.ratio = to_double(v); };
    t["darkstates.n_max"] = [](auto& c, auto& v) { c.dark.n_max = static_cast<int>(to_long(v)); };
    t["darkstates.propagate"] = [](auto& c, auto& v) { c.dark.propagate = to_bool(v); };
    t["darkstates.half_band"] = [](auto& c, auto& v) { c.dark.half_band = to_double(v); };
    t["darkstates.disc_length"] = [](auto& c, auto& v) { c.dark.disc_length = to_double(v); };
    t["darkstates.t_max"] = [](auto& c, auto& v) { c.dark.t_max = to_double(v); };
    t["darkstates.t_step"] = [](auto& c, auto& v) { c.dark.t_step = to_double(v); };
    t["density.state"] = [](auto& c, auto& v) {
      const std::string l = lower(v);
      if (l != "triplet" && l != "singlet" && l != "both") throw std::invalid_argument("state must be triplet, singlet or both");
      c.density.state = l;
    };
    t["density.lambda"] = [](auto& c, auto& v) { c.density.lambda = to_double(v); };
    t["density.omega_tau_2pi"] = [](auto& c, auto& v) { c.density.omega_tau_2pi = to_double(v); };
    t["density.cutoff"] = [](auto& c, auto& v) { c.density.cutoff = static_cast<int>(to_long(v)); };
    t["density.tau"] = [](auto& c, auto& v) { c.density.tau = to_double(v); };
    t["density.width"] = [](auto& c, auto& v) { c.density.width = to_double(v); };
    t["density.grid"] = [](auto& c, auto& v) { c.density.grid = static_cast<int>(to_long(v)); };
    t["density.t_max"] = [](auto& c, auto& v) { c.density.t_max = to_double(v); };
    t["density.t_step"] = [](auto& c, auto& v) { c.density.t_step = to_double(v); };
    t["limits.max_memory_mb"] = [](auto& c, auto& v) { c.limits.max_memory_mb = to_double(v); };
    t["limits.max_ed_dimension"] = [](auto& c, auto& v) { c.limits.max_ed_dimension = to_long(v); };
    return t;
  }();
  return table;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, what);
}

}  // namespace

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Modes: return "modes";
    case ExperimentKind::Chain: return "chain";
    case ExperimentKind::GroundScan: return "ground_scan";
    case ExperimentKind::OccupationScan: return "occupation_scan";
    case ExperimentKind::Dynamics: return "dynamics";
    case ExperimentKind::RwaCompare: return "rwa_compare";
    case ExperimentKind::DarkStates: return "dark_states";
    case ExperimentKind::TwoAtomDensity: return "two_atom_density";
    case ExperimentKind::OracleCheck: return "oracle_check";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  std::string l = lower(name);
  l.erase(std::remove(l.begin(), l.end(), '_'), l.end());
  for (auto k : {ExperimentKind::Modes, ExperimentKind::Chain, ExperimentKind::GroundScan,
                 ExperimentKind::OccupationScan, ExperimentKind::Dynamics, ExperimentKind::RwaCompare,
                 ExperimentKind::DarkStates, ExperimentKind::TwoAtomDensity, ExperimentKind::OracleCheck}) {
    std::string n = to_string(k);
    n.erase(std::remove(n.begin(), n.end(), '_'), n.end());
    if (n == l) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

void ExperimentConfig::validate() const {
  const auto& p = physics;
  check(p.length > 0, "physics.length must be > 0");
  check(p.omega > 0, "physics.omega must be > 0");
  check(p.lambda >= 0, "physics.lambda must be >= 0");
  check(p.points >= 1, "physics.points must be >= 1");
  check(p.tau >= 0, "physics.tau must be >= 0");
  check(p.profile == ProfileKind::Delta || p.width > 0, "physics.width must be > 0");
  check(p.cutoff >= 1, "physics.cutoff must be >= 1");
  const auto& n = numerics;
  check(n.n_b >= 2, "numerics.n_b must be >= 2");
  check(n.max_bond >= 1, "numerics.max_bond must be >= 1");
  check(n.svd_cutoff >= 0, "numerics.svd_cutoff must be >= 0");
  check(n.chain_length >= 0, "numerics.chain_length must be >= 0");
  check(n.dt > 0 && n.stride >= n.dt * (1 - 1e-9), "numerics.dt must be > 0 and <= stride");
  check(n.total_time >= 0, "numerics.total_time must be >= 0");
  check(n.order == 1 || n.order == 2, "numerics.order must be 1 or 2");
  check(n.max_sweeps >= 1, "numerics.max_sweeps must be >= 1");
  check(n.energy_tol > 0, "numerics.energy_tol must be > 0");
  check(n.penalty_weight >= 0, "numerics.penalty_weight must be >= 0");
  for (double l : lambdas) check(l >= 0, "scan.lambdas must be >= 0");
  check(!lambdas.empty(), "scan.lambdas must not be empty");
  check(dark.gamma_tau > 0 && dark.ratio > 0 && dark.ratio < 1, "darkstates: need gamma_tau > 0, 0 < ratio < 1");
  check(dark.n_max >= 1, "darkstates.n_max must be >= 1");
  check(dark.half_band > 0 && dark.disc_length > 0, "darkstates: band and length must be > 0");
  check(dark.t_max >= 0 && dark.t_step > 0, "darkstates: t_max >= 0, t_step > 0");
  check(density.lambda >= 0 && density.cutoff >= 1 && density.tau > 0 && density.width > 0,
        "density: bad lambda, cutoff, tau or width");
  check(density.grid >= 2 && density.t_max >= 0 && density.t_step > 0, "density: bad grid or times");
  check(limits.max_memory_mb > 0 && limits.max_ed_dimension > 0, "limits must be > 0");
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream o;
  auto d = [](double x) { return format_double(x); };
  o << "[experiment]\nkind = " << to_string(kind) << "\noutput = " << output << "\nseed = " << seed << "\n";
  o << "[physics]\nlength = " << d(physics.length) << "\nomega = " << d(physics.omega) << "\nlambda = "
    << d(physics.lambda) << "\npoints = " << physics.points << "\ntau = " << d(physics.tau) << "\nwidth = "
    << d(physics.width) << "\nprofile = " << to_string(physics.profile) << "\ncutoff = " << physics.cutoff
    << "\nsector = " << (physics.sector == Sector::Full ? "full" : "even") << "\n";
  o << "[numerics]\nn_b = " << numerics.n_b << "\nmax_bond = " << numerics.max_bond << "\nsvd_cutoff = "
    << d(numerics.svd_cutoff) << "\nchain_length = " << numerics.chain_length << "\nreorth = "
    << reorth_name(numerics.reorth) << "\nvariant = " << to_string(numerics.variant) << "\ndt = " << d(numerics.dt)
    << "\ntotal_time = " << d(numerics.total_time) << "\nstride = " << d(numerics.stride) << "\norder = "
    << numerics.order << "\nmax_sweeps = " << numerics.max_sweeps << "\nenergy_tol = " << d(numerics.energy_tol)
    << "\npenalty_weight = " << d(numerics.penalty_weight) << "\n";
  o << "[scan]\nlambdas = ";
  for (std::size_t i = 0; i < lambdas.size(); ++i) o << (i ? ", " : "") << d(lambdas[i]);
  o << "\n[darkstates]\nomega_tau = " << d(dark.omega_tau) << "\ngamma_tau = " << d(dark.gamma_tau)
    << "\nratio = " << d(dark.ratio) << "\nn_max = " << dark.n_max << "\npropagate = "
    << (dark.propagate ? "true" : "false") << "\nhalf_band = " << d(dark.half_band) << "\ndisc_length = "
    << d(dark.disc_length) << "\nt_max = " << d(dark.t_max) << "\nt_step = " << d(dark.t_step) << "\n";
  o << "[density]\nstate = " << density.state << "\nlambda = " << d(density.lambda) << "\nomega_tau_2pi = "
    << d(density.omega_tau_2pi) << "\ncutoff = " << density.cutoff << "\ntau = " << d(density.tau)
    << "\nwidth = " << d(density.width) << "\ngrid = " << density.grid << "\nt_max = " << d(density.t_max)
    << "\nt_step = " << d(density.t_step) << "\n";
  o << "[limits]\nmax_memory_mb = " << d(limits.max_memory_mb) << "\nmax_ed_dimension = " << limits.max_ed_dimension
    << "\n";
  return o.str();
}

ModeBasis ExperimentConfig::mode_basis() const { return build_mode_basis(physics.length, physics.cutoff, physics.sector); }

EmitterSpec ExperimentConfig::emitter(double lambda) const {
  const CouplingProfile prof{physics.profile, physics.profile == ProfileKind::Delta ? 0.0 : physics.width};
  return EmitterSpec::equidistant(physics.omega, lambda, physics.points, physics.tau, prof);
}

EvolutionConfig ExperimentConfig::evolution() const {
  EvolutionConfig e;
  e.dt = numerics.dt;
  e.total_time = numerics.total_time;
  e.order = numerics.order;
  e.stride = numerics.stride;
  e.policy = {numerics.max_bond, numerics.svd_cutoff, numerics.n_b};
  return e;
}

DarkStateParams ExperimentConfig::dark_params() const {
  return {dark.omega_tau, dark.gamma_tau, dark.ratio, 1.0};
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  std::set<std::string> seen;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"experiment", "physics", "numerics", "scan",
                                               "darkstates", "density",   "limits"};
      if (!known.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    if (section.empty()) fail("key outside of a section");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(full).second) fail("duplicate key '" + key + "'");
    if (value.empty()) fail("empty value for '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      fail(e.what());
    } catch (const std::exception& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace giantatom
