#ifndef SPHERELAB_RUNNER_HPP
#define SPHERELAB_RUNNER_HPP

// Run configuration, stage pipeline and persistence for the command-line tool.

#include <spherelab/ansatz.hpp>
#include <spherelab/error.hpp>
#include <spherelab/full_solver.hpp>
#include <spherelab/ground_state.hpp>
#include <spherelab/io.hpp>
#include <spherelab/normalization.hpp>
#include <spherelab/potential.hpp>
#include <spherelab/radial.hpp>
#include <spherelab/reduction.hpp>

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace spherelab {

using json = nlohmann::ordered_json;

struct RunConfig {
  int n = 2;
  double p = 3.0;
  json potential = {{"family", "sine"}, {"amplitude", 1.0}, {"frequency", 1.0}};
  std::vector<double> eps_schedule{0.3, 0.25, 0.2};
  double C1 = 0.5, C2 = 2.0, beta_floor = 0.05;
  std::optional<double> gamma;    // calibrated when absent
  double gamma_factor = 2.0;
  std::optional<double> lambda0;  // sqrt(1 - eps_max^2 sup|V|) when absent
  std::optional<double> eta;      // 0.05 lambda0 when absent
  double p_min = 1.05;
  GridPolicy grid;
  double projected_tol = 1e-10;
  double full_tol = 1e-10;
  int max_newton = 80;
  int rho_samples = 64;
  std::optional<double> trunc_K;
  std::string seed_policy = "recentre";  // or "reduction"
  double r_match = 8.0;
  std::vector<double> matched_eps{0.5, 0.45, 0.4, 0.35, 0.3};
  std::optional<double> a_target;
  std::vector<double> ground_p{2, 3, 4, 5, 7};
  std::vector<double> ground_lambda{1, 2};
  double spectrum_width = 20.0, spectrum_step = 1e-2;
  int spectrum_k = 6;
  bool svg = true;
  bool random_free = true;

  PotentialSpec potential_spec;  // built from `potential`
};

namespace detail {
[[noreturn]] inline void bad_field(const std::string& field, const std::string& why)
{
  throw Error(ErrorKind::config_invalid, "field '" + field + "': " + why);
}

inline double get_number(const json& j, const std::string& field)
{
  if (!j.is_number()) bad_field(field, "expected a number");
  return j.get<double>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& field)
{
  if (!j.is_array()) bad_field(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline PotentialSpec build_potential(const json& j)
{
  if (!j.is_object() || !j.contains("family")) bad_field("potential", "object with a 'family' key required");
  static const std::set<std::string> keys{"family", "amplitude", "frequency", "numerator", "denominator", "r", "v", "value"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) bad_field("potential." + it.key(), "unknown key");
  auto fam = parse_family(j.at("family").get<std::string>());
  auto num = [&](const char* k, double d) { return j.contains(k) ? get_number(j.at(k), std::string("potential.") + k) : d; };
  switch (fam) {
    case PotentialFamily::zero: return make_zero_potential();
    case PotentialFamily::sine: return make_sine_potential(num("amplitude", 1.0), num("frequency", 1.0));
    case PotentialFamily::cosine_scaled: return make_cosine_potential(num("amplitude", 1.0), num("frequency", 1.0));
    case PotentialFamily::polynomial_bounded:
      if (j.contains("value")) return make_constant_potential(get_number(j.at("value"), "potential.value"));
      return make_rational_potential(get_numbers(j.value("numerator", json::array({0.0})), "potential.numerator"),
                                     get_numbers(j.value("denominator", json::array({1.0})), "potential.denominator"));
    case PotentialFamily::tabulated:
      return make_tabulated_potential(get_numbers(j.at("r"), "potential.r"), get_numbers(j.at("v"), "potential.v"));
  }
  bad_field("potential.family", "unsupported");
}
} // namespace detail

inline double effective_eps_max(const RunConfig& c)
{
  double m = 0.0;
  for (double e : c.eps_schedule) m = std::max(m, e);
  for (double e : c.matched_eps) m = std::max(m, e);
  return m;
}

inline double effective_lambda0(const RunConfig& c)
{
  return c.lambda0 ? *c.lambda0 : ellipticity_lambda0(c.potential_spec, effective_eps_max(c));
}

inline double effective_eta(const RunConfig& c) { return c.eta ? *c.eta : 0.05 * effective_lambda0(c); }

inline void validate(RunConfig& c)
{
  using detail::bad_field;
  if (c.n < 2) bad_field("n", "must be >= 2");
  if (!(c.p > 1.0)) bad_field("p", "must exceed 1");
  if (c.eps_schedule.empty()) bad_field("eps_schedule", "must not be empty");
  for (std::size_t i = 0; i < c.eps_schedule.size(); ++i) {
    if (!(c.eps_schedule[i] > 0.0 && c.eps_schedule[i] < 1.0)) bad_field("eps_schedule", "entries must lie in (0,1)");
    if (i && !(c.eps_schedule[i] < c.eps_schedule[i - 1])) bad_field("eps_schedule", "must be strictly decreasing");
  }
  for (double e : c.matched_eps)
    if (!(e > 0.0 && e < 1.0)) bad_field("matched_eps", "entries must lie in (0,1)");
  if (!(c.C1 > 0.0) || !(c.C2 > c.C1)) bad_field("C1/C2", "need 0 < C1 < C2");
  if (!(c.beta_floor >= 0.0)) bad_field("beta_floor", "must be >= 0");
  if (!(c.grid.h > 0.0)) bad_field("grid.h", "must be positive");
  if (!(c.grid.tail > 0.0)) bad_field("grid.tail", "must be positive");
  if (c.rho_samples < 8) bad_field("rho_samples", "must be >= 8");
  if (c.seed_policy != "recentre" && c.seed_policy != "reduction") bad_field("seed_policy", "recentre or reduction");
  if (c.trunc_K && !(*c.trunc_K > 0.0)) bad_field("trunc_K", "must be positive");
  if (!c.random_free) bad_field("random_free", "must be true: no randomness is used anywhere");
  c.potential_spec = detail::build_potential(c.potential);
  double l0 = 0.0;
  try {
    l0 = effective_lambda0(c);
  } catch (const Error&) {
    bad_field("potential", "ellipticity floor 1 + eps^2 V > 0 fails at the largest eps");
  }
  if (!(l0 > 0.0 && l0 <= 1.0 + 1e-12)) bad_field("lambda0", "must lie in (0, 1]");
  for (double e : c.eps_schedule)
    if (1.0 - e * e * c.potential_spec.bound_V < l0 * l0 - 1e-12)
      bad_field("lambda0", "ellipticity floor violated at eps = " + format_number(e));
  try {
    validate_decay_window(c.p, l0, effective_eta(c), c.p_min);
  } catch (const Error& e) {
    bad_field("p/eta", e.what());
  }
}

inline RunConfig parse_config(const json& j)
{
  using detail::bad_field;
  using detail::get_number;
  using detail::get_numbers;
  if (!j.is_object()) bad_field("<root>", "expected an object");
  static const std::set<std::string> keys{
      "n", "p", "potential", "eps_schedule", "C1", "C2", "beta_floor", "gamma", "gamma_factor", "lambda0", "eta",
      "p_min", "grid", "solver", "rho_samples", "trunc_K", "seed_policy", "r_match", "matched_eps", "a_target",
      "ground", "spectrum", "svg", "random_free"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) bad_field(it.key(), "unknown key");
  RunConfig c;
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return get_number(j.at(k), k);
  };
  if (j.contains("n")) {
    if (!j.at("n").is_number_integer()) bad_field("n", "expected an integer");
    c.n = j.at("n").get<int>();
  }
  if (auto v = opt("p")) c.p = *v;
  if (j.contains("potential")) c.potential = j.at("potential");
  if (j.contains("eps_schedule")) c.eps_schedule = get_numbers(j.at("eps_schedule"), "eps_schedule");
  if (auto v = opt("C1")) c.C1 = *v;
  if (auto v = opt("C2")) c.C2 = *v;
  if (auto v = opt("beta_floor")) c.beta_floor = *v;
  c.gamma = opt("gamma");
  if (auto v = opt("gamma_factor")) c.gamma_factor = *v;
  c.lambda0 = opt("lambda0");
  c.eta = opt("eta");
  if (auto v = opt("p_min")) c.p_min = *v;
  c.grid = default_grid_policy(c.p);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    for (auto it = g.begin(); it != g.end(); ++it)
      if (it.key() != "h" && it.key() != "tail") bad_field("grid." + it.key(), "unknown key");
    if (g.contains("h")) c.grid.h = get_number(g.at("h"), "grid.h");
    if (g.contains("tail")) c.grid.tail = get_number(g.at("tail"), "grid.tail");
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    for (auto it = s.begin(); it != s.end(); ++it)
      if (it.key() != "projected_tol" && it.key() != "full_tol" && it.key() != "max_newton")
        bad_field("solver." + it.key(), "unknown key");
    if (s.contains("projected_tol")) c.projected_tol = get_number(s.at("projected_tol"), "solver.projected_tol");
    if (s.contains("full_tol")) c.full_tol = get_number(s.at("full_tol"), "solver.full_tol");
    if (s.contains("max_newton")) c.max_newton = static_cast<int>(get_number(s.at("max_newton"), "solver.max_newton"));
  }
  if (auto v = opt("rho_samples")) c.rho_samples = static_cast<int>(*v);
  c.trunc_K = opt("trunc_K");
  if (j.contains("seed_policy")) c.seed_policy = j.at("seed_policy").get<std::string>();
  if (auto v = opt("r_match")) c.r_match = *v;
  if (j.contains("matched_eps")) c.matched_eps = get_numbers(j.at("matched_eps"), "matched_eps");
  c.a_target = opt("a_target");
  if (j.contains("ground")) {
    const auto& g = j.at("ground");
    for (auto it = g.begin(); it != g.end(); ++it)
      if (it.key() != "p" && it.key() != "lambda") bad_field("ground." + it.key(), "unknown key");
    if (g.contains("p")) c.ground_p = get_numbers(g.at("p"), "ground.p");
    if (g.contains("lambda")) c.ground_lambda = get_numbers(g.at("lambda"), "ground.lambda");
  }
  if (j.contains("spectrum")) {
    const auto& s = j.at("spectrum");
    for (auto it = s.begin(); it != s.end(); ++it)
      if (it.key() != "width" && it.key() != "step" && it.key() != "k") bad_field("spectrum." + it.key(), "unknown key");
    if (s.contains("width")) c.spectrum_width = get_number(s.at("width"), "spectrum.width");
    if (s.contains("step")) c.spectrum_step = get_number(s.at("step"), "spectrum.step");
    if (s.contains("k")) c.spectrum_k = static_cast<int>(get_number(s.at("k"), "spectrum.k"));
  }
  if (j.contains("svg")) c.svg = j.at("svg").get<bool>();
  if (j.contains("random_free")) c.random_free = j.at("random_free").get<bool>();
  validate(c);
  return c;
}

/// Parses a JSON config file; syntax errors report the line number.
inline RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::config_invalid, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw Error(ErrorKind::config_invalid, path.string() + ":" + std::to_string(line) + ": " + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config_invalid, e.what());
  }
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config_invalid, e.what());
  }
}

/// Canonical effective configuration (defaults resolved).
inline json config_to_json(const RunConfig& c)
{
  json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["potential"] = c.potential;
  j["eps_schedule"] = c.eps_schedule;
  j["C1"] = c.C1;
  j["C2"] = c.C2;
  j["beta_floor"] = c.beta_floor;
  j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
  j["gamma_factor"] = c.gamma_factor;
  j["lambda0"] = c.lambda0 ? json(*c.lambda0) : json(nullptr);
  j["eta"] = c.eta ? json(*c.eta) : json(nullptr);
  j["p_min"] = c.p_min;
  j["grid"] = {{"h", c.grid.h}, {"tail", c.grid.tail}};
  j["solver"] = {{"projected_tol", c.projected_tol}, {"full_tol", c.full_tol}, {"max_newton", c.max_newton}};
  j["rho_samples"] = c.rho_samples;
  j["trunc_K"] = c.trunc_K ? json(*c.trunc_K) : json(nullptr);
  j["seed_policy"] = c.seed_policy;
  j["r_match"] = c.r_match;
  j["matched_eps"] = c.matched_eps;
  j["a_target"] = c.a_target ? json(*c.a_target) : json(nullptr);
  j["ground"] = {{"p", c.ground_p}, {"lambda", c.ground_lambda}};
  j["spectrum"] = {{"width", c.spectrum_width}, {"step", c.spectrum_step}, {"k", c.spectrum_k}};
  j["svg"] = c.svg;
  j["random_free"] = c.random_free;
  return j;
}

inline ProblemSetup make_setup(const RunConfig& c)
{
  ProblemSetup s;
  s.n = c.n;
  s.p = c.p;
  s.potential = c.potential_spec;
  s.C1 = c.C1;
  s.C2 = c.C2;
  s.beta_floor = c.beta_floor;
  s.gamma = c.gamma.value_or(1.0);
  s.lambda0 = effective_lambda0(c);
  s.eta = effective_eta(c);
  s.grid = c.grid;
  s.rho_samples = c.rho_samples;
  s.trunc_K = c.trunc_K;
  s.projected.tol = c.projected_tol;
  s.full.tol = c.full_tol;
  s.full.max_iter = c.max_newton;
  return s;
}

struct RunOverrides {
  std::optional<double> eps;
  std::optional<int> rho_samples;
};

struct RunRecord {
  std::string subcommand;
  std::string config_hash;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, double>> wall_ms;
  std::vector<std::pair<std::string, bool>> checks;
  bool all_passed() const
  {
    for (const auto& c : checks)
      if (!c.second) return false;
    return true;
  }
};

namespace detail {

class Emitter {
public:
  Emitter(std::filesystem::path dir, RunRecord& rec, bool svg) : dir_(std::move(dir)), rec_(rec), svg_(svg) {}

  void text(const std::string& name, const std::string& body)
  {
    write_text(dir_ / name, body);
    rec_.outputs.push_back(name);
  }
  void csv(const std::string& name, const CsvTable& t) { text(name, t.str()); }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  void svg(const std::string& name, const std::string& title, const std::string& xl, const std::string& yl,
           const std::vector<SvgSeries>& s)
  {
    if (svg_) text(name, svg_plot(title, xl, yl, s));
  }
  void check(const std::string& name, bool ok) { rec_.checks.emplace_back(name, ok); }

private:
  std::filesystem::path dir_;
  RunRecord& rec_;
  bool svg_;
};

inline std::string tag(double eps) { return "eps" + format_number(eps); }

inline json vec_json(const Vec& v)
{
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Vec nodes(const RadialGrid& g)
{
  Vec s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = g.node(i);
  return s;
}

inline json solution_json(const FullSolution& f)
{
  json j;
  j["eps"] = f.eps;
  j["residual_max"] = f.residual_max;
  j["peak_rho"] = f.peak_rho;
  j["peak_value"] = f.peak_value;
  j["mass_weighted"] = f.mass_weighted;
  j["pohozaev_1"] = f.pohozaev_1;
  j["pohozaev_2"] = f.pohozaev_2;
  j["truncation_active"] = f.truncation_active;
  j["trunc_K"] = f.trunc_K ? json(*f.trunc_K) : json(nullptr);
  j["min_interior_ratio"] = f.min_interior_ratio;
  j["newton_iters"] = f.newton_iters;
  j["cold_seed"] = f.cold_seed;
  return j;
}

inline json record_json(const NormalizedRecord& r)
{
  return json{{"eps", r.eps},           {"a", r.a},
              {"mu", r.mu},             {"mass_check", r.mass_check},
              {"rho", r.rho},           {"rho_orig", r.rho_orig},
              {"abs_Mp", r.abs_Mp},     {"abs_Vp", r.abs_Vp},
              {"eq1_residual", r.eq1_residual}, {"dictionary_defect", r.dictionary_defect},
              {"in_configuration_set", r.in_configuration_set}};
}

inline std::vector<double> eps_list(const RunConfig& c, const RunOverrides& o)
{
  if (o.eps) return {*o.eps};
  return c.eps_schedule;
}

inline std::vector<double> continuation_schedule(const RunConfig& c, const RunOverrides& o)
{
  if (o.eps) return {*o.eps};
  return c.eps_schedule;
}

// --- stages -----------------------------------------------------------------

inline void run_ground(const RunConfig& c, Emitter& out)
{
  CsvTable t;
  t.header = {"p", "lambda", "mass_full", "kinetic_half", "lp1_full", "energy_const", "mass_const", "B_const",
              "pohozaev_spread"};
  json consts = json::array();
  bool poh_ok = true;
  for (double p : c.ground_p)
    for (double l : c.ground_lambda) {
      auto g = make_profile(p, l);
      auto k = ground_state_constants(g, c.n);
      double spread = half_line_pohozaev(g, k).max_rel_spread();
      poh_ok = poh_ok && spread <= 1e-8;
      t.rows.push_back({p, l, k.mass_full, k.kinetic_half, k.lp1_full, k.energy_const, k.mass_const, k.B_const, spread});
      consts.push_back({{"p", p}, {"lambda", l}, {"mass_full", k.mass_full}, {"kinetic_half", k.kinetic_half},
                        {"lp1_full", k.lp1_full}, {"energy_const", k.energy_const}, {"mass_const", k.mass_const},
                        {"B_const", k.B_const}, {"omega", k.omega}, {"pohozaev_spread", spread}});
    }
  out.csv("ground_constants.csv", t);
  auto g = make_profile(c.p, 1.0);
  auto shot = shoot_ground_state(c.p, 1.0, 1e-3);
  double err = 0.0;
  for (std::size_t i = 0; i < shot.u.size(); ++i)
    if (shot.u[i] >= 1e-6 * shot.amplitude) err = std::max(err, std::abs(shot.u[i] - eval_ground_state(g, shot.s[i])));
  Vec s, q;
  for (int i = 0; i <= 2000; ++i) { s.push_back(0.01 * i); q.push_back(eval_ground_state(g, 0.01 * i)); }
  out.csv("plot_ground_profile.csv", grid_function_csv(s, q, "Q"));
  out.svg("ground_profile.svg", "ground state Q (lambda = 1)", "s", "Q", {{"Q", s, q}});
  json j;
  j["n"] = c.n;
  j["constants"] = consts;
  j["shooting"] = {{"p", c.p}, {"lambda", 1.0}, {"step", 1e-3}, {"amplitude", shot.amplitude},
                   {"closed_form_amplitude", g.amplitude}, {"max_error", err}};
  j["decay_amplitude"] = decay_amplitude(g);
  out.json_file("ground.json", j);
  out.check("pohozaev_half_line_1e-8", poh_ok);
  out.check("shooting_matches_closed_form_1e-5", err <= 1e-5);
}

inline void run_spectrum(const RunConfig& c, Emitter& out)
{
  auto g = make_profile(c.p, 1.0);
  auto sp = linearized_spectrum(g, c.spectrum_width, c.spectrum_step, c.spectrum_k);
  CsvTable t;
  t.header = {"index", "eigenvalue"};
  for (std::size_t i = 0; i < sp.values.size(); ++i) t.rows.push_back({double(i), sp.values[i]});
  out.csv("spectrum.csv", t);
  Vec qd(sp.s.size());
  double nq = 0, dotp = 0;
  for (std::size_t i = 0; i < qd.size(); ++i) { qd[i] = eval_ground_state_d1(g, sp.s[i]); nq += qd[i] * qd[i]; }
  for (std::size_t i = 0; i < qd.size(); ++i) dotp += qd[i] * sp.vectors[1][i];
  double cosine = std::abs(dotp) / std::sqrt(nq);
  out.csv("plot_kernel_mode.csv", grid_function_csv(sp.s, sp.vectors[1], "mode", "s"));
  out.svg("kernel_mode.svg", "second eigenfunction", "s", "mode", {{"mode", sp.s, sp.vectors[1]}});
  auto nd = nondegeneracy_report(g, c.spectrum_width, c.spectrum_step);
  json j;
  j["p"] = c.p;
  j["eigenvalues"] = vec_json(sp.values);
  j["kernel_cosine_with_Qprime"] = cosine;
  j["quad_form_QQ"] = nd.quad_form_QQ;
  j["quad_form_QQ_predicted"] = nd.quad_form_predicted;
  j["complement_min_rayleigh"] = nd.complement_min;
  out.json_file("nondegeneracy.json", j);
  out.check("lowest_negative", sp.values[0] < 0.0);
  out.check("kernel_cosine_0.9999", cosine >= 0.9999);
  out.check("complement_rayleigh_positive", nd.complement_min > 0.0);
}

inline void run_mpot(const RunConfig& c, const RunOverrides& o, Emitter& out)
{
  json arr = json::array();
  for (double eps : eps_list(c, o)) {
    double lo = c.C1 / (eps * eps), hi = c.C2 / (eps * eps);
    CsvTable t;
    t.header = {"r", "M", "Mp"};
    Vec rs, mps;
    for (int i = 0; i <= 2000; ++i) {
      double r = lo + (hi - lo) * i / 2000.0;
      auto pt = eval_M(c.potential_spec, c.n, c.p, eps, r);
      t.rows.push_back({r, pt.M, pt.Mp});
      rs.push_back(r);
      mps.push_back(pt.Mp);
    }
    out.csv("mpot_" + tag(eps) + ".csv", t);
    out.csv("plot_Mp_" + tag(eps) + ".csv", grid_function_csv(rs, mps, "Mp", "r"));
    out.svg("Mp_" + tag(eps) + ".svg", "M' (" + tag(eps) + ")", "r", "M'", {{"Mp", rs, mps}});
    json e{{"eps", eps}, {"bracket", {lo, hi}}};
    try {
      auto cr = find_critical_radius(c.potential_spec, c.n, c.p, eps, lo, hi, c.beta_floor);
      e["t"] = cr.t;
      e["M"] = cr.point.M;
      e["Mp"] = cr.point.Mp;
      e["Mpp"] = cr.point.Mpp;
      e["all_roots"] = vec_json(cr.all_roots);
      e["identity_defect"] = critical_identity_defect(c.potential_spec, c.n, c.p, eps, cr.t);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::no_critical_point && err.kind() != ErrorKind::degenerate_critical_point) throw;
      e["error"] = to_string(err.kind());
    }
    arr.push_back(e);
  }
  out.json_file("critical.json", json{{"critical_radii", arr}});
}

inline void run_scan(const RunConfig& c, const RunOverrides& o, Emitter& out)
{
  auto setup = make_setup(c);
  json arr = json::array();
  std::optional<double> gamma = c.gamma;
  for (double eps : eps_list(c, o)) {
    auto op = setup.configuration_operator(eps);
    auto tmpl = setup.ansatz(eps);
    auto curve = reduced_energy_scan(op, tmpl, setup.rho_samples, setup.projected);
    CsvTable t;
    t.header = {"rho", "psi", "alpha", "discrepancy", "converged"};
    Vec rs, al;
    for (const auto& r : curve.rows) {
      t.rows.push_back({r.rho, r.psi, r.alpha, r.discrepancy, r.converged ? 1.0 : 0.0});
      rs.push_back(r.rho);
      al.push_back(r.alpha);
    }
    out.csv("scan_" + tag(eps) + ".csv", t);
    out.csv("plot_alpha_" + tag(eps) + ".csv", grid_function_csv(rs, al, "alpha", "rho"));
    out.svg("alpha_" + tag(eps) + ".svg", "alpha(rho) (" + tag(eps) + ")", "rho", "alpha", {{"alpha", rs, al}});
    json e{{"eps", eps}};
    std::optional<double> target;
    try {
      auto cr = find_critical_radius(c.potential_spec, c.n, c.p, eps, c.C1 / (eps * eps), c.C2 / (eps * eps),
                                     c.beta_floor);
      target = cr.t / eps;
      e["t_eps"] = cr.t;
    } catch (const Error& err) {
      e["t_eps"] = nullptr;
    }
    auto changes = alpha_sign_changes(curve);
    json br = json::array();
    for (const auto& iv : changes) br.push_back({iv.lo, iv.hi});
    e["sign_change_brackets"] = br;
    if (!changes.empty()) {
      auto rs_ = find_rho_star(op, tmpl, select_bracket(curve, target), setup.projected);
      auto a = tmpl;
      a.rho = rs_.rho;
      if (!gamma) gamma = calibrate_gamma(op, a, rs_.solution, c.gamma_factor);
      a.gamma = *gamma;
      auto mem = membership_E(a, op, rs_.solution.z, rs_.solution.omega);
      ProjectedOptions fpo = setup.projected;
      fpo.mode = ProjectedMode::fixed_point;
      auto fp = solve_projected(op, a, fpo);
      Vec d(fp.omega.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = fp.omega[i] - rs_.solution.omega[i];
      auto spec = projected_hessian_gap(op, a);
      e["rho_star"] = rs_.rho;
      e["alpha"] = rs_.solution.alpha;
      e["psi"] = rs_.solution.psi;
      e["dpsi_rel"] = rs_.dpsi_rel;
      e["domega_ratio"] = rs_.domega_ratio;
      e["orthogonality"] = rs_.solution.orthogonality;
      e["newton_residual"] = rs_.solution.residual_norm;
      e["mode_difference"] = op.norm(d);
      e["contraction_ratios"] = vec_json(contraction_ratios(fp));
      e["gamma"] = *gamma;
      e["member_E"] = mem.member;
      e["omega_ratio"] = op.norm(rs_.solution.omega) / (std::pow(eps, 3) * op.norm(rs_.solution.z));
      e["complement_min"] = spec.complement_min;
      e["projected_min_abs"] = spec.projected_min_abs;
      e["quad_form_zz"] = spec.quad_form_zz;
      e["quad_form_zz_pred"] = spec.quad_form_zz_pred;
      out.check("rho_star_found_" + tag(eps), true);
      out.check("modes_agree_1e-8_" + tag(eps), op.norm(d) <= 1e-8);
      out.check("member_E_" + tag(eps), mem.member);
    } else {
      out.check("rho_star_found_" + tag(eps), false);
    }
    arr.push_back(e);
  }
  // matched eps*rho discrepancy sweep
  CsvTable lt;
  lt.header = {"eps", "rho", "discrepancy"};
  const double CE = energy_constant(c.p);
  for (double eps : c.matched_eps) {
    auto a = setup.ansatz(eps, c.r_match / eps);
    RadialOperator op(ansatz_grid(c.n, a, setup.grid), eps, setup.potential, Nonlinearity{c.p, {}});
    auto s = solve_projected(op, a, setup.projected);
    lt.rows.push_back({eps, a.rho, matched_discrepancy(op, a.rho, s.psi, CE)});
  }
  out.csv("matched_discrepancy.csv", lt);
  bool mono = true;
  for (std::size_t i = 1; i < lt.rows.size(); ++i) mono = mono && lt.rows[i][2] < lt.rows[i - 1][2];
  out.check("discrepancy_decreasing", mono);
  out.json_file("scan.json", json{{"scans", arr}});
}

inline std::vector<EpsStage> run_family(const RunConfig& c, const RunOverrides& o, Emitter& out, json& j)
{
  auto setup = make_setup(c);
  ContinuationResult res;
  auto schedule = continuation_schedule(c, o);
  if (c.seed_policy == "recentre") {
    res = continuation_in_eps(setup, schedule);
  } else {
    res.complete = true;
    for (double e : schedule) {
      try {
        res.stages.push_back(solve_stage(setup, e));
      } catch (const Error& err) {
        res.complete = false;
        res.failure = err.what();
        break;
      }
    }
  }
  CsvTable t;
  t.header = {"eps", "rho_star", "peak_rho", "eps_rho", "peak_value", "mass_weighted", "pohozaev_1", "pohozaev_2",
              "residual_max"};
  json members = json::array();
  for (const auto& st : res.stages) {
    const auto& f = st.solution;
    t.rows.push_back({st.eps, st.rho_star.rho, f.peak_rho, st.eps * f.peak_rho, f.peak_value, f.mass_weighted,
                      f.pohozaev_1, f.pohozaev_2, f.residual_max});
    auto g = configuration_grid(c.n, setup.ansatz(st.eps), setup.grid);
    out.csv("profile_" + tag(st.eps) + ".csv", grid_function_csv(nodes(g), f.profile, "u"));
    json m = solution_json(f);
    m["rho_star"] = st.rho_star.rho;
    m["t_eps"] = st.critical ? json(st.critical->t) : json(nullptr);
    m["seed_recentred"] = st.seed_recentred;
    members.push_back(m);
    out.check("pohozaev_1e-6_" + tag(st.eps), std::abs(f.pohozaev_1) <= 1e-6 && std::abs(f.pohozaev_2) <= 1e-6);
  }
  out.csv("family.csv", t);
  if (!res.stages.empty()) {
    std::vector<SvgSeries> series;
    for (const auto& st : res.stages) {
      auto g = configuration_grid(c.n, setup.ansatz(st.eps), setup.grid);
      series.push_back({tag(st.eps), nodes(g), st.solution.profile});
    }
    out.svg("profiles.svg", "layer profiles", "s", "u", series);
  }
  j["members"] = members;
  j["complete"] = res.complete;
  j["failure"] = res.failure;
  out.check("continuation_complete", res.complete);
  return res.stages;
}

inline void run_solve(const RunConfig& c, const RunOverrides& o, Emitter& out)
{
  auto setup = make_setup(c);
  double eps = o.eps ? *o.eps : c.eps_schedule.front();
  auto st = solve_stage(setup, eps);
  auto op = setup.configuration_operator(eps);
  const auto& f = st.solution;
  out.csv("profile_" + tag(eps) + ".csv", grid_function_csv(nodes(op.grid()), f.profile, "u"));
  out.svg("profile_" + tag(eps) + ".svg", "full solution (" + tag(eps) + ")", "s", "u",
          {{"u", nodes(op.grid()), f.profile}});
  auto audit = pohozaev_audit(op, f.profile);
  auto terms = asymptotic_terms_check(op, f.profile, f.peak_rho);
  auto dec = peak_decay(op, f.profile, f.peak_rho);
  json j = solution_json(f);
  j["rho_star"] = st.rho_star.rho;
  j["t_eps"] = st.critical ? json(st.critical->t) : json(nullptr);
  j["pohozaev"] = {{"kinetic", audit.kinetic}, {"mass_v", audit.mass_v}, {"lp1", audit.lp1},
                   {"vmoment", audit.vmoment}, {"defect_1", audit.defect_1}, {"defect_2", audit.defect_2}};
  j["terms"] = {{"beta", terms.beta},
                {"kinetic", terms.kinetic}, {"kinetic_pred", terms.kinetic_pred},
                {"mass", terms.mass}, {"mass_pred", terms.mass_pred},
                {"lp1", terms.lp1}, {"lp1_pred", terms.lp1_pred},
                {"vmoment", terms.vmoment}, {"vmoment_pred", terms.vmoment_pred}};
  j["decay"] = {{"slope", dec.slope}, {"predicted", dec.predicted}, {"local_predicted", dec.local_predicted},
                {"rel_error", dec.rel_error}, {"local_rel_error", dec.local_rel_error}};
  Vec u0(f.profile.size());
  const auto& red = st.rho_star.solution;
  for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = f.profile[i] - red.z[i] - red.omega[i];
  j["distance_to_reduction"] = op.norm(u0) / op.norm(red.z);
  out.json_file("solution_" + tag(eps) + ".json", j);
  out.check("pohozaev_1e-6", std::abs(f.pohozaev_1) <= 1e-6 && std::abs(f.pohozaev_2) <= 1e-6);
  out.check("positive", f.min_interior_ratio >= -1e-12);
}

inline std::vector<NormalizedRecord> normalize_family(const RunConfig& c, const std::vector<EpsStage>& stages)
{
  auto setup = make_setup(c);
  std::vector<NormalizedRecord> recs;
  for (const auto& st : stages) {
    auto op = setup.configuration_operator(st.eps);
    recs.push_back(to_original(op, st.solution, mass_to_a(st.solution, c.n, c.p), c.C1, c.C2));
  }
  return recs;
}

inline void run_normalize(const RunConfig& c, const RunOverrides& o, Emitter& out)
{
  json fam;
  auto stages = run_family(c, o, out, fam);
  auto recs = normalize_family(c, stages);
  CsvTable t;
  t.header = {"eps", "a", "mu", "mass_check", "rho", "eps_rho", "abs_Mp", "abs_Vp"};
  json jr = json::array();
  bool mass_ok = true;
  for (const auto& r : recs) {
    t.rows.push_back({r.eps, r.a, r.mu, r.mass_check, r.rho, r.rho_orig, r.abs_Mp, r.abs_Vp});
    jr.push_back(record_json(r));
    mass_ok = mass_ok && std::abs(r.mass_check - 1.0) <= 1e-8;
    out.csv("profile_a_" + tag(r.eps) + ".csv", grid_function_csv(r.r, r.u_a, "u_a", "r"));
  }
  out.csv("normalized.csv", t);
  out.check("unit_mass_1e-8", mass_ok);
  json j;
  j["records"] = jr;
  j["family"] = fam;
  if (recs.size() >= 3) {
    auto sl = scaling_law_check(recs, c.n, c.p);
    j["scaling_law"] = {{"eps", vec_json(sl.eps)}, {"R", vec_json(sl.R)}, {"decreasing_dev", sl.decreasing_dev},
                        {"in_band_at_smallest", sl.in_band_at_smallest}};
    out.check("R_in_band", sl.in_band_at_smallest);
    out.check("R_deviation_decreasing", sl.decreasing_dev);
  }
  auto tr = necessary_conditions_report(recs);
  json items = json::array();
  for (const auto& it : tr.items) {
    items.push_back({{"name", it.name}, {"holds", it.holds}, {"values", vec_json(it.values)}});
    out.check("trend: " + it.name, it.holds);
  }
  j["trends"] = {{"items", items}, {"vacuous", tr.vacuous}, {"warning", tr.warning}};
  if (c.a_target) {
    auto setup = make_setup(c);
    std::vector<FamilyPoint> pts;
    for (const auto& r : recs) pts.push_back({r.eps, r.a, r.rho_orig});
    auto fresh = [&](double eps, double erho_guess) {
      auto st = solve_stage(setup, eps, nullptr, erho_guess);
      return mass_to_a(st.solution, c.n, c.p);
    };
    auto fs = solve_F_for_eps(*c.a_target, pts, fresh);
    j["F_solve"] = {{"a_target", *c.a_target}, {"eps", fs.eps}, {"a", fs.a}, {"probes", fs.probes},
                    {"converged", fs.converged}};
    out.check("F_solve_converged", fs.converged);
  }
  out.json_file("normalized.json", j);
}

inline void run_report(const std::filesystem::path& dir, Emitter& out)
{
  json runs = json::array();
  CsvTable t;
  t.header = {"index", "outputs", "checks", "passed"};
  std::ifstream f(dir / "ledger.jsonl");
  std::string line;
  int idx = 0;
  while (f && std::getline(f, line)) {
    if (line.empty()) continue;
    json e = json::parse(line);
    int nc = 0, np = 0;
    for (auto it = e["checks"].begin(); it != e["checks"].end(); ++it) {
      ++nc;
      if (it.value().get<bool>()) ++np;
    }
    runs.push_back({{"subcommand", e["subcommand"]}, {"config_hash", e["config_hash"]}, {"checks", nc}, {"passed", np}});
    t.rows.push_back({double(idx++), double(e["outputs"].size()), double(nc), double(np)});
  }
  out.json_file("report.json", json{{"runs", runs}});
  out.csv("report.csv", t);
}

} // namespace detail

inline const std::vector<std::string>& subcommands()
{
  static const std::vector<std::string> s{"ground", "spectrum", "mpot", "scan", "solve", "continue", "normalize", "report"};
  return s;
}

/// Runs one subcommand and appends a line to <out>/ledger.jsonl (except `report`, which only reads it).
inline RunRecord run(const std::string& subcommand, const RunConfig& cfg_in, const std::filesystem::path& out_dir,
                     const RunOverrides& ov = {})
{
  RunConfig cfg = cfg_in;
  if (ov.rho_samples) {
    cfg.rho_samples = *ov.rho_samples;
    validate(cfg);
  }
  if (ov.eps && !(*ov.eps > 0.0 && *ov.eps < 1.0)) throw Error(ErrorKind::config_invalid, "--eps must lie in (0,1)");
  RunRecord rec;
  rec.subcommand = subcommand;
  json eff = config_to_json(cfg);
  if (ov.eps) eff["override_eps"] = *ov.eps;
  const std::string canon = eff.dump();
  rec.config_hash = hex64(fnv1a64(canon));
  std::filesystem::create_directories(out_dir);
  detail::Emitter out(out_dir, rec, cfg.svg);
  auto t0 = std::chrono::steady_clock::now();
  if (subcommand == "report") {
    detail::run_report(out_dir, out);
    return rec;
  }
  out.json_file("run_config.json", config_to_json(cfg));
  if (subcommand == "ground") detail::run_ground(cfg, out);
  else if (subcommand == "spectrum") detail::run_spectrum(cfg, out);
  else if (subcommand == "mpot") detail::run_mpot(cfg, ov, out);
  else if (subcommand == "scan") detail::run_scan(cfg, ov, out);
  else if (subcommand == "solve") detail::run_solve(cfg, ov, out);
  else if (subcommand == "continue") {
    json j;
    detail::run_family(cfg, ov, out, j);
    out.json_file("continue.json", j);
  } else if (subcommand == "normalize") detail::run_normalize(cfg, ov, out);
  else throw Error(ErrorKind::config_invalid, "unknown subcommand '" + subcommand + "'");
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rec.wall_ms.emplace_back(subcommand, ms);

  json led;
  led["subcommand"] = rec.subcommand;
  led["config_hash"] = rec.config_hash;
  led["outputs"] = rec.outputs;
  json wt = json::object();
  for (const auto& [k, v] : rec.wall_ms) wt[k] = v;
  led["wall_ms"] = wt;
  json ch = json::object();
  for (const auto& [k, v] : rec.checks) ch[k] = v;
  led["checks"] = ch;
  std::ofstream lf(out_dir / "ledger.jsonl", std::ios::app | std::ios::binary);
  lf << led.dump() << "\n";
  return rec;
}

} // namespace spherelab

#endif
