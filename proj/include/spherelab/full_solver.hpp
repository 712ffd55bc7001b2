#ifndef SPHERELAB_FULL_SOLVER_HPP
#define SPHERELAB_FULL_SOLVER_HPP

// Damped Newton for the full rescaled radial equation, identity audits in
// unrescaled variables, and continuation of the layer family in eps.

#include <spherelab/ansatz.hpp>
#include <spherelab/error.hpp>
#include <spherelab/ground_state.hpp>
#include <spherelab/linalg.hpp>
#include <spherelab/potential.hpp>
#include <spherelab/radial.hpp>
#include <spherelab/reduction.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace spherelab {

struct FullOptions {
  std::optional<double> trunc_K;
  double tol = 1e-10;  // residual_max <= tol * (1 + max u^p)
  int max_iter = 80;
  bool cold_seed = false;  // seed not produced by the reduction (flagged only)
};

struct FullSolution {
  double eps = 0;
  Vec profile;
  double residual_max = 0;
  double peak_rho = 0;
  double peak_value = 0;
  double mass_weighted = 0;  // omega_{n-1} int s^{n-1} u^2 ds
  double pohozaev_1 = 0;
  double pohozaev_2 = 0;
  bool truncation_active = false;
  std::optional<double> trunc_K;
  double min_interior_ratio = 0;  // min u / max u over interior nodes
  int newton_iters = 0;
  bool cold_seed = false;
  Vec peak_track;  // peak position after each Newton iterate
};

struct PohozaevReport {
  double kinetic = 0;     // eps^2 int r^{n-1} |u_r|^2
  double mass_v = 0;      // int r^{n-1} (1 + eps^2 V) u^2
  double lp1 = 0;         // int r^{n-1} u^{p+1}
  double vmoment = 0;     // (eps^2/2) int r^n V'(r) u^2
  double defect_1 = 0;    // kinetic + mass_v - lp1, relative to the largest term
  double defect_2 = 0;    // kinetic - vmoment - n(1/2 - 1/(p+1)) lp1, relative
};

namespace detail {
// centred first differences, second-order one-sided at the ends
inline Vec derivative(const Vec& u, double h)
{
  const std::size_t m = u.size();
  Vec d(m, 0.0);
  if (m < 3) return d;
  for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  d[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h);
  return d;
}

inline std::size_t argmax(const Vec& u)
{
  return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
}
} // namespace detail

/// Both identities by Simpson quadrature in the unrescaled radius r = eps s.
inline PohozaevReport pohozaev_audit(const RadialOperator& op, const Vec& u)
{
  const auto& g = op.grid();
  const double eps = op.eps(), p = op.p();
  const int n = g.n;
  RadialGrid gr{n, eps * g.s_min, eps * g.h, g.N};
  Vec ur = detail::derivative(u, gr.h);
  Vec f1(u.size()), f2(u.size()), f3(u.size()), f4(u.size());
  const auto& V = op.potential();
  for (std::size_t i = 0; i < u.size(); ++i) {
    double r = gr.node(i);
    f1[i] = ur[i] * ur[i];
    f2[i] = (1.0 + eps * eps * V.V(r)) * u[i] * u[i];
    f3[i] = std::pow(std::abs(u[i]), p + 1.0);
    f4[i] = r * V.Vp(r) * u[i] * u[i];
  }
  PohozaevReport rep;
  rep.kinetic = eps * eps * quadrature(gr, f1);
  rep.mass_v = quadrature(gr, f2);
  rep.lp1 = quadrature(gr, f3);
  rep.vmoment = 0.5 * eps * eps * quadrature(gr, f4);
  double s1 = std::max({std::abs(rep.kinetic), std::abs(rep.mass_v), std::abs(rep.lp1)});
  double t5 = n * (0.5 - 1.0 / (p + 1.0)) * rep.lp1;
  double s2 = std::max({std::abs(rep.kinetic), std::abs(rep.vmoment), std::abs(t5)});
  rep.defect_1 = s1 > 0 ? (rep.kinetic + rep.mass_v - rep.lp1) / s1 : 0.0;
  rep.defect_2 = s2 > 0 ? (rep.kinetic - rep.vmoment - t5) / s2 : 0.0;
  return rep;
}

namespace detail {
inline double residual_sup(const RadialOperator& op, const Vec& u)
{
  Vec r = op.residual_full(u);
  double m = 0.0;
  for (std::size_t i = 0; i < op.unknowns(); ++i) m = std::max(m, std::abs(r[i]));
  return m;
}

inline double residual_scale(const Vec& u, double p)
{
  return 1.0 + std::pow(max_abs(u), p);
}
} // namespace detail

/// Whether the exponent is above the Sobolev-critical value (n+2)/(n-2).
inline bool is_supercritical(int n, double p) { return n >= 3 && p > (n + 2.0) / (n - 2.0); }

inline FullSolution solve_full(const RadialOperator& base, const Vec& seed, const FullOptions& opt = {})
{
  const auto& g = base.grid();
  if (seed.size() != g.size()) throw Error(ErrorKind::length_mismatch, "seed");
  const double seed_max = *std::max_element(seed.begin(), seed.end());
  if (!(seed_max > 0.0)) throw Error(ErrorKind::config_invalid, "seed must be positive somewhere");
  std::optional<double> K = opt.trunc_K;
  if (!K && is_supercritical(g.n, base.p())) K = 2.0 * seed_max;
  RadialOperator op(g, base.eps(), base.potential(), Nonlinearity{base.p(), K}, base.origin_dirichlet());

  FullSolution sol;
  sol.eps = base.eps();
  sol.trunc_K = K;
  sol.cold_seed = opt.cold_seed;
  Vec u = seed;
  u[g.N] = 0.0;
  const std::size_t m = op.unknowns();
  double res = detail::residual_sup(op, u);
  int it = 0;
  bool ok = false;
  for (; it <= opt.max_iter; ++it) {
    if (!std::isfinite(res)) break;
    if (res <= opt.tol * detail::residual_scale(u, op.p())) { ok = true; break; }
    if (it == opt.max_iter) break;
    Vec rhs = op.gradient(u);
    for (auto& x : rhs) x = -x;
    rhs.resize(m);
    solve_tridiag(op.hessian(u), rhs);
    double t = 1.0, res_new = res;
    Vec trial;
    bool accepted = false;
    for (int bt = 0; bt < 12; ++bt) {
      trial = u;
      for (std::size_t i = 0; i < m; ++i) trial[i] += t * rhs[i];
      res_new = detail::residual_sup(op, trial);
      if (std::isfinite(res_new) && res_new <= (1.0 - 1e-4 * t) * res) { accepted = true; break; }
      t *= 0.5;
    }
    if (!accepted) break;
    u = std::move(trial);
    res = res_new;
    sol.peak_track.push_back(g.node(detail::argmax(u)));
  }
  sol.newton_iters = it;
  sol.profile = u;
  sol.residual_max = res;
  if (!ok)
    throw Error(ErrorKind::newton_divergence,
                "full Newton stalled at residual " + std::to_string(res) + " after " + std::to_string(it) +
                    " iterations");
  const double umax = max_abs(u);
  if (umax < 1e-8 * seed_max) throw Error(ErrorKind::converged_to_zero, "Newton reached the trivial branch");
  const std::size_t ip = detail::argmax(u);
  sol.peak_rho = g.node(ip);
  sol.peak_value = u[ip];
  if (ip > 0 && ip + 1 < u.size()) {
    // parabolic refinement of the maximum
    double den = u[ip - 1] - 2.0 * u[ip] + u[ip + 1];
    if (den < 0.0) sol.peak_rho += 0.5 * g.h * (u[ip - 1] - u[ip + 1]) / den;
  }
  double mn = u[0];
  for (std::size_t i = 0; i < m; ++i) mn = std::min(mn, u[i]);
  sol.min_interior_ratio = mn / umax;
  if (K) {
    sol.truncation_active = umax >= *K;
    if (sol.truncation_active)
      throw Error(ErrorKind::truncation_saturated, "sup profile " + std::to_string(umax) + " >= K");
  }
  Vec u2(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) u2[i] = u[i] * u[i];
  sol.mass_weighted = sphere_area(g.n) * quadrature(g, u2);
  auto audit = pohozaev_audit(op, u);
  sol.pohozaev_1 = audit.defect_1;
  sol.pohozaev_2 = audit.defect_2;
  return sol;
}

struct TermReport {
  double rho = 0, beta = 0;
  double kinetic = 0, kinetic_pred = 0;  // eps^2 int r^{n-1} |u'|^2
  double mass = 0, mass_pred = 0;        // int r^{n-1} u^2
  double lp1 = 0, lp1_pred = 0;          // int r^{n-1} u^{p+1}
  double vmoment = 0, vmoment_pred = 0;  // eps^2 int r^n V'(r) u^2
  double ratio(double a, double b) const { return b != 0.0 ? a / b : 0.0; }
};

/// Measured integrals against their leading-order predictions for a layer at
/// rescaled radius rho.
inline TermReport asymptotic_terms_check(const RadialOperator& op, const Vec& u, double rho)
{
  const int n = op.grid().n;
  const double eps = op.eps(), p = op.p();
  const auto& V = op.potential();
  auto audit = pohozaev_audit(op, u);
  RadialGrid gr{n, 0.0, eps * op.grid().h, op.grid().N};
  Vec u2(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) u2[i] = u[i] * u[i];
  TermReport t;
  t.rho = rho;
  t.beta = std::sqrt(1.0 + eps * eps * V.V(eps * rho));
  const double A = ground_state_constants(make_profile(p, 1.0), n).kinetic_half;
  const double base = std::pow(eps, n) * std::pow(rho, n - 1);
  const double bk = std::pow(t.beta, (p + 3.0) / (p - 1.0));
  const double bm = std::pow(t.beta, 4.0 / (p - 1.0) - 1.0);
  t.kinetic = audit.kinetic;
  t.kinetic_pred = 2.0 * A * bk * base;
  t.mass = quadrature(gr, u2);
  t.mass_pred = 2.0 * (p + 3.0) / (p - 1.0) * A * base * bm;
  t.lp1 = audit.lp1;
  t.lp1_pred = 4.0 * (p + 1.0) / (p - 1.0) * A * bk * base;
  t.vmoment = 2.0 * audit.vmoment;
  t.vmoment_pred = 2.0 * (p + 3.0) / (p - 1.0) * A * bm * std::pow(eps, 3.0 + n) * std::pow(rho, n) *
                   V.Vp(eps * rho);
  return t;
}

struct DecayReport {
  double slope = 0;           // fitted d log u / dr on the window (unrescaled r)
  double predicted = 0;       // -beta / eps
  double local_predicted = 0; // WKB rate -(sqrt(c) + (n-1)/(2s) + c'/(4c)) / eps, window mean
  double rel_error = 0, local_rel_error = 0;
};

/// Fits log u_eps on [eps rho + 5 eps/beta, eps rho + 20 eps/beta].
inline DecayReport peak_decay(const RadialOperator& op, const Vec& u, double rho)
{
  const auto& g = op.grid();
  const double eps = op.eps();
  const double beta = std::sqrt(1.0 + eps * eps * op.potential().V(eps * rho));
  const double a = rho + 5.0 / beta, b = rho + 20.0 / beta;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, sl = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < g.N; ++i) {
    double s = g.node(i);
    if (s < a || s > b || !(u[i] > 0.0)) continue;
    double r = eps * s, y = std::log(u[i]);
    sx += r; sy += y; sxx += r * r; sxy += r * y;
    double c = 1.0 + eps * eps * op.potential().V(r);
    double dc = eps * eps * eps * op.potential().Vp(r);
    sl += std::sqrt(c) + 0.5 * (g.n - 1) / s + 0.25 * dc / c;
    ++cnt;
  }
  DecayReport d;
  if (cnt < 3) return d;
  d.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  d.predicted = -beta / eps;
  d.local_predicted = -(sl / cnt) / eps;
  d.rel_error = std::abs(d.slope / d.predicted - 1.0);
  d.local_rel_error = std::abs(d.slope / d.local_predicted - 1.0);
  return d;
}

/// Everything needed to go from eps to an accepted full solution.
struct ProblemSetup {
  int n = 2;
  double p = 3.0;
  PotentialSpec potential = make_sine_potential();
  double C1 = 0.5, C2 = 2.0, beta_floor = 0.05;
  double gamma = 1.0;
  double lambda0 = 1.0;
  double eta = 0.05;
  GridPolicy grid;
  int rho_samples = 64;
  std::optional<double> trunc_K;
  ProjectedOptions projected;
  FullOptions full;

  AnsatzParams ansatz(double eps, double rho = 0.0) const
  {
    AnsatzParams a;
    a.eps = eps;
    a.rho = rho;
    a.C1 = C1;
    a.C2 = C2;
    a.gamma = gamma;
    a.lambda0 = lambda0;
    a.eta = eta;
    return a;
  }

  RadialOperator configuration_operator(double eps) const
  {
    return RadialOperator(configuration_grid(n, ansatz(eps), grid), eps, potential, Nonlinearity{p, {}});
  }
};

struct EpsStage {
  double eps = 0;
  std::optional<CriticalRadius> critical;  // t_eps in [C1 eps^-2, C2 eps^-2], when it exists
  ScanCurve scan;
  RhoStar rho_star;
  FullSolution solution;
  bool seed_recentred = false;
};

namespace detail {
// u(s - shift) by linear interpolation on the same node set
inline Vec shift_profile(const Vec& u, double h, double shift, std::size_t out_size)
{
  Vec out(out_size, 0.0);
  for (std::size_t i = 0; i + 1 < out_size; ++i) {
    double x = (h * static_cast<double>(i) - shift) / h;
    if (x < 0.0) continue;
    auto j = static_cast<std::size_t>(std::floor(x));
    if (j + 1 >= u.size()) continue;
    double t = x - static_cast<double>(j);
    out[i] = (1.0 - t) * u[j] + t * u[j + 1];
  }
  return out;
}
} // namespace detail

/// Reduction (scan, rho*) followed by the full solve at one eps. With
/// `previous`, the seed is the previous profile translated so its peak sits
/// at the new rho*; otherwise z + omega at rho*.
/// `eps_rho_target` overrides the critical-radius target used to pick the alpha bracket.
inline EpsStage solve_stage(const ProblemSetup& setup, double eps, const FullSolution* previous = nullptr,
                            std::optional<double> eps_rho_target = std::nullopt)
{
  EpsStage st;
  st.eps = eps;
  auto op = setup.configuration_operator(eps);
  std::optional<double> target;
  try {
    st.critical = find_critical_radius(setup.potential, setup.n, setup.p, eps, setup.C1 / (eps * eps),
                                       setup.C2 / (eps * eps), setup.beta_floor);
    target = st.critical->t / eps;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::no_critical_point && e.kind() != ErrorKind::degenerate_critical_point) throw;
  }
  if (eps_rho_target) target = *eps_rho_target / eps;
  auto tmpl = setup.ansatz(eps);
  st.scan = reduced_energy_scan(op, tmpl, setup.rho_samples, setup.projected);
  st.rho_star = find_rho_star(op, tmpl, select_bracket(st.scan, target), setup.projected);
  FullOptions fo = setup.full;
  fo.trunc_K = setup.trunc_K;
  const auto& red = st.rho_star.solution;
  Vec seed(red.z.size());
  for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = red.z[i] + red.omega[i];
  if (previous) {
    Vec moved = detail::shift_profile(previous->profile, op.grid().h, st.rho_star.rho - previous->peak_rho,
                                      op.grid().size());
    try {
      st.solution = solve_full(op, moved, fo);
      st.seed_recentred = true;
      return st;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::newton_divergence && e.kind() != ErrorKind::converged_to_zero) throw;
    }
  }
  st.solution = solve_full(op, seed, fo);
  return st;
}

struct ContinuationResult {
  std::vector<EpsStage> stages;
  bool complete = false;
  std::string failure;  // stage error that truncated the schedule
};

inline ContinuationResult continuation_in_eps(const ProblemSetup& setup, const std::vector<double>& schedule)
{
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] < schedule[i - 1]))
      throw Error(ErrorKind::config_invalid, "eps schedule must be strictly decreasing");
    if (schedule[i] / schedule[i - 1] < 0.7)
      throw Error(ErrorKind::config_invalid, "consecutive eps ratio below 0.7");
  }
  ContinuationResult out;
  for (double eps : schedule) {
    try {
      const FullSolution* prev = out.stages.empty() ? nullptr : &out.stages.back().solution;
      out.stages.push_back(solve_stage(setup, eps, prev));
    } catch (const Error& e) {
      out.failure = "eps " + std::to_string(eps) + ": " + e.what();
      return out;
    }
  }
  out.complete = true;
  return out;
}

} // namespace spherelab

#endif
