#ifndef SPHERELAB_REDUCTION_HPP
#define SPHERELAB_REDUCTION_HPP

// Projected equation J'(z + omega) = alpha G zdot, <omega, zdot>_r = 0, the
// reduced energy Psi(rho) = J(z + omega), and the stationary radius rho*.

#include <spherelab/ansatz.hpp>
#include <spherelab/error.hpp>
#include <spherelab/ground_state.hpp>
#include <spherelab/linalg.hpp>
#include <spherelab/potential.hpp>
#include <spherelab/radial.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace spherelab {

enum class ProjectedMode { newton, fixed_point };

struct ProjectedOptions {
  ProjectedMode mode = ProjectedMode::newton;
  double tol = 1e-10;
  int max_iter = 60;
  int max_fixed_point_iter = 2000;
};

struct ReducedSolution {
  double eps = 0, rho = 0;
  Vec z, zdot, omega;
  double alpha = 0;
  double psi = 0;
  int newton_iters = 0;
  double residual_norm = 0;   // dual norm of J'(z+omega) - alpha G zdot
  double orthogonality = 0;   // <omega, zdot>_r / (||omega|| ||zdot||)
  bool converged = false;
  Vec step_norms;             // fixed-point mode: ||omega_{k+1} - omega_k||_r
};

namespace detail {
inline double orthogonality_defect(const RadialOperator& op, const Vec& omega, const Vec& zdot)
{
  double no = op.norm(omega), nz = op.norm(zdot);
  if (no == 0.0 || nz == 0.0) return 0.0;
  return op.inner(omega, zdot) / (no * nz);
}

// Solves H dw = rhs + da b, b^T dw = c_rhs by block elimination.
inline void bordered_solve(const TridiagLU& lu, const Vec& b, const Vec& rhs, double c_rhs,
                           std::size_t m, Vec& dw, double& da)
{
  Vec x(2 * m);
  for (std::size_t i = 0; i < m; ++i) { x[i] = rhs[i]; x[m + i] = b[i]; }
  lu.solve_in_place(x, 2);
  double bx1 = 0, bx2 = 0;
  for (std::size_t i = 0; i < m; ++i) { bx1 += b[i] * x[i]; bx2 += b[i] * x[m + i]; }
  if (bx2 == 0.0 || !std::isfinite(bx2))
    throw Error(ErrorKind::hessian_singular, "bordered system: zero Schur complement");
  da = (c_rhs - bx1) / bx2;
  dw.assign(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) dw[i] = x[i] + da * x[m + i];
}
} // namespace detail

/// One application of the contraction map: returns omega' solving
/// J''(z) omega' - alpha G zdot = -(J'(z + omega) - J''(z) omega), <omega', zdot>_r = 0.
inline std::pair<Vec, double> apply_contraction(const RadialOperator& op, const Vec& z, const Vec& zdot,
                                                const TridiagLU& lu0, const Tridiag& H0, const Vec& omega)
{
  const std::size_t m = op.unknowns();
  Vec b = op.gram_apply(zdot);
  Vec u(z.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = z[i] + omega[i];
  Vec g = op.gradient(u);
  Vec h0w = H0.apply(omega);
  Vec rhs(m);
  for (std::size_t i = 0; i < m; ++i) rhs[i] = -(g[i] - h0w[i]);
  Vec w;
  double alpha;
  detail::bordered_solve(lu0, b, rhs, 0.0, m, w, alpha);
  return {w, alpha};
}

inline ReducedSolution solve_projected(const RadialOperator& op, const AnsatzParams& a,
                                       const ProjectedOptions& opt = {})
{
  const auto& g = op.grid();
  const double p = op.p();
  ReducedSolution r;
  r.eps = a.eps;
  r.rho = a.rho;
  r.z = build_z(a, op.potential(), p, g);
  r.zdot = build_zdot(a, op.potential(), p, g);
  const std::size_t m = op.unknowns();
  const Vec b = op.gram_apply(r.zdot);
  r.omega.assign(g.size(), 0.0);
  double alpha = 0.0;

  auto residual = [&](const Vec& omega, double al) {
    Vec u(r.z.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = r.z[i] + omega[i];
    Vec F = op.gradient(u);
    for (std::size_t i = 0; i < m; ++i) F[i] -= al * b[i];
    return F;
  };

  if (opt.mode == ProjectedMode::newton) {
    Vec F = residual(r.omega, alpha);
    double res = op.dual_norm(F);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
      if (res <= opt.tol) break;
      Vec u(r.z.size());
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = r.z[i] + r.omega[i];
      TridiagLU lu(op.hessian(u));
      Vec negF(m);
      for (std::size_t i = 0; i < m; ++i) negF[i] = -F[i];
      double c = -dot(b, r.omega, m);
      Vec dw;
      double da;
      detail::bordered_solve(lu, b, negF, c, m, dw, da);
      // Armijo-type backtracking on the dual residual norm.
      double t = 1.0, res_new = 0.0;
      Vec w_new, F_new;
      for (int bt = 0; bt < 30; ++bt) {
        w_new = r.omega;
        for (std::size_t i = 0; i < m; ++i) w_new[i] += t * dw[i];
        F_new = residual(w_new, alpha + t * da);
        res_new = op.dual_norm(F_new);
        if (std::isfinite(res_new) && res_new <= (1.0 - 1e-4 * t) * res) break;
        t *= 0.5;
      }
      if (!(std::isfinite(res_new)) || res_new >= res) {
        // no descent: rounding floor reached or diverging
        break;
      }
      r.omega = std::move(w_new);
      alpha += t * da;
      F = std::move(F_new);
      res = res_new;
    }
    r.newton_iters = it;
    r.residual_norm = res;
    r.converged = res <= opt.tol;
  } else {
    Tridiag H0 = op.hessian(r.z);
    TridiagLU lu0(H0);
    int it = 0;
    for (; it < opt.max_fixed_point_iter; ++it) {
      auto [w, al] = apply_contraction(op, r.z, r.zdot, lu0, H0, r.omega);
      Vec d(w.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = w[i] - r.omega[i];
      double dn = op.norm(d);
      r.step_norms.push_back(dn);
      r.omega = std::move(w);
      alpha = al;
      if (!std::isfinite(dn)) break;
      if (dn <= opt.tol) { ++it; break; }
    }
    r.newton_iters = it;
    r.residual_norm = op.dual_norm(residual(r.omega, alpha));
    r.converged = !r.step_norms.empty() && r.step_norms.back() <= opt.tol;
  }
  r.alpha = alpha;
  Vec u(r.z.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = r.z[i] + r.omega[i];
  r.psi = op.energy(u);
  r.orthogonality = detail::orthogonality_defect(op, r.omega, r.zdot);
  return r;
}

/// Ratios ||d_{k+1}|| / ||d_k|| of successive fixed-point steps (k >= 1).
inline Vec contraction_ratios(const ReducedSolution& s)
{
  Vec q;
  for (std::size_t k = 1; k < s.step_norms.size(); ++k)
    if (s.step_norms[k - 1] > 0.0 && s.step_norms[k] > 1e-13) q.push_back(s.step_norms[k] / s.step_norms[k - 1]);
  return q;
}

struct SpectralReport {
  double complement_min = 0.0;    // min Rayleigh quotient of J''(z) on span{z, zdot}^perp
  double quad_form_zz = 0.0;      // J''(z)[z, z]
  double quad_form_zz_pred = 0.0; // (1-p) int s^{n-1} z^{p+1}
  double projected_min_abs = 0.0; // min |eigenvalue| of the G-normalised operator on zdot^perp
  Vec mu_complement, mu_projected;
  int iterations = 0;
};

inline SpectralReport projected_hessian_gap(const RadialOperator& op, const AnsatzParams& a)
{
  const auto& g = op.grid();
  const double p = op.p();
  Vec z = build_z(a, op.potential(), p, g);
  Vec zd = build_zdot(a, op.potential(), p, g);
  const std::size_t m = op.unknowns();
  const auto& q = op.mass_weights();
  Vec wdiag(m);
  for (std::size_t i = 0; i < m; ++i) wdiag[i] = q[i] * op.nonlinearity().df(z[i]);
  auto mulw = [&](const Vec& x) {
    Vec y(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = wdiag[i] * x[i];
    return y;
  };
  SpectralReport rep;
  auto s1 = pencil_lanczos(op.gram(), op.gram_solver(), mulw, {z, zd}, 0.2);
  rep.complement_min = 1.0 - s1.mu.front();
  rep.mu_complement = s1.mu;
  auto s2 = pencil_lanczos(op.gram(), op.gram_solver(), mulw, {zd}, 0.2);
  rep.mu_projected = s2.mu;
  rep.projected_min_abs = 1.0 - 0.2;
  for (double mu : s2.mu)
    if (mu >= 0.2) rep.projected_min_abs = std::min(rep.projected_min_abs, std::abs(1.0 - mu));
  rep.iterations = s1.iterations + s2.iterations;

  Vec hz = op.hessian(z).apply(z);
  rep.quad_form_zz = dot(z, hz, m);
  Vec zp1(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) zp1[i] = std::pow(std::abs(z[i]), p + 1.0);
  rep.quad_form_zz_pred = (1.0 - p) * quadrature(g, zp1);
  return rep;
}

struct ScanRow {
  double rho = 0, psi = 0, alpha = 0, discrepancy = 0;
  bool converged = false;
};

struct ScanCurve {
  double eps = 0;
  std::vector<ScanRow> rows;
};

/// C_E = (1/2 - 1/(p+1)) int_R Q^{p+1} for lambda = 1.
inline double energy_constant(double p) { return ground_state_constants(make_profile(p, 1.0), 2).energy_const; }

/// |eps^{3n-3} Psi - C_E eps^2 M_eps(eps rho)|
inline double matched_discrepancy(const RadialOperator& op, double rho, double psi, double CE)
{
  const int n = op.grid().n;
  const double eps = op.eps();
  auto M = eval_M(op.potential(), n, op.p(), eps, eps * rho);
  return std::abs(std::pow(eps, 3.0 * n - 3.0) * psi - CE * eps * eps * M.M);
}

inline ScanCurve reduced_energy_scan(const RadialOperator& op, const AnsatzParams& tmpl, int rho_samples,
                                     const ProjectedOptions& opt = {})
{
  if (rho_samples < 8) throw Error(ErrorKind::config_invalid, "rho_samples must be >= 8");
  auto om = configuration_set(tmpl.eps, tmpl.C1, tmpl.C2);
  const double CE = energy_constant(op.p());
  ScanCurve c;
  c.eps = tmpl.eps;
  for (int i = 0; i < rho_samples; ++i) {
    AnsatzParams a = tmpl;
    a.rho = om.lo + (om.hi - om.lo) * i / (rho_samples - 1);
    ScanRow row;
    row.rho = a.rho;
    try {
      auto s = solve_projected(op, a, opt);
      row.psi = s.psi;
      row.alpha = s.alpha;
      row.converged = s.converged;
      row.discrepancy = matched_discrepancy(op, a.rho, s.psi, CE);
    } catch (const Error&) {
      row.converged = false;
    }
    c.rows.push_back(row);
  }
  return c;
}

/// Sign changes of alpha between consecutive converged samples.
inline std::vector<Interval> alpha_sign_changes(const ScanCurve& c)
{
  std::vector<Interval> out;
  for (std::size_t i = 1; i < c.rows.size(); ++i) {
    const auto& l = c.rows[i - 1];
    const auto& r = c.rows[i];
    if (l.converged && r.converged && ((l.alpha > 0) != (r.alpha > 0))) out.push_back({l.rho, r.rho});
  }
  return out;
}

/// The sign-change bracket nearest to `target` (or the smallest one).
inline Interval select_bracket(const ScanCurve& c, std::optional<double> target = {})
{
  auto all = alpha_sign_changes(c);
  if (all.empty()) throw Error(ErrorKind::no_sign_change, "alpha keeps its sign over the scan");
  if (!target) return all.front();
  Interval best = all.front();
  double bd = 1e300;
  for (const auto& iv : all) {
    double d = (*target < iv.lo) ? iv.lo - *target : (*target > iv.hi ? *target - iv.hi : 0.0);
    if (d < bd) { bd = d; best = iv; }
  }
  return best;
}

struct RhoStar {
  double rho = 0;
  ReducedSolution solution;
  double dpsi_fd = 0;         // central difference dPsi/drho, delta = 1e-4 rho
  double dpsi_rel = 0;        // |dPsi/drho| / |Psi|
  double domega_ratio = 0;    // ||d omega / d rho|| / ||zdot||, delta = 1e-3 rho
  int bisection_steps = 0;
};

inline RhoStar find_rho_star(const RadialOperator& op, const AnsatzParams& tmpl, Interval bracket,
                             const ProjectedOptions& opt = {})
{
  auto om = configuration_set(tmpl.eps, tmpl.C1, tmpl.C2);
  if (!om.contains(bracket.lo) || !om.contains(bracket.hi))
    throw Error(ErrorKind::left_configuration_set, "bracket leaves Omega_eps");
  auto solve_at = [&](double rho) {
    AnsatzParams a = tmpl;
    a.rho = rho;
    auto s = solve_projected(op, a, opt);
    if (!s.converged) throw Error(ErrorKind::newton_divergence, "projected solve failed at rho " + std::to_string(rho));
    return s;
  };
  double lo = bracket.lo, hi = bracket.hi;
  auto slo = solve_at(lo);
  auto shi = solve_at(hi);
  if ((slo.alpha > 0) == (shi.alpha > 0)) throw Error(ErrorKind::no_sign_change, "bracket has no alpha sign change");
  RhoStar out;
  ReducedSolution mid_sol = std::abs(slo.alpha) < std::abs(shi.alpha) ? slo : shi;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    auto s = solve_at(mid);
    out.bisection_steps = it + 1;
    mid_sol = s;
    if (std::abs(s.alpha) <= 1e-9 * op.norm(s.zdot) || hi - lo <= 1e-13 * mid) break;
    if ((s.alpha > 0) == (slo.alpha > 0)) { lo = mid; slo = s; }
    else hi = mid;
  }
  out.rho = mid_sol.rho;
  out.solution = mid_sol;

  const double d1 = 1e-4 * out.rho;
  out.dpsi_fd = (solve_at(out.rho + d1).psi - solve_at(out.rho - d1).psi) / (2.0 * d1);
  out.dpsi_rel = std::abs(out.dpsi_fd) / std::abs(out.solution.psi);
  const double d2 = 1e-3 * out.rho;
  auto sp = solve_at(out.rho + d2), sm = solve_at(out.rho - d2);
  Vec dw(sp.omega.size());
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] = (sp.omega[i] - sm.omega[i]) / (2.0 * d2);
  out.domega_ratio = op.norm(dw) / op.norm(out.solution.zdot);
  return out;
}

/// gamma = factor * observed max of ||omega|| / (eps^3 ||z||) and the pointwise envelope ratio.
inline double calibrate_gamma(const RadialOperator& op, const AnsatzParams& a, const ReducedSolution& s,
                              double factor = 2.0)
{
  const double e3 = std::pow(a.eps, 3);
  double norm_ratio = op.norm(s.omega) / (e3 * op.norm(s.z));
  AnsatzParams probe = a;
  probe.gamma = 1.0;
  auto m = membership_E(probe, op, s.z, s.omega);
  return factor * std::max(norm_ratio, m.pointwise_ratio);
}

} // namespace spherelab

#endif
