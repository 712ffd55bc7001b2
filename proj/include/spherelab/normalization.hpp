#ifndef SPHERELAB_NORMALIZATION_HPP
#define SPHERELAB_NORMALIZATION_HPP

// Mass constraint and the a <-> eps dictionary, back-map to the normalized
// problem -Delta u + V u = a u^p + mu u, int u^2 = 1, and family trend checks.

#include <spherelab/ansatz.hpp>
#include <spherelab/error.hpp>
#include <spherelab/full_solver.hpp>
#include <spherelab/ground_state.hpp>
#include <spherelab/potential.hpp>
#include <spherelab/radial.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace spherelab {

/// a = (m * eps^{n - 4/(p-1)})^{(p-1)/2}, m = omega_{n-1} int s^{n-1} u~^2 ds.
inline double mass_to_a(double mass_weighted, int n, double p, double eps)
{
  return std::pow(mass_weighted * std::pow(eps, n - 4.0 / (p - 1.0)), 0.5 * (p - 1.0));
}

inline double mass_to_a(const FullSolution& sol, int n, double p)
{
  return mass_to_a(sol.mass_weighted, n, p, sol.eps);
}

struct NormalizedRecord {
  double eps = 0;
  double a = 0;
  double mu = 0;
  double mass_check = 0;      // int_{R^n} u_a^2
  double rho = 0;             // rescaled peak radius
  double rho_orig = 0;        // eps * rho
  double abs_Mp = 0;          // |M_eps'(eps rho)|
  double abs_Vp = 0;          // |V'(eps rho)|
  double eq1_residual = 0;    // sup residual / sup |mu u_a|
  double dictionary_defect = 0;  // a^{2/(p-1)} eps^{4/(p-1)} / int u_eps^2 - 1
  bool in_configuration_set = true;
  Vec r, u_a;                 // profile in the original radius
};

/// u_a(r) = (a eps^2)^{-1/(p-1)} u~(r/eps), mu = -1/eps^2.
inline NormalizedRecord to_original(const RadialOperator& op, const FullSolution& sol, double a,
                                    double C1 = 0.5, double C2 = 2.0)
{
  const auto& g = op.grid();
  const int n = g.n;
  const double p = op.p(), eps = sol.eps;
  NormalizedRecord rec;
  rec.eps = eps;
  rec.a = a;
  rec.mu = -1.0 / (eps * eps);
  rec.rho = sol.peak_rho;
  rec.rho_orig = eps * sol.peak_rho;
  const auto& V = op.potential();
  rec.abs_Mp = std::abs(eval_M(V, n, p, eps, rec.rho_orig).Mp);
  rec.abs_Vp = std::abs(V.Vp(rec.rho_orig));
  rec.in_configuration_set = configuration_set(eps, C1, C2).contains(sol.peak_rho);

  const double scale = std::pow(a * eps * eps, -1.0 / (p - 1.0));
  RadialGrid gr{n, eps * g.s_min, eps * g.h, g.N};
  rec.r.resize(g.size());
  rec.u_a.resize(g.size());
  Vec ue2(g.size()), ua2(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    rec.r[i] = gr.node(i);
    rec.u_a[i] = scale * sol.profile[i];
    ue2[i] = sol.profile[i] * sol.profile[i];
    ua2[i] = rec.u_a[i] * rec.u_a[i];
  }
  const double omega = sphere_area(n);
  rec.mass_check = omega * quadrature(gr, ua2);
  const double mass_ue = omega * quadrature(gr, ue2);
  rec.dictionary_defect = std::pow(a, 2.0 / (p - 1.0)) * std::pow(eps, 4.0 / (p - 1.0)) / mass_ue - 1.0;

  // Conservative finite-volume residual of -u'' - (n-1)/r u' + V u - a u^p - mu u in r.
  const double h = gr.h;
  double worst = 0.0, ref = 0.0;
  auto wgt = [&](double x) { return std::pow(x, n - 1); };
  for (std::size_t i = 0; i < g.N; ++i) {
    double r = gr.node(i);
    double lo = std::max(r - 0.5 * h, 0.0), hi = std::min(r + 0.5 * h, gr.s_max());
    double q = (std::pow(hi, n) - std::pow(lo, n)) / n;
    double flux_r = wgt(r + 0.5 * h) * (rec.u_a[i + 1] - rec.u_a[i]) / h;
    double flux_l = i > 0 ? wgt(r - 0.5 * h) * (rec.u_a[i] - rec.u_a[i - 1]) / h : 0.0;
    double lap = -(flux_r - flux_l) / q;
    double u = rec.u_a[i];
    double res = lap + V.V(r) * u - a * std::pow(std::abs(u), p - 1.0) * u - rec.mu * u;
    worst = std::max(worst, std::abs(res));
    ref = std::max(ref, std::abs(rec.mu * u));
  }
  rec.eq1_residual = ref > 0 ? worst / ref : 0.0;
  return rec;
}

struct ScalingLawReport {
  Vec eps, R;
  bool decreasing_dev = false;      // |R - 1| strictly decreasing as eps decreases
  bool in_band_at_smallest = false; // R(eps_min) in [0.85, 1.15]
};

/// R = a^{2/(p-1)} / [C_mass omega_{n-1} (eps rho)^{n-1} eps^{1 - 4/(p-1)}], members in
/// decreasing eps order.
inline ScalingLawReport scaling_law_check(const std::vector<NormalizedRecord>& family, int n, double p)
{
  if (family.size() < 3) throw Error(ErrorKind::insufficient_family, "scaling law needs >= 3 members");
  const double Cmass = ground_state_constants(make_profile(p, 1.0), n).mass_const;
  const double omega = sphere_area(n);
  ScalingLawReport rep;
  for (const auto& m : family) {
    rep.eps.push_back(m.eps);
    rep.R.push_back(std::pow(m.a, 2.0 / (p - 1.0)) /
                    (Cmass * omega * std::pow(m.rho_orig, n - 1) * std::pow(m.eps, 1.0 - 4.0 / (p - 1.0))));
  }
  std::vector<std::size_t> idx(family.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return rep.eps[x] > rep.eps[y]; });
  rep.decreasing_dev = true;
  for (std::size_t k = 1; k < idx.size(); ++k)
    if (!(std::abs(rep.R[idx[k]] - 1.0) < std::abs(rep.R[idx[k - 1]] - 1.0))) rep.decreasing_dev = false;
  double Rs = rep.R[idx.back()];
  rep.in_band_at_smallest = Rs >= 0.85 && Rs <= 1.15;
  return rep;
}

struct FamilyPoint {
  double eps = 0, a = 0, eps_rho = 0;
};

struct FSolveResult {
  double eps = 0;
  double a = 0;
  int probes = 0;
  bool converged = false;
};

/// Root of G(eps) = a(eps) - a_target. The family brackets the target;
/// `fresh_a(eps, eps_rho_guess)` performs a fresh solve at a probe point.
/// Safeguarded regula falsi (Illinois) on the bracket, starting from the
/// log-log interpolant of the family.
inline FSolveResult solve_F_for_eps(double a_target, std::vector<FamilyPoint> family,
                                    const std::function<double(double, double)>& fresh_a,
                                    double rtol = 1e-8, int max_probes = 60)
{
  if (family.size() < 2) throw Error(ErrorKind::insufficient_family, "need >= 2 family members");
  std::sort(family.begin(), family.end(), [](auto& x, auto& y) { return x.eps < y.eps; });
  for (const auto& f : family)
    if (std::abs(f.a - a_target) <= rtol * a_target) return {f.eps, f.a, 0, true};
  std::size_t k = family.size();
  for (std::size_t i = 0; i + 1 < family.size(); ++i) {
    double g0 = family[i].a - a_target, g1 = family[i + 1].a - a_target;
    if ((g0 > 0) != (g1 > 0)) { k = i; break; }
  }
  if (k == family.size()) throw Error(ErrorKind::bracket_failure, "a_target outside the family range");
  FamilyPoint lo = family[k], hi = family[k + 1];
  double glo = lo.a - a_target, ghi = hi.a - a_target;
  auto interp_erho = [&](double e) {
    double t = (e - lo.eps) / (hi.eps - lo.eps);
    return (1.0 - t) * lo.eps_rho + t * hi.eps_rho;
  };
  FSolveResult out;
  // first probe from the log-log interpolant
  double x = std::exp(std::log(lo.eps) + (std::log(a_target) - std::log(lo.a)) *
                                           (std::log(hi.eps) - std::log(lo.eps)) /
                                           (std::log(hi.a) - std::log(lo.a)));
  int side = 0;
  double ea = lo.eps, eb = hi.eps;
  for (int it = 0; it < max_probes; ++it) {
    if (!(x > ea && x < eb)) x = 0.5 * (ea + eb);
    double ax = fresh_a(x, interp_erho(x));
    ++out.probes;
    double gx = ax - a_target;
    out.eps = x;
    out.a = ax;
    if (std::abs(gx) <= rtol * a_target) { out.converged = true; return out; }
    if ((gx > 0) == (glo > 0)) {
      ea = x; glo = gx;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      eb = x; ghi = gx;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
    x = (ea * ghi - eb * glo) / (ghi - glo);
    if (eb - ea <= 1e-15 * eb) break;
  }
  return out;
}

struct TrendItem {
  std::string name;
  bool holds = true;
  Vec values;
};

struct TrendReport {
  std::vector<TrendItem> items;
  bool vacuous = false;
  std::string warning;
  bool all_hold() const
  {
    return std::all_of(items.begin(), items.end(), [](const TrendItem& t) { return t.holds; });
  }
};

/// Members in decreasing eps order.
inline TrendReport necessary_conditions_report(const std::vector<NormalizedRecord>& family)
{
  TrendReport rep;
  if (family.size() < 3) {
    rep.vacuous = true;
    rep.warning = "fewer than three members: trends not assessed";
    return rep;
  }
  for (std::size_t i = 1; i < family.size(); ++i)
    if (!(family[i].eps < family[i - 1].eps))
      throw Error(ErrorKind::config_invalid, "family must be ordered by decreasing eps");
  auto increasing = [&](const std::string& name, auto get) {
    TrendItem t{name, true, {}};
    for (const auto& m : family) t.values.push_back(get(m));
    for (std::size_t i = 1; i < t.values.size(); ++i)
      if (!(t.values[i] > t.values[i - 1])) t.holds = false;
    rep.items.push_back(t);
  };
  increasing("rho increasing", [](const NormalizedRecord& m) { return m.rho; });
  increasing("eps*rho increasing", [](const NormalizedRecord& m) { return m.rho_orig; });
  increasing("a increasing", [](const NormalizedRecord& m) { return m.a; });
  TrendItem d{"min(|M'|,|V'|) non-increasing", true, {}};
  for (const auto& m : family) d.values.push_back(std::min(m.abs_Mp, m.abs_Vp));
  for (std::size_t i = 1; i < d.values.size(); ++i)
    if (d.values[i] > d.values[i - 1]) d.holds = false;
  rep.items.push_back(d);
  TrendItem inside{"peaks inside Omega_eps", true, {}};
  for (const auto& m : family) {
    inside.values.push_back(m.in_configuration_set ? 1.0 : 0.0);
    if (!m.in_configuration_set) inside.holds = false;
  }
  rep.items.push_back(inside);
  return rep;
}

} // namespace spherelab

#endif
