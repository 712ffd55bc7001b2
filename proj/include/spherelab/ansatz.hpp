#ifndef SPHERELAB_ANSATZ_HPP
#define SPHERELAB_ANSATZ_HPP

// Cutoff sphere ansatz z = zeta(s) U(s - rho), U = Q_beta, beta^2 = 1 + eps^2 V(eps rho),
// its rho-derivative, the fixed-point set test and the gradient scaling table.

#include <spherelab/error.hpp>
#include <spherelab/ground_state.hpp>
#include <spherelab/potential.hpp>
#include <spherelab/radial.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace spherelab {

struct AnsatzParams {
  double eps = 0.4;
  double rho = 20.0;
  double C1 = 0.5, C2 = 2.0;
  double gamma = 1.0;
  double lambda0 = 1.0;
  double eta = 0.05;
  double lambda1() const { return lambda0 - eta; }
};

struct Interval {
  double lo = 0, hi = 0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Omega_eps = [C1 / (2 eps^3), 2 C2 / eps^3]
inline Interval configuration_set(double eps, double C1, double C2)
{
  double e3 = eps * eps * eps;
  return {C1 / (2.0 * e3), 2.0 * C2 / e3};
}

/// lambda0/min{p,2} < lambda1 = lambda0 - eta < lambda0, and p above `p_min`.
inline void validate_decay_window(double p, double lambda0, double eta, double p_min = 1.05)
{
  if (!(p > p_min))
    throw Error(ErrorKind::config_invalid,
                "p = " + std::to_string(p) + " too close to 1: decay window for lambda1 nearly empty");
  double l1 = lambda0 - eta;
  if (!(eta > 0.0) || !(l1 > lambda0 / std::min(p, 2.0)))
    throw Error(ErrorKind::config_invalid, "lambda1 = lambda0 - eta outside (lambda0/min{p,2}, lambda0)");
}

struct GridPolicy {
  double h = 0.0025;
  double tail = 40.0;  // far-field length in units of 1/lambda0
};

/// Default step: higher powers sharpen the integrands of the identity audits.
inline GridPolicy default_grid_policy(double p)
{
  GridPolicy g;
  if (p > 4.0) g.h = 0.00125;
  return g;
}

/// Fixed grid covering Omega_eps plus the far-field tail.
inline RadialGrid configuration_grid(int n, const AnsatzParams& a, const GridPolicy& gp)
{
  return make_grid(n, configuration_set(a.eps, a.C1, a.C2).hi + gp.tail / a.lambda0, gp.h);
}

/// Grid covering [0, rho + tail/lambda0].
inline RadialGrid ansatz_grid(int n, const AnsatzParams& a, const GridPolicy& gp)
{
  return make_grid(n, a.rho + gp.tail / a.lambda0, gp.h);
}

namespace detail {
inline double smoothstep5(double t) { return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }
inline double ramp_edges(const AnsatzParams& a, double& lo, double& hi)
{
  double e3 = a.eps * a.eps * a.eps;
  lo = a.C1 / (16.0 * e3);
  hi = a.C1 / (8.0 * e3);
  return hi - lo;
}
} // namespace detail

inline double cutoff(const AnsatzParams& a, double r)
{
  double lo, hi;
  double w = detail::ramp_edges(a, lo, hi);
  double t = std::clamp((r - lo) / w, 0.0, 1.0);
  return detail::smoothstep5(t);
}

inline double cutoff_d1(const AnsatzParams& a, double r)
{
  double lo, hi;
  double w = detail::ramp_edges(a, lo, hi);
  double t = (r - lo) / w;
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 30.0 * t * t * (1.0 - t) * (1.0 - t) / w;
}

inline double cutoff_d2(const AnsatzParams& a, double r)
{
  double lo, hi;
  double w = detail::ramp_edges(a, lo, hi);
  double t = (r - lo) / w;
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w);
}

/// Constants of |zeta'| <= C3 eps^3 / C1 and |zeta''| <= C4 eps^6 / C1^2.
constexpr double cutoff_C3 = 30.0;
constexpr double cutoff_C4 = 256.0 * 10.0 / 1.7320508075688772;

inline double ansatz_beta(const AnsatzParams& a, const PotentialSpec& v)
{
  double b2 = 1.0 + a.eps * a.eps * v.V(a.eps * a.rho);
  if (!(b2 > 0.0)) throw Error(ErrorKind::ellipticity_violation, "beta^2 <= 0");
  return std::sqrt(b2);
}

namespace detail {
inline void check_ansatz(const AnsatzParams& a, const RadialGrid& g)
{
  auto om = configuration_set(a.eps, a.C1, a.C2);
  if (!om.contains(a.rho))
    throw Error(ErrorKind::out_of_configuration_set,
                "rho = " + std::to_string(a.rho) + " outside [" + std::to_string(om.lo) + ", " +
                    std::to_string(om.hi) + "]");
  if (g.s_min != 0.0 || g.s_max() < a.rho + 20.0 / a.lambda0)
    throw Error(ErrorKind::config_invalid, "grid does not cover the ansatz support");
}
} // namespace detail

inline Vec build_z(const AnsatzParams& a, const PotentialSpec& v, double p, const RadialGrid& g)
{
  detail::check_ansatz(a, g);
  auto U = make_profile(p, ansatz_beta(a, v));
  Vec z(g.size());
  for (std::size_t i = 0; i < g.N; ++i) {
    double s = g.node(i);
    z[i] = cutoff(a, s) * eval_ground_state(U, s - a.rho);
  }
  z[g.N] = 0.0;
  return z;
}

inline Vec build_zdot(const AnsatzParams& a, const PotentialSpec& v, double p, const RadialGrid& g)
{
  detail::check_ansatz(a, g);
  auto U = make_profile(p, ansatz_beta(a, v));
  const double e3 = a.eps * a.eps * a.eps;
  const double coeff = e3 * v.Vp(a.eps * a.rho);
  Vec zd(g.size());
  for (std::size_t i = 0; i < g.N; ++i) {
    double s = g.node(i), x = s - a.rho;
    zd[i] = cutoff(a, s) * (coeff * eval_ground_state_dlambda2(U, x) - eval_ground_state_d1(U, x));
  }
  zd[g.N] = 0.0;
  return zd;
}

struct MembershipReport {
  bool member = false;
  bool norm_ok = false, pointwise_ok = false;
  double norm_bound = 0.0;        // gamma eps^3 ||z||
  double norm_margin = 0.0;       // norm_bound - ||omega||
  double pointwise_margin = 0.0;  // gamma - pointwise_ratio
  double pointwise_ratio = 0.0;   // max_{r <= rho} |omega(r)| e^{lambda1 (rho - r)}
};

inline MembershipReport membership_E(const AnsatzParams& a, const RadialOperator& op, const Vec& z,
                                     const Vec& omega)
{
  MembershipReport m;
  const double e3 = a.eps * a.eps * a.eps;
  m.norm_bound = a.gamma * e3 * op.norm(z);
  m.norm_margin = m.norm_bound - op.norm(omega);
  const auto& g = op.grid();
  const double l1 = a.lambda1();
  for (std::size_t i = 0; i < g.size() && g.node(i) <= a.rho; ++i) {
    double d = a.rho - g.node(i);
    m.pointwise_ratio = std::max(m.pointwise_ratio, std::abs(omega[i]) * std::exp(l1 * d));
  }
  m.pointwise_margin = a.gamma - m.pointwise_ratio;
  m.norm_ok = m.norm_margin >= 0.0;
  m.pointwise_ok = m.pointwise_margin >= 0.0;
  m.member = m.norm_ok && m.pointwise_ok;
  return m;
}

struct ScalingCase {
  AnsatzParams params;
  PotentialSpec potential;
  int n = 2;
  double p = 3.0;
  GridPolicy grid;
};

struct ScalingRow {
  double eps = 0, rho = 0;
  double grad_dual_norm = 0;  // ||J'(z)|| via the Riesz representative
  double z_norm = 0;
  double ratio = 0;           // ||J'(z)|| / (eps^3 ||z||)
  double z_norm_scaled = 0;   // ||z||^2 eps^{3(n-1)}
};

inline std::vector<ScalingRow> gradient_norm_scaling(const std::vector<ScalingCase>& cases)
{
  std::vector<ScalingRow> out;
  for (const auto& c : cases) {
    auto g = ansatz_grid(c.n, c.params, c.grid);
    RadialOperator op(g, c.params.eps, c.potential, Nonlinearity{c.p, {}});
    Vec z = build_z(c.params, c.potential, c.p, g);
    ScalingRow r;
    r.eps = c.params.eps;
    r.rho = c.params.rho;
    r.grad_dual_norm = op.dual_norm(op.gradient(z));
    r.z_norm = op.norm(z);
    const double e3 = std::pow(c.params.eps, 3);
    r.ratio = r.grad_dual_norm / (e3 * r.z_norm);
    r.z_norm_scaled = r.z_norm * r.z_norm * std::pow(c.params.eps, 3.0 * (c.n - 1));
    out.push_back(r);
  }
  return out;
}

} // namespace spherelab

#endif
