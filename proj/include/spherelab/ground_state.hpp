#ifndef SPHERELAB_GROUND_STATE_HPP
#define SPHERELAB_GROUND_STATE_HPP

// One-dimensional ground state Q_lambda of -u'' + lambda^2 u = u^p and its
// integral constants, shooting cross-check and linearised spectrum.

#include <spherelab/error.hpp>
#include <spherelab/linalg.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace spherelab {

struct GroundStateProfile {
  double p = 3.0;
  double lambda = 1.0;
  double amplitude = 0.0;
};

inline GroundStateProfile make_profile(double p, double lambda)
{
  if (!(p > 1.0)) throw Error(ErrorKind::config_invalid, "exponent p must exceed 1");
  if (!(lambda > 0.0)) throw Error(ErrorKind::config_invalid, "decay rate must be positive");
  return {p, lambda, std::pow(0.5 * (p + 1.0) * lambda * lambda, 1.0 / (p - 1.0))};
}

namespace detail {
// sech(y), safe for large |y|
inline double sech(double y)
{
  double t = std::exp(-std::abs(y));
  return 2.0 * t / (1.0 + t * t);
}
} // namespace detail

inline double eval_ground_state(const GroundStateProfile& g, double s)
{
  double y = 0.5 * (g.p - 1.0) * g.lambda * s;
  return g.amplitude * std::pow(detail::sech(y), 2.0 / (g.p - 1.0));
}

/// Q'
inline double eval_ground_state_d1(const GroundStateProfile& g, double s)
{
  double y = 0.5 * (g.p - 1.0) * g.lambda * s;
  return -g.lambda * eval_ground_state(g, s) * std::tanh(y);
}

/// Q'' = lambda^2 Q - Q^p
inline double eval_ground_state_d2(const GroundStateProfile& g, double s)
{
  double q = eval_ground_state(g, s);
  return g.lambda * g.lambda * q - std::pow(q, g.p);
}

/// d Q_lambda / d(lambda^2) at fixed s.
inline double eval_ground_state_dlambda2(const GroundStateProfile& g, double s)
{
  double l2 = g.lambda * g.lambda;
  return (0.5 / l2) * ((2.0 / (g.p - 1.0)) * eval_ground_state(g, s) + s * eval_ground_state_d1(g, s));
}

/// ODE residual -Q'' + lambda^2 Q - Q^p using the analytic second derivative
/// computed from the sech form (independent of eval_ground_state_d2).
inline double ground_state_ode_residual(const GroundStateProfile& g, double s)
{
  const double p = g.p, l = g.lambda;
  const double y = 0.5 * (p - 1.0) * l * s;
  const double th = std::tanh(y);
  const double q = eval_ground_state(g, s);
  // Q = A sech^m(y), m = 2/(p-1), y' = (p-1) l / 2
  const double m = 2.0 / (p - 1.0), yp = 0.5 * (p - 1.0) * l;
  const double sech2 = 1.0 - th * th;
  const double q2 = q * yp * yp * (m * m * th * th - m * sech2);
  return -q2 + l * l * q - std::pow(q, p);
}

/// Surface measure of the unit (n-1)-sphere.
inline double sphere_area(int n)
{
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Composite Simpson on [a,b] with an even number of panels.
template <class F>
double simpson(F&& f, double a, double b, long panels)
{
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double s = f(a) + f(b);
  for (long i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

/// Simpson with step halving until two successive values agree to `rtol`.
template <class F>
double simpson_refined(F&& f, double a, double b, double h0, double rtol = 1e-12, int max_halvings = 6)
{
  long panels = std::max(2L, static_cast<long>(std::ceil((b - a) / h0)));
  double prev = simpson(f, a, b, panels);
  for (int k = 0; k < max_halvings; ++k) {
    panels *= 2;
    double cur = simpson(f, a, b, panels);
    if (std::abs(cur - prev) <= rtol * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw Error(ErrorKind::tolerance_not_reached, "Simpson refinement stalled");
}

struct GroundStateConstants {
  double mass_full = 0.0;     // int_R Q^2
  double kinetic_half = 0.0;  // A = int_0^inf Q'^2
  double lp1_full = 0.0;      // int_R Q^{p+1}
  double energy_const = 0.0;  // C_E
  double mass_const = 0.0;    // C_mass
  double B_const = 0.0;       // omega_{n-1} * mass_full
  double omega = 0.0;         // omega_{n-1}
  double half_lp1 = 0.0, half_mass = 0.0;  // half-line integrals
};

struct QuadratureOptions {
  double tail_lengths = 40.0;  // S = tail_lengths / lambda
  double step = 1e-3;
  double rtol = 1e-12;
};

inline GroundStateConstants ground_state_constants(const GroundStateProfile& g, int n,
                                                   const QuadratureOptions& opt = {})
{
  if (n < 2) throw Error(ErrorKind::config_invalid, "dimension n must be at least 2");
  const double S = opt.tail_lengths / g.lambda;
  const double h = opt.step / g.lambda;
  GroundStateConstants c;
  c.half_mass = simpson_refined([&](double s) { double q = eval_ground_state(g, s); return q * q; },
                                0.0, S, h, opt.rtol);
  c.kinetic_half = simpson_refined(
      [&](double s) { double d = eval_ground_state_d1(g, s); return d * d; }, 0.0, S, h, opt.rtol);
  c.half_lp1 = simpson_refined([&](double s) { return std::pow(eval_ground_state(g, s), g.p + 1.0); },
                               0.0, S, h, opt.rtol);
  c.mass_full = 2.0 * c.half_mass;
  c.lp1_full = 2.0 * c.half_lp1;
  c.energy_const = (0.5 - 1.0 / (g.p + 1.0)) * c.lp1_full;
  c.mass_const = 2.0 * (g.p + 3.0) / (g.p - 1.0) * c.kinetic_half;
  c.omega = sphere_area(n);
  c.B_const = c.omega * c.mass_full;
  return c;
}

/// The three half-line quantities that the Pohozaev identity equates.
struct HalfLinePohozaev {
  double from_lp1, from_mass, kinetic;
  double max_rel_spread() const
  {
    double lo = std::min({from_lp1, from_mass, kinetic});
    double hi = std::max({from_lp1, from_mass, kinetic});
    return (hi - lo) / std::abs(kinetic);
  }
};

inline HalfLinePohozaev half_line_pohozaev(const GroundStateProfile& g, const GroundStateConstants& c)
{
  const double p = g.p;
  return {(p - 1.0) / (2.0 * (p + 1.0)) * c.half_lp1, (p - 1.0) / (p + 3.0) * g.lambda * g.lambda * c.half_mass,
          c.kinetic_half};
}

struct SampledProfile {
  double step = 0.0;
  double amplitude = 0.0;
  Vec s, u;
};

/// Stormer-Verlet shooting for -u'' + lambda^2 u = u^p, u'(0) = 0, bisecting
/// on u(0). Returns the trajectory of the last undershooting amplitude up to
/// its turning point.
inline SampledProfile shoot_ground_state(double p, double lambda, double step, double length = 0.0)
{
  if (!(step > 0.0)) throw Error(ErrorKind::config_invalid, "shooting step must be positive");
  if (length <= 0.0) length = 40.0 / lambda;
  const double l2 = lambda * lambda;
  auto force = [&](double u) { return l2 * u - std::pow(std::abs(u), p - 1.0) * u; };
  const long steps = static_cast<long>(std::ceil(length / step));

  // +1 overshoot (crosses zero), -1 undershoot (turns back up), 0 undecided.
  auto classify = [&](double a, Vec* traj) {
    double um = a, u = a + 0.5 * step * step * force(a);
    if (traj) { traj->clear(); traj->push_back(um); }
    for (long k = 1; k < steps; ++k) {
      if (traj) traj->push_back(u);
      double un = 2.0 * u - um + step * step * force(u);
      if (un < 0.0) return 1;
      if (un > u) return -1;
      um = u;
      u = un;
    }
    return 0;
  };

  const double floor_amp = std::pow(l2, 1.0 / (p - 1.0));
  double lo = floor_amp * (1.0 + 1e-3);
  if (classify(lo, nullptr) != -1)
    throw Error(ErrorKind::shooting_bracket_failure, "lower amplitude does not undershoot");
  double hi = 2.0 * lo;
  int tries = 0;
  while (classify(hi, nullptr) != 1) {
    hi *= 2.0;
    if (++tries > 60) throw Error(ErrorKind::shooting_bracket_failure, "no overshooting amplitude");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    int c = classify(mid, nullptr);
    if (c == 1) hi = mid;
    else if (c == -1) lo = mid;
    else { lo = mid; break; }
  }
  SampledProfile out;
  out.step = step;
  out.amplitude = lo;
  classify(lo, &out.u);
  out.s.resize(out.u.size());
  for (std::size_t i = 0; i < out.s.size(); ++i) out.s[i] = step * static_cast<double>(i);
  return out;
}

struct LinearizedSpectrum {
  Vec s;                     // interior nodes
  Vec values;                // ascending
  std::vector<Vec> vectors;  // unit Euclidean norm
};

/// Lowest k eigenpairs of -d^2/ds^2 + lambda^2 - p Q^{p-1} on [-W, W], Dirichlet.
inline LinearizedSpectrum linearized_spectrum(const GroundStateProfile& g, double half_width,
                                              double step, int k)
{
  if (half_width < 10.0 / g.lambda) throw Error(ErrorKind::config_invalid, "domain too narrow");
  if (k < 2) throw Error(ErrorKind::config_invalid, "need at least two eigenpairs");
  const long cells = static_cast<long>(std::llround(2.0 * half_width / step));
  const double h = 2.0 * half_width / static_cast<double>(cells);
  const std::size_t m = static_cast<std::size_t>(cells - 1);
  LinearizedSpectrum out;
  out.s.resize(m);
  Vec d(m), e(m > 0 ? m - 1 : 0, -1.0 / (h * h));
  for (std::size_t j = 0; j < m; ++j) {
    double s = -half_width + h * static_cast<double>(j + 1);
    out.s[j] = s;
    d[j] = 2.0 / (h * h) + g.lambda * g.lambda - g.p * std::pow(eval_ground_state(g, s), g.p - 1.0);
  }
  auto ep = sym_tridiag_lowest(d, e, k);
  out.values = std::move(ep.values);
  out.vectors = std::move(ep.vectors);
  return out;
}

struct NondegeneracyReport {
  double quad_form_QQ = 0.0;       // J0''(Q)[Q,Q] by quadrature of the closed form
  double quad_form_predicted = 0.0;  // (1-p) int Q^{p+1}
  double complement_min = 0.0;     // min Rayleigh quotient on span{Q,Q'}^perp, H^1_lambda norm
  Vec lowest;                      // lowest eigenvalues of the linearised operator
};

inline NondegeneracyReport nondegeneracy_report(const GroundStateProfile& g, double half_width = 0.0,
                                                double step = 0.0)
{
  if (half_width <= 0.0) half_width = 20.0 / g.lambda;
  if (step <= 0.0) step = 1e-2 / g.lambda;
  NondegeneracyReport r;
  const double S = 40.0 / g.lambda;
  const double l2 = g.lambda * g.lambda;
  r.quad_form_QQ = 2.0 * simpson_refined(
                             [&](double s) {
                               double q = eval_ground_state(g, s), d = eval_ground_state_d1(g, s);
                               return d * d + l2 * q * q - g.p * std::pow(q, g.p + 1.0);
                             },
                             0.0, S, 1e-3 / g.lambda);
  r.quad_form_predicted = (1.0 - g.p) * 2.0 *
      simpson_refined([&](double s) { return std::pow(eval_ground_state(g, s), g.p + 1.0); }, 0.0, S,
                      1e-3 / g.lambda);

  auto spec = linearized_spectrum(g, half_width, step, 3);
  r.lowest = spec.values;

  // Pencil: L = G - W with G the H^1_lambda Gram matrix.
  const std::size_t m = spec.s.size();
  const double h = spec.s.size() > 1 ? spec.s[1] - spec.s[0] : step;
  Tridiag G(m);
  Vec wdiag(m), q(m), qd(m);
  for (std::size_t j = 0; j < m; ++j) {
    G.diag[j] = 2.0 / (h * h) + l2;
    if (j + 1 < m) G.sub[j] = G.sup[j] = -1.0 / (h * h);
    q[j] = eval_ground_state(g, spec.s[j]);
    qd[j] = eval_ground_state_d1(g, spec.s[j]);
    wdiag[j] = g.p * std::pow(q[j], g.p - 1.0);
  }
  SpdTridiagSolver gs(G);
  auto mulw = [&](const Vec& x) {
    Vec y(m);
    for (std::size_t j = 0; j < m; ++j) y[j] = wdiag[j] * x[j];
    return y;
  };
  auto sp = pencil_lanczos(G, gs, mulw, {q, qd}, 0.05);
  r.complement_min = 1.0 - sp.mu.front();
  return r;
}

/// Least-squares slope of log Q_lambda on [a, b].
inline double decay_slope(const GroundStateProfile& g, double a, double b, int samples = 200)
{
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < samples; ++i) {
    double s = a + (b - a) * i / (samples - 1);
    double y = std::log(eval_ground_state(g, s));
    sx += s; sy += y; sxx += s * s; sxy += s * y;
  }
  return (samples * sxy - sx * sy) / (samples * sxx - sx * sx);
}

/// lim e^{lambda s} Q_lambda(s) (decay amplitude, diagnostic only).
inline double decay_amplitude(const GroundStateProfile& g)
{
  return g.amplitude * std::pow(2.0, 2.0 / (g.p - 1.0));
}

} // namespace spherelab

#endif
