#ifndef SPHERELAB_POTENTIAL_HPP
#define SPHERELAB_POTENTIAL_HPP

// Radial potential families V(r), the effective potential
// M_eps(r) = eps^{2(n-2)} r^{n-1} (1 + eps^2 V(r))^{(p+3)/(2(p-1))}
// and location of its nondegenerate critical radius.

#include <spherelab/error.hpp>
#include <spherelab/linalg.hpp>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace spherelab {

enum class PotentialFamily { zero, sine, cosine_scaled, polynomial_bounded, tabulated };

inline const char* to_string(PotentialFamily f)
{
  switch (f) {
    case PotentialFamily::zero: return "zero";
    case PotentialFamily::sine: return "sine";
    case PotentialFamily::cosine_scaled: return "cosine-scaled";
    case PotentialFamily::polynomial_bounded: return "polynomial-bounded";
    case PotentialFamily::tabulated: return "tabulated";
  }
  return "?";
}

inline PotentialFamily parse_family(const std::string& s)
{
  if (s == "zero") return PotentialFamily::zero;
  if (s == "sine") return PotentialFamily::sine;
  if (s == "cosine-scaled") return PotentialFamily::cosine_scaled;
  if (s == "polynomial-bounded") return PotentialFamily::polynomial_bounded;
  if (s == "tabulated") return PotentialFamily::tabulated;
  throw Error(ErrorKind::config_invalid, "unknown potential family '" + s + "'");
}

namespace detail {
struct Spline {
  gsl_interp_accel* acc = nullptr;
  gsl_spline* sp = nullptr;
  double r0 = 0, r1 = 0, v0 = 0, v1 = 0;
  Spline(const Vec& r, const Vec& v)
  {
    gsl_set_error_handler_off();
    sp = gsl_spline_alloc(gsl_interp_cspline, r.size());
    acc = gsl_interp_accel_alloc();
    if (gsl_spline_init(sp, r.data(), v.data(), r.size()) != 0) {
      release();
      throw Error(ErrorKind::config_invalid, "tabulated potential: nodes must increase");
    }
    r0 = r.front(); r1 = r.back(); v0 = v.front(); v1 = v.back();
  }
  Spline(const Spline&) = delete;
  Spline& operator=(const Spline&) = delete;
  ~Spline() { release(); }
  void release()
  {
    if (sp) gsl_spline_free(sp);
    if (acc) gsl_interp_accel_free(acc);
    sp = nullptr; acc = nullptr;
  }
  // gsl accelerators cache state; evaluate without one so the object is
  // safe to share between threads.
  double value(double r) const
  {
    if (r <= r0) return v0;
    if (r >= r1) return v1;
    return gsl_spline_eval(sp, r, nullptr);
  }
  double deriv(double r) const
  {
    if (r <= r0 || r >= r1) return 0.0;
    return gsl_spline_eval_deriv(sp, r, nullptr);
  }
};

inline double poly(const Vec& c, double r)
{
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) s = s * r + c[k];
  return s;
}
inline double poly_d(const Vec& c, double r)
{
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) s = s * r + static_cast<double>(k) * c[k];
  return s;
}
inline double poly_dd(const Vec& c, double r)
{
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 2;) s = s * r + static_cast<double>(k * (k - 1)) * c[k];
  return s;
}
} // namespace detail

/// A radial potential family with parameters and boundedness witnesses.
///   sine:               A sin(k r)
///   cosine-scaled:      A cos(k r)
///   polynomial-bounded: N(r) / D(r), D = 1 + sum_{k>=1} d_k r^k with d_k >= 0, deg N <= deg D
///   tabulated:          natural cubic spline through (r_i, v_i), constant outside
struct PotentialSpec {
  PotentialFamily family = PotentialFamily::zero;
  double amplitude = 1.0;
  double frequency = 1.0;
  Vec numerator, denominator;
  Vec table_r, table_v;
  double bound_V = 0.0;
  double bound_Vp = 0.0;
  std::shared_ptr<const detail::Spline> spline;

  double V(double r) const
  {
    switch (family) {
      case PotentialFamily::zero: return 0.0;
      case PotentialFamily::sine: return amplitude * std::sin(frequency * r);
      case PotentialFamily::cosine_scaled: return amplitude * std::cos(frequency * r);
      case PotentialFamily::polynomial_bounded:
        return detail::poly(numerator, r) / detail::poly(denominator, r);
      case PotentialFamily::tabulated: return spline->value(r);
    }
    return 0.0;
  }

  double Vp(double r) const
  {
    switch (family) {
      case PotentialFamily::zero: return 0.0;
      case PotentialFamily::sine: return amplitude * frequency * std::cos(frequency * r);
      case PotentialFamily::cosine_scaled: return -amplitude * frequency * std::sin(frequency * r);
      case PotentialFamily::polynomial_bounded: {
        double nn = detail::poly(numerator, r), d = detail::poly(denominator, r);
        return (detail::poly_d(numerator, r) * d - nn * detail::poly_d(denominator, r)) / (d * d);
      }
      case PotentialFamily::tabulated: return spline->deriv(r);
    }
    return 0.0;
  }

  bool has_analytic_Vpp() const { return family != PotentialFamily::tabulated; }

  double Vpp(double r) const
  {
    switch (family) {
      case PotentialFamily::zero: return 0.0;
      case PotentialFamily::sine: return -amplitude * frequency * frequency * std::sin(frequency * r);
      case PotentialFamily::cosine_scaled:
        return -amplitude * frequency * frequency * std::cos(frequency * r);
      case PotentialFamily::polynomial_bounded: {
        const double n0 = detail::poly(numerator, r), n1 = detail::poly_d(numerator, r),
                     n2 = detail::poly_dd(numerator, r);
        const double d0 = detail::poly(denominator, r), d1 = detail::poly_d(denominator, r),
                     d2 = detail::poly_dd(denominator, r);
        return (n2 * d0 - n0 * d2) / (d0 * d0) - 2.0 * d1 * (n1 * d0 - n0 * d1) / (d0 * d0 * d0);
      }
      case PotentialFamily::tabulated: {
        double hr = 1e-6 * std::max(1.0, std::abs(r));
        return (Vp(r + hr) - Vp(r - hr)) / (2.0 * hr);
      }
    }
    return 0.0;
  }
};

inline PotentialSpec make_zero_potential()
{
  return PotentialSpec{};
}

inline PotentialSpec make_sine_potential(double amplitude = 1.0, double frequency = 1.0)
{
  PotentialSpec s;
  s.family = PotentialFamily::sine;
  s.amplitude = amplitude;
  s.frequency = frequency;
  s.bound_V = std::abs(amplitude);
  s.bound_Vp = std::abs(amplitude * frequency);
  return s;
}

inline PotentialSpec make_cosine_potential(double amplitude = 1.0, double frequency = 1.0)
{
  PotentialSpec s = make_sine_potential(amplitude, frequency);
  s.family = PotentialFamily::cosine_scaled;
  return s;
}

namespace detail {
// sup over a dense sample of [0, r_max] together with the value at infinity
template <class F>
double sampled_sup(F&& f, double r_max, double at_infinity)
{
  double m = std::abs(at_infinity);
  const int samples = 200000;
  for (int i = 0; i <= samples; ++i) m = std::max(m, std::abs(f(r_max * i / samples)));
  return m;
}
} // namespace detail

inline PotentialSpec make_rational_potential(Vec numerator, Vec denominator)
{
  if (denominator.empty() || denominator[0] != 1.0)
    throw Error(ErrorKind::config_invalid, "polynomial-bounded: denominator must start with 1");
  for (std::size_t k = 1; k < denominator.size(); ++k)
    if (denominator[k] < 0.0)
      throw Error(ErrorKind::config_invalid, "polynomial-bounded: denominator coefficients must be >= 0");
  while (denominator.size() > 1 && denominator.back() == 0.0) denominator.pop_back();
  while (numerator.size() > 1 && numerator.back() == 0.0) numerator.pop_back();
  if (numerator.empty()) numerator.push_back(0.0);
  if (numerator.size() > denominator.size())
    throw Error(ErrorKind::config_invalid, "polynomial-bounded: numerator degree exceeds denominator");
  PotentialSpec s;
  s.family = PotentialFamily::polynomial_bounded;
  s.numerator = std::move(numerator);
  s.denominator = std::move(denominator);
  const double at_inf = s.numerator.size() == s.denominator.size()
                            ? s.numerator.back() / s.denominator.back()
                            : 0.0;
  const double r_max = 1e3;
  s.bound_V = detail::sampled_sup([&](double r) { return s.V(r); }, r_max, at_inf);
  s.bound_Vp = detail::sampled_sup([&](double r) { return s.Vp(r); }, r_max, 0.0);
  return s;
}

inline PotentialSpec make_constant_potential(double c)
{
  return make_rational_potential({c}, {1.0});
}

inline PotentialSpec make_tabulated_potential(Vec r, Vec v)
{
  if (r.size() != v.size()) throw Error(ErrorKind::length_mismatch, "tabulated potential");
  if (r.size() < 3) throw Error(ErrorKind::config_invalid, "tabulated potential needs >= 3 nodes");
  PotentialSpec s;
  s.family = PotentialFamily::tabulated;
  s.spline = std::make_shared<detail::Spline>(r, v);
  s.table_r = std::move(r);
  s.table_v = std::move(v);
  const double span = s.table_r.back() - s.table_r.front();
  double mv = 0.0, mp = 0.0;
  const int samples = 100000;
  for (int i = 0; i <= samples; ++i) {
    double x = s.table_r.front() + span * i / samples;
    mv = std::max(mv, std::abs(s.V(x)));
    mp = std::max(mp, std::abs(s.Vp(x)));
  }
  s.bound_V = mv;
  s.bound_Vp = mp;
  return s;
}

/// Largest eps for which 1 + eps^2 V >= lambda0^2 is guaranteed by bound_V.
inline double ellipticity_lambda0(const PotentialSpec& v, double eps_max)
{
  double f = 1.0 - eps_max * eps_max * v.bound_V;
  if (!(f > 0.0)) throw Error(ErrorKind::ellipticity_violation, "1 + eps^2 V not bounded below");
  return std::sqrt(f);
}

struct EffectivePotentialPoint {
  double r = 0, M = 0, Mp = 0, Mpp = 0;
};

inline EffectivePotentialPoint eval_M(const PotentialSpec& v, int n, double p, double eps, double r)
{
  if (!(r > 0.0)) throw Error(ErrorKind::config_invalid, "eval_M requires r > 0");
  const double k = (p + 3.0) / (2.0 * (p - 1.0));
  const double e2 = eps * eps;
  const double pre = std::pow(eps, 2.0 * (n - 2));
  auto base = [&](double x) {
    double b = 1.0 + e2 * v.V(x);
    if (!(b > 0.0)) throw Error(ErrorKind::ellipticity_violation, "1 + eps^2 V(r) <= 0");
    return b;
  };
  auto M = [&](double x) { return pre * std::pow(x, n - 1) * std::pow(base(x), k); };
  auto Mp = [&](double x) {
    double b = base(x);
    return pre * ((n - 1) * std::pow(x, n - 2) * std::pow(b, k) +
                  std::pow(x, n - 1) * k * std::pow(b, k - 1.0) * e2 * v.Vp(x));
  };
  EffectivePotentialPoint pt;
  pt.r = r;
  pt.M = M(r);
  pt.Mp = Mp(r);
  if (v.has_analytic_Vpp()) {
    const double b = base(r), vp = v.Vp(r), vpp = v.Vpp(r);
    const double bk = std::pow(b, k);
    pt.Mpp = pre * ((n - 1) * (n - 2) * std::pow(r, n - 3) * bk +
                    2.0 * (n - 1) * std::pow(r, n - 2) * k * std::pow(b, k - 1.0) * e2 * vp +
                    std::pow(r, n - 1) * (k * (k - 1.0) * std::pow(b, k - 2.0) * e2 * e2 * vp * vp +
                                          k * std::pow(b, k - 1.0) * e2 * vpp));
  } else {
    const double hr = 1e-6 * std::max(1.0, r);
    pt.Mpp = (Mp(r + hr) - Mp(r - hr)) / (2.0 * hr);
  }
  return pt;
}

/// Central finite-difference M' (used for the analytic cross-check).
inline double eval_Mp_fd(const PotentialSpec& v, int n, double p, double eps, double r)
{
  const double hr = 1e-6 * std::max(1.0, r);
  return (eval_M(v, n, p, eps, r + hr).M - eval_M(v, n, p, eps, r - hr).M) / (2.0 * hr);
}

struct CriticalRadius {
  double t = 0.0;
  EffectivePotentialPoint point;
  std::vector<double> all_roots;  // every sign change found on the scan, polished
};

inline double polish_root(const PotentialSpec& v, int n, double p, double eps, double a, double b)
{
  double fa = eval_M(v, n, p, eps, a).Mp;
  for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
    double m = 0.5 * (a + b);
    double fm = eval_M(v, n, p, eps, m).Mp;
    if ((fm > 0) == (fa > 0)) { a = m; fa = fm; }
    else b = m;
  }
  double t = 0.5 * (a + b);
  for (int it = 0; it < 8; ++it) {
    auto pt = eval_M(v, n, p, eps, t);
    if (pt.Mpp == 0.0) break;
    double step = pt.Mp / pt.Mpp;
    if (std::abs(pt.Mp) <= 1e-12 * std::abs(pt.Mpp) * t) break;
    double tn = t - step;
    if (tn < a - (b - a) || tn > b + (b - a)) break;
    t = tn;
  }
  return t;
}

inline CriticalRadius find_critical_radius(const PotentialSpec& v, int n, double p, double eps,
                                           double r_lo, double r_hi, double beta_floor,
                                           int scan_points = 10000)
{
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) throw Error(ErrorKind::config_invalid, "bad bracket");
  CriticalRadius out;
  double prev_r = r_lo, prev = eval_M(v, n, p, eps, r_lo).Mp;
  for (int i = 1; i <= scan_points; ++i) {
    double r = r_lo + (r_hi - r_lo) * i / scan_points;
    double cur = eval_M(v, n, p, eps, r).Mp;
    if (cur == 0.0 || (cur > 0) != (prev > 0)) out.all_roots.push_back(polish_root(v, n, p, eps, prev_r, r));
    prev = cur;
    prev_r = r;
  }
  if (out.all_roots.empty())
    throw Error(ErrorKind::no_critical_point, "M' has constant sign on the bracket");
  out.t = out.all_roots.front();
  out.point = eval_M(v, n, p, eps, out.t);
  if (std::abs(out.point.Mpp) < beta_floor)
    throw Error(ErrorKind::degenerate_critical_point,
                "|M''(t)| = " + std::to_string(std::abs(out.point.Mpp)) + " below floor");
  return out;
}

/// M' = 0 rewritten as 2(n-1) b^k + ((p+3)/(p-1)) b^{2/(p-1)-1/2} eps^2 t V'(t); returns
/// the value relative to the first term.
inline double critical_identity_defect(const PotentialSpec& v, int n, double p, double eps, double t)
{
  const double b = 1.0 + eps * eps * v.V(t);
  const double k = (p + 3.0) / (2.0 * (p - 1.0));
  const double first = 2.0 * (n - 1) * std::pow(b, k);
  const double second =
      (p + 3.0) / (p - 1.0) * std::pow(b, 2.0 / (p - 1.0) - 0.5) * eps * eps * t * v.Vp(t);
  return (first + second) / first;
}

} // namespace spherelab

#endif
