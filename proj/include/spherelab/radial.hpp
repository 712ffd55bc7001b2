#ifndef SPHERELAB_RADIAL_HPP
#define SPHERELAB_RADIAL_HPP

// Uniform radial grid, weighted quadrature and the variational finite-volume
// discretisation of J(u) = 1/2 int s^{n-1}(|u'|^2 + c u^2) - int s^{n-1} F(u),
// c(s) = 1 + eps^2 V(eps s).

#include <spherelab/error.hpp>
#include <spherelab/linalg.hpp>
#include <spherelab/potential.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace spherelab {

struct RadialGrid {
  int n = 2;
  double s_min = 0.0;
  double h = 0.01;
  std::size_t N = 0;  // nodes 0..N

  double node(std::size_t i) const { return s_min + h * static_cast<double>(i); }
  double s_max() const { return node(N); }
  std::size_t size() const { return N + 1; }
};

/// Grid on [s_min, s_max]; s_max is rounded up to a whole number of cells.
inline RadialGrid make_grid(int n, double s_max, double h, double s_min = 0.0)
{
  if (n < 2) throw Error(ErrorKind::config_invalid, "dimension n must be at least 2");
  if (!(h > 0.0) || !(s_max > s_min) || s_min < 0.0)
    throw Error(ErrorKind::config_invalid, "bad grid extent");
  double cells = (s_max - s_min) / h;
  double rounded = std::round(cells);
  std::size_t N = static_cast<std::size_t>(std::abs(cells - rounded) < 1e-9 * std::max(1.0, cells)
                                               ? rounded
                                               : std::ceil(cells));
  if (N < 2) N = 2;
  return {n, s_min, h, N};
}

/// Composite Simpson for int s^{n-1} f(s) ds over the grid (3/8 rule on the
/// last three cells when the cell count is odd).
inline double quadrature(const RadialGrid& g, const Vec& f)
{
  if (f.size() != g.size()) throw Error(ErrorKind::length_mismatch, "quadrature");
  auto y = [&](std::size_t i) { return std::pow(g.node(i), g.n - 1) * f[i]; };
  const std::size_t N = g.N;
  double total = 0.0;
  std::size_t even = (N % 2 == 0) ? N : N - 3;
  if (N == 1) return 0.5 * g.h * (y(0) + y(1));
  if (even >= 2) {
    double s = y(0) + y(even);
    for (std::size_t i = 1; i < even; ++i) s += (i % 2 ? 4.0 : 2.0) * y(i);
    total += s * g.h / 3.0;
  }
  if (even != N) total += 3.0 * g.h / 8.0 * (y(N - 3) + 3.0 * y(N - 2) + 3.0 * y(N - 1) + y(N));
  return total;
}

/// Nonlinearity f(u) = |u|^{p-1} u, optionally capped: on K <= |u| <= K+1 a
/// cubic Hermite blend down to zero (C^1 force, C^2 primitive), zero beyond.
struct Nonlinearity {
  double p = 3.0;
  std::optional<double> K;

  double pow_abs(double a, double e) const
  {
    double r = std::round(e);
    if (r == e && e >= 0.0 && e <= 16.0) {
      double out = 1.0;
      for (int k = 0; k < static_cast<int>(r); ++k) out *= a;
      return out;
    }
    return std::pow(a, e);
  }

  double f(double u) const
  {
    double a = std::abs(u), sg = u < 0.0 ? -1.0 : 1.0;
    if (!K || a <= *K) return pow_abs(a, p - 1.0) * u;
    double k = *K, t = a - k;
    if (t >= 1.0) return 0.0;
    double h00 = 2 * t * t * t - 3 * t * t + 1, h10 = t * (1 - t) * (1 - t);
    return sg * (pow_abs(k, p) * h00 + p * pow_abs(k, p - 1.0) * h10);
  }

  double df(double u) const
  {
    double a = std::abs(u);
    if (!K || a <= *K) return p * pow_abs(a, p - 1.0);
    double k = *K, t = a - k;
    if (t >= 1.0) return 0.0;
    double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1;
    return pow_abs(k, p) * d00 + p * pow_abs(k, p - 1.0) * d10;
  }

  /// F(u) = int_0^u f
  double F(double u) const
  {
    double a = std::abs(u);
    if (!K || a <= *K) return pow_abs(a, p + 1.0) / (p + 1.0);
    double k = *K, t = std::min(a - k, 1.0);
    double i00 = 0.5 * t * t * t * t - t * t * t + t;
    double i10 = 0.25 * t * t * t * t - 2.0 / 3.0 * t * t * t + 0.5 * t * t;
    return pow_abs(k, p + 1.0) / (p + 1.0) + pow_abs(k, p) * i00 + p * pow_abs(k, p - 1.0) * i10;
  }

  /// Y_K(u) = (p+1) F(u); equals |u|^{p+1} for |u| <= K.
  double Y(double u) const { return (p + 1.0) * F(u); }
};

/// Discrete operators on a radial grid for fixed (eps, V, p). Unknowns are
/// nodes 0..N-1; u_N = 0 (Dirichlet). Grid functions carry all N+1 entries.
///
/// Stiffness weights w_{i+1/2} = s_{i+1/2}^{n-1}, mass weights
/// q_i = int over the dual cell of s^{n-1}. The Gram matrix of (.,.)_r is
/// G = D^T diag(w/h) D + diag(q c); the gradient of J is G u - q f(u).
class RadialOperator {
public:
  RadialOperator(RadialGrid grid, double eps, PotentialSpec potential, Nonlinearity nl,
                 bool origin_dirichlet = false)
      : grid_(grid), eps_(eps), pot_(std::move(potential)), nl_(nl), origin_dirichlet_(origin_dirichlet)
  {
    const std::size_t N = grid_.N;
    const double h = grid_.h;
    const int n = grid_.n;
    w_.resize(N);
    q_.resize(N + 1);
    c_.resize(N + 1);
    for (std::size_t i = 0; i < N; ++i) w_[i] = std::pow(grid_.s_min + h * (i + 0.5), n - 1);
    for (std::size_t i = 0; i <= N; ++i) {
      double s = grid_.node(i);
      double hi = std::min(s + 0.5 * h, grid_.s_max()), lo = std::max(s - 0.5 * h, grid_.s_min);
      q_[i] = (std::pow(hi, n) - std::pow(lo, n)) / n;
      c_[i] = 1.0 + eps * eps * pot_.V(eps * s);
      if (!(c_[i] > 0.0)) throw Error(ErrorKind::ellipticity_violation, "1 + eps^2 V(eps s) <= 0");
    }
    gram_ = build_gram(true);
    gram0_ = build_gram(false);
    gram_solver_ = SpdTridiagSolver(gram_);
  }

  const RadialGrid& grid() const { return grid_; }
  double eps() const { return eps_; }
  double p() const { return nl_.p; }
  const PotentialSpec& potential() const { return pot_; }
  const Nonlinearity& nonlinearity() const { return nl_; }
  bool origin_dirichlet() const { return origin_dirichlet_; }
  std::size_t unknowns() const { return grid_.N; }
  const Vec& mass_weights() const { return q_; }
  const Vec& coefficient() const { return c_; }

  /// Gram matrix of (.,.)_r on the unknowns.
  const Tridiag& gram() const { return gram_; }
  const SpdTridiagSolver& gram_solver() const { return gram_solver_; }

  Vec gram_apply(const Vec& u) const
  {
    check(u);
    Vec y = gram_.apply(u);
    y.resize(grid_.size(), 0.0);
    y[grid_.N] = 0.0;
    return y;
  }

  /// u^T G v summed edge by edge, so inner(u, v) == inner(v, u) bit for bit.
  double inner(const Vec& u, const Vec& v) const
  {
    check(u);
    check(v);
    const std::size_t N = grid_.N;
    const double h = grid_.h;
    double total = 0.0;
    std::size_t first = 0;
    if (origin_dirichlet_) {
      total += u[0] * v[0] + w_[0] / h * (u[1] * v[1]);
      first = 1;
    }
    for (std::size_t i = first; i < N; ++i) {
      double du = i + 1 < N ? u[i + 1] - u[i] : -u[i];
      double dv = i + 1 < N ? v[i + 1] - v[i] : -v[i];
      total += w_[i] / h * (du * dv) + q_[i] * c_[i] * (u[i] * v[i]);
    }
    return total;
  }
  double norm(const Vec& u) const { return std::sqrt(std::max(inner(u, u), 0.0)); }

  /// Unrescaled norm ||u||_eps^2 = int r^{n-1}(eps^2 |u_r|^2 + u^2) dr = eps^n int s^{n-1}(|u_s|^2 + u^2) ds.
  double eps_norm(const Vec& u) const
  {
    check(u);
    return std::sqrt(std::pow(eps_, grid_.n) * dot(u, gram0_.apply(u), grid_.N));
  }

  /// Riesz representative G^{-1} g of a dual vector.
  Vec riesz(const Vec& g) const
  {
    check(g);
    Vec x(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(grid_.N));
    gram_solver_.solve_in_place(x);
    x.push_back(0.0);
    return x;
  }
  double dual_norm(const Vec& g) const { return std::sqrt(std::max(dot(g, riesz(g), grid_.N), 0.0)); }

  double energy(const Vec& u) const
  {
    check(u);
    double quad = 0.5 * dot(u, gram_free(u), grid_.N);
    double nl = 0.0;
    for (std::size_t i = 0; i < grid_.N; ++i) nl += q_[i] * nl_.F(u[i]);
    return quad - nl;
  }

  /// Discrete first variation <J'(u), .> as a dual vector (last entry 0).
  Vec gradient(const Vec& u) const
  {
    Vec g = gram_free(u);
    for (std::size_t i = 0; i < grid_.N; ++i) g[i] -= q_[i] * nl_.f(u[i]);
    if (origin_dirichlet_) g[0] = u[0];
    return g;
  }

  /// J''(u) on the unknowns.
  Tridiag hessian(const Vec& u) const
  {
    check(u);
    Tridiag H = gram_;
    for (std::size_t i = 0; i < grid_.N; ++i) H.diag[i] -= q_[i] * nl_.df(u[i]);
    if (origin_dirichlet_) H.diag[0] = 1.0;
    return H;
  }

  /// Pointwise residual of -u'' - (n-1)/s u' + c u - f(u) in conservative
  /// form; the origin row is the mirror-node limit -n u''(0); the last row
  /// carries u(s_max) = 0.
  Vec residual_full(const Vec& u) const
  {
    Vec g = gradient(u);
    Vec r(grid_.size());
    for (std::size_t i = 0; i < grid_.N; ++i) r[i] = g[i] / q_[i];
    if (origin_dirichlet_) r[0] = u[0];
    r[grid_.N] = u[grid_.N];
    return r;
  }


private:
  void check(const Vec& u) const
  {
    if (u.size() != grid_.size())
      throw Error(ErrorKind::length_mismatch,
                  "grid function has " + std::to_string(u.size()) + " entries, grid " +
                      std::to_string(grid_.size()));
  }

  Tridiag build_gram(bool with_potential) const
  {
    const std::size_t N = grid_.N;
    const double h = grid_.h;
    Tridiag G(N);
    for (std::size_t i = 0; i < N; ++i) {
      double d = w_[i] / h + (i > 0 ? w_[i - 1] / h : 0.0);
      d += q_[i] * (with_potential ? c_[i] : 1.0);
      G.diag[i] = d;
      if (i + 1 < N) G.sup[i] = G.sub[i] = -w_[i] / h;
    }
    if (origin_dirichlet_ && N > 1) {
      G.diag[0] = 1.0;
      G.sup[0] = G.sub[0] = 0.0;
    }
    return G;
  }

  // G u without the origin-row modification (value of the quadratic form).
  Vec gram_free(const Vec& u) const
  {
    check(u);
    const std::size_t N = grid_.N;
    const double h = grid_.h;
    Vec y(grid_.size(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      double flux = w_[i] * (u[i + 1] - u[i]) / h;
      y[i] -= flux;
      if (i + 1 < N) y[i + 1] += flux;
    }
    for (std::size_t i = 0; i < N; ++i) y[i] += q_[i] * c_[i] * u[i];
    return y;
  }

  RadialGrid grid_;
  double eps_;
  PotentialSpec pot_;
  Nonlinearity nl_;
  bool origin_dirichlet_;
  Vec w_, q_, c_;
  Tridiag gram_, gram0_;
  SpdTridiagSolver gram_solver_;
};

inline double weighted_h1_inner(const RadialOperator& op, const Vec& u, const Vec& v)
{
  return op.inner(u, v);
}

inline double energy_J(const RadialOperator& op, const Vec& u) { return op.energy(u); }

inline Vec residual_full(const RadialOperator& op, const Vec& u) { return op.residual_full(u); }

/// Samples f at the grid nodes.
template <class F>
Vec sample(const RadialGrid& g, F&& f)
{
  Vec out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.node(i));
  return out;
}

} // namespace spherelab

#endif
