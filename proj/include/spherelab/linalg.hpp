#ifndef SPHERELAB_LINALG_HPP
#define SPHERELAB_LINALG_HPP

// Tridiagonal kernels (LAPACK-backed) and a Lanczos eigensolver for the
// pencil W x = mu G x with G symmetric positive definite tridiagonal.

#include <spherelab/error.hpp>

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace spherelab {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b, std::size_t m)
{
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const Vec& a, const Vec& b)
{
  if (a.size() != b.size()) throw Error(ErrorKind::length_mismatch, "dot");
  return dot(a, b, a.size());
}

inline double max_abs(const Vec& a)
{
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// A[i][i] = diag[i], A[i+1][i] = sub[i], A[i][i+1] = sup[i].
struct Tridiag {
  Vec sub, diag, sup;

  Tridiag() = default;
  explicit Tridiag(std::size_t m) : sub(m ? m - 1 : 0), diag(m), sup(m ? m - 1 : 0) {}
  std::size_t size() const { return diag.size(); }

  /// y = A x on the first size() entries; entries beyond are copied as zero.
  Vec apply(const Vec& x) const
  {
    const std::size_t m = size();
    Vec y(x.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += sub[i - 1] * x[i - 1];
      if (i + 1 < m) s += sup[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }
};

/// Cholesky-type LDL^T factorisation of a symmetric positive definite tridiagonal.
class SpdTridiagSolver {
public:
  SpdTridiagSolver() = default;
  explicit SpdTridiagSolver(const Tridiag& a) : d_(a.diag), e_(a.sup)
  {
    lapack_int info = LAPACKE_dpttrf(static_cast<lapack_int>(d_.size()), d_.data(), e_.data());
    if (info != 0)
      throw Error(ErrorKind::hessian_singular, "Gram matrix not positive definite (dpttrf info " +
                                                   std::to_string(info) + ")");
  }

  std::size_t size() const { return d_.size(); }

  /// Solves in place on the first size() entries of b.
  void solve_in_place(Vec& b) const
  {
    lapack_int info = LAPACKE_dpttrs(LAPACK_COL_MAJOR, static_cast<lapack_int>(d_.size()), 1,
                                     d_.data(), e_.data(), b.data(),
                                     static_cast<lapack_int>(d_.size()));
    if (info != 0) throw Error(ErrorKind::hessian_singular, "dpttrs failed");
  }

  Vec solve(Vec b) const
  {
    solve_in_place(b);
    return b;
  }

private:
  Vec d_, e_;
};

/// Solves A X = B for an indefinite tridiagonal A with partial pivoting.
/// B holds `nrhs` columns of length A.size() stored back to back.
inline void solve_tridiag(const Tridiag& a, Vec& b, int nrhs = 1)
{
  Vec dl = a.sub, d = a.diag, du = a.sup;
  const auto m = static_cast<lapack_int>(d.size());
  lapack_int info = LAPACKE_dgtsv(LAPACK_COL_MAJOR, m, nrhs, dl.data(), d.data(), du.data(),
                                  b.data(), m);
  if (info != 0)
    throw Error(ErrorKind::hessian_singular, "tridiagonal solve: exactly singular pivot " +
                                                 std::to_string(info));
}

/// LU factorisation with partial pivoting of an indefinite tridiagonal,
/// reusable for several right-hand sides.
class TridiagLU {
public:
  explicit TridiagLU(const Tridiag& a)
      : dl_(a.sub), d_(a.diag), du_(a.sup), du2_(a.size() > 2 ? a.size() - 2 : 1), ipiv_(a.size())
  {
    const auto m = static_cast<lapack_int>(d_.size());
    lapack_int info = LAPACKE_dgttrf(m, dl_.data(), d_.data(), du_.data(), du2_.data(), ipiv_.data());
    if (info != 0)
      throw Error(ErrorKind::hessian_singular, "tridiagonal factorisation: zero pivot " +
                                                   std::to_string(info));
  }

  /// Solves in place; b holds `nrhs` columns of length size().
  void solve_in_place(Vec& b, int nrhs = 1) const
  {
    const auto m = static_cast<lapack_int>(d_.size());
    lapack_int info = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', m, nrhs, dl_.data(), d_.data(),
                                     du_.data(), du2_.data(), ipiv_.data(), b.data(), m);
    if (info != 0) throw Error(ErrorKind::hessian_singular, "dgttrs failed");
  }

  std::size_t size() const { return d_.size(); }

private:
  Vec dl_, d_, du_, du2_;
  std::vector<lapack_int> ipiv_;
};

struct EigenPairs {
  Vec values;
  std::vector<Vec> vectors;
};

/// k lowest eigenpairs of the symmetric tridiagonal (d, e).
inline EigenPairs sym_tridiag_lowest(Vec d, Vec e, int k)
{
  const auto m = static_cast<lapack_int>(d.size());
  if (k < 1 || k > m) throw Error(ErrorKind::eigensolver_failure, "bad eigenpair count");
  e.resize(d.size(), 0.0);
  lapack_int found = 0;
  Vec w(d.size());
  Vec z(static_cast<std::size_t>(m) * static_cast<std::size_t>(k));
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(k));
  lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', m, d.data(), e.data(), 0.0, 0.0, 1,
                                   k, 0.0, &found, w.data(), z.data(), m, isuppz.data());
  if (info != 0 || found != k)
    throw Error(ErrorKind::eigensolver_failure, "dstevr info " + std::to_string(info));
  EigenPairs out;
  out.values.assign(w.begin(), w.begin() + k);
  for (int j = 0; j < k; ++j)
    out.vectors.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(j) * m,
                             z.begin() + static_cast<std::ptrdiff_t>(j + 1) * m);
  return out;
}

struct PencilSpectrum {
  Vec mu;          // Ritz values, descending
  Vec residual;    // Ritz residual estimates, same order
  int iterations = 0;
  bool converged = false;
};

/// Largest eigenvalues of P G^{-1} W restricted to the G-orthogonal complement
/// of `deflate`. Iterates until every Ritz value above `mu_floor` has residual
/// below `tol`. `mul_w(x)` returns W x.
template <class MulW>
PencilSpectrum pencil_lanczos(const Tridiag& g, const SpdTridiagSolver& gs, MulW mul_w,
                              std::vector<Vec> deflate, double mu_floor, int max_iter = 300,
                              double tol = 1e-10)
{
  const std::size_t m = g.size();
  auto ginner = [&](const Vec& a, const Vec& b) { return dot(a, g.apply(b), m); };

  // G-orthonormal basis of the constraint span.
  std::vector<Vec> cons;
  for (auto& c : deflate) {
    c.resize(m);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cons) {
        double t = ginner(q, c);
        for (std::size_t i = 0; i < m; ++i) c[i] -= t * q[i];
      }
    double nn = std::sqrt(std::max(ginner(c, c), 0.0));
    if (nn > 0.0) {
      for (auto& x : c) x /= nn;
      cons.push_back(std::move(c));
    }
  }

  std::vector<Vec> basis;
  auto orthogonalize = [&](Vec& w) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : cons) {
        double t = ginner(q, w);
        for (std::size_t i = 0; i < m; ++i) w[i] -= t * q[i];
      }
      for (const auto& q : basis) {
        double t = ginner(q, w);
        for (std::size_t i = 0; i < m; ++i) w[i] -= t * q[i];
      }
    }
  };

  Vec v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i));
  v = gs.solve(mul_w(v));
  orthogonalize(v);
  double nv = std::sqrt(std::max(ginner(v, v), 0.0));
  if (!(nv > 0.0)) throw Error(ErrorKind::eigensolver_failure, "degenerate start vector");
  for (auto& x : v) x /= nv;

  Vec alpha, beta;
  PencilSpectrum out;
  int stable = 0;
  std::size_t last_count = 0;
  for (int k = 0; k < max_iter && k < static_cast<int>(m); ++k) {
    basis.push_back(v);
    Vec wv = mul_w(v);
    alpha.push_back(dot(v, wv, m));
    Vec w = gs.solve(std::move(wv));
    orthogonalize(w);
    double b = std::sqrt(std::max(ginner(w, w), 0.0));

    // Ritz values of the current tridiagonal projection.
    const auto kk = static_cast<lapack_int>(alpha.size());
    Vec d = alpha, e(beta.begin(), beta.end());
    e.resize(alpha.size(), 0.0);
    Vec z(static_cast<std::size_t>(kk) * static_cast<std::size_t>(kk));
    lapack_int info = LAPACKE_dstev(LAPACK_COL_MAJOR, 'V', kk, d.data(), e.data(), z.data(), kk);
    if (info != 0) throw Error(ErrorKind::eigensolver_failure, "dstev info " + std::to_string(info));
    out.mu.clear();
    out.residual.clear();
    for (lapack_int j = kk - 1; j >= 0; --j) {
      out.mu.push_back(d[static_cast<std::size_t>(j)]);
      out.residual.push_back(std::abs(b * z[static_cast<std::size_t>(j) * kk + kk - 1]));
    }
    out.iterations = k + 1;

    bool all_ok = true;
    std::size_t count = 0;
    for (std::size_t j = 0; j < out.mu.size(); ++j) {
      if (out.mu[j] < mu_floor) break;
      ++count;
      if (out.residual[j] > tol * std::max(1.0, std::abs(out.mu[j]))) all_ok = false;
    }
    stable = (all_ok && count == last_count) ? stable + 1 : 0;
    last_count = count;
    if (b < 1e-13 || (k >= 10 && stable >= 3)) {
      out.converged = true;
      break;
    }
    beta.push_back(b);
    for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / b;
  }
  if (!out.converged) throw Error(ErrorKind::eigensolver_failure, "Lanczos did not converge");
  return out;
}

} // namespace spherelab

#endif
