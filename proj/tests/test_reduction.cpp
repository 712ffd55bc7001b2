#include <spherelab/reduction.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace spherelab;

namespace {

const double kLambda0 = std::sqrt(0.75);

AnsatzParams params(double eps, double rho)
{
  AnsatzParams a;
  a.eps = eps;
  a.rho = rho;
  a.lambda0 = kLambda0;
  a.eta = 0.05 * kLambda0;
  return a;
}

RadialOperator config_op(double eps, const PotentialSpec& v, double h = 0.0025)
{
  return RadialOperator(configuration_grid(2, params(eps, 1.0), GridPolicy{h, 40.0}), eps, v, Nonlinearity{3.0, {}});
}

Vec diff(const Vec& a, const Vec& b)
{
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

} // namespace

TEST(Reduction, ProjectedSolveProperties)
{
  auto v = make_sine_potential();
  auto op = config_op(0.4, v);
  auto a = params(0.4, 21.15);
  auto s = solve_projected(op, a);
  ASSERT_TRUE(s.converged);
  EXPECT_LE(s.residual_norm, 1e-10);
  EXPECT_LE(std::abs(s.orthogonality), 1e-12);
  EXPECT_LE(s.newton_iters, 8);
  EXPECT_TRUE(std::isfinite(s.alpha));
  a.gamma = calibrate_gamma(op, a, s);
  EXPECT_TRUE(membership_E(a, op, s.z, s.omega).member);
  EXPECT_LE(op.norm(s.omega), a.gamma * std::pow(0.4, 3) * op.norm(s.z));
}

TEST(Reduction, ModesAgree)
{
  auto v = make_sine_potential();
  auto op = config_op(0.4, v);
  auto a = params(0.4, 21.15);
  auto sn = solve_projected(op, a);
  ProjectedOptions fp;
  fp.mode = ProjectedMode::fixed_point;
  auto sf = solve_projected(op, a, fp);
  ASSERT_TRUE(sn.converged);
  ASSERT_TRUE(sf.converged);
  EXPECT_LE(op.norm(diff(sn.omega, sf.omega)), 1e-8);
  EXPECT_NEAR(sn.alpha, sf.alpha, 1e-8 * (1 + std::abs(sn.alpha)));
  auto q = contraction_ratios(sf);
  ASSERT_GT(q.size(), 2u);
  for (std::size_t k = 1; k + 1 < q.size(); ++k) EXPECT_LT(q[k], 1.0) << k;
}

TEST(Reduction, SingleContractionStepIsLinearizedProjection)
{
  auto v = make_sine_potential();
  auto op = config_op(0.4, v);
  auto a = params(0.4, 21.15);
  const auto& g = op.grid();
  Vec z = build_z(a, v, 3.0, g), zd = build_zdot(a, v, 3.0, g);
  Tridiag H0 = op.hessian(z);
  TridiagLU lu0(H0);
  auto [w, al] = apply_contraction(op, z, zd, lu0, H0, Vec(z.size(), 0.0));
  // J''(z) w = -J'(z) + alpha G zdot and <w, zdot>_r = 0
  Vec hw = H0.apply(w), gz = op.gradient(z), b = op.gram_apply(zd);
  double sc = op.dual_norm(gz);
  Vec res(op.unknowns());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = hw[i] + gz[i] - al * b[i];
  res.push_back(0.0);
  EXPECT_LE(op.dual_norm(res), 1e-9 * sc);
  EXPECT_LE(std::abs(op.inner(w, zd)), 1e-11 * op.norm(w) * op.norm(zd));
  EXPECT_LE(op.norm(w), 10.0 * sc);
  // flipping the sign of zdot flips alpha and leaves w unchanged
  Vec mzd = zd;
  for (double& x : mzd) x = -x;
  auto [w2, al2] = apply_contraction(op, z, mzd, lu0, H0, Vec(z.size(), 0.0));
  EXPECT_NEAR(al2, -al, 1e-12 * std::abs(al));
  EXPECT_LE(op.norm(diff(w, w2)), 1e-12 * op.norm(w));
}

TEST(Reduction, RemainderRatioBoundedZeroPotential)
{
  auto v = make_zero_potential();
  for (double eps : {0.5, 0.4, 0.3}) {
    auto op = config_op(eps, v, 0.005);
    auto om = configuration_set(eps, 0.5, 2.0);
    auto a = params(eps, std::sqrt(om.lo * om.hi));
    auto s = solve_projected(op, a);
    ASSERT_TRUE(s.converged) << eps;
    double ratio = op.norm(s.omega) / (std::pow(eps, 3) * op.norm(s.z));
    EXPECT_LT(ratio, 5.0) << eps;
  }
}

TEST(Reduction, SpectralGapZeroPotential)
{
  auto v = make_zero_potential();
  auto a = params(0.4, 21.15);
  double prev = 0.0;
  for (double h : {0.005, 0.0025}) {
    auto op = config_op(0.4, v, h);
    auto rep = projected_hessian_gap(op, a);
    EXPECT_LT(rep.quad_form_zz, 0.0);
    EXPECT_NEAR(rep.quad_form_zz / rep.quad_form_zz_pred, 1.0, 0.05);
    EXPECT_GE(rep.complement_min, 0.02);
    EXPECT_GE(rep.complement_min, prev - 1e-6);
    EXPECT_GE(rep.projected_min_abs, 0.02);
    prev = rep.complement_min;
  }
}

TEST(Reduction, SpectralGapSine)
{
  auto v = make_sine_potential();
  auto op = config_op(0.4, v);
  auto rep = projected_hessian_gap(op, params(0.4, 21.15));
  EXPECT_GE(rep.complement_min, 0.02);
  EXPECT_NEAR(rep.quad_form_zz / rep.quad_form_zz_pred, 1.0, 0.05);
}

TEST(Reduction, ZeroPotentialScanHasNoSignChange)
{
  auto v = make_zero_potential();
  auto op = config_op(0.4, v, 0.005);
  auto curve = reduced_energy_scan(op, params(0.4, 1.0), 16);
  EXPECT_TRUE(alpha_sign_changes(curve).empty());
  for (std::size_t i = 1; i < curve.rows.size(); ++i) EXPECT_GT(curve.rows[i].psi, curve.rows[i - 1].psi);
  EXPECT_THROW(select_bracket(curve), Error);
}

TEST(Reduction, SineScanFindsCriticalRadius)
{
  auto v = make_sine_potential();
  const double eps = 0.4;
  auto op = config_op(eps, v);
  auto tmpl = params(eps, 1.0);
  auto curve = reduced_energy_scan(op, tmpl, 64);
  auto cr = find_critical_radius(v, 2, 3.0, eps, 0.5 / (eps * eps), 2.0 / (eps * eps), 0.05);
  auto br = select_bracket(curve, cr.t / eps);
  auto om = configuration_set(eps, 0.5, 2.0);
  EXPECT_TRUE(om.contains(br.lo) && om.contains(br.hi));
  auto rs = find_rho_star(op, tmpl, br);
  EXPECT_LE(std::abs(eps * rs.rho - cr.t), 0.1 * cr.t);
  EXPECT_LE(std::abs(rs.solution.alpha), 1e-8 * op.norm(rs.solution.zdot));
  EXPECT_LE(rs.dpsi_rel, 1e-6);
  EXPECT_NEAR(rs.rho, 21.15338792, 1e-4);
}

TEST(Reduction, CriticalRadiusAtSmallerEps)
{
  auto v = make_sine_potential();
  const double eps = 0.3;
  auto op = config_op(eps, v);
  auto cr = find_critical_radius(v, 2, 3.0, eps, 0.5 / (eps * eps), 2.0 / (eps * eps), 0.05);
  auto rs = find_rho_star(op, params(eps, 1.0), Interval{29.3, 30.3});
  EXPECT_LE(std::abs(eps * rs.rho - cr.t), 0.1 * cr.t);
}

TEST(Reduction, RemainderDerivativeSmallAndDecreasing)
{
  auto v = make_sine_potential();
  struct Case { double eps, lo, hi; };
  double prev = 1e300;
  for (auto c : {Case{0.4, 20.65, 21.65}, Case{0.35, 24.17, 25.17}, Case{0.3, 29.3, 30.3}}) {
    auto op = config_op(c.eps, v);
    auto rs = find_rho_star(op, params(c.eps, 1.0), Interval{c.lo, c.hi});
    EXPECT_LE(rs.domega_ratio, 0.2) << c.eps;
    EXPECT_LT(rs.domega_ratio, prev) << c.eps;
    prev = rs.domega_ratio;
  }
}

TEST(Reduction, MatchedDiscrepancyDecreases)
{
  auto v = make_sine_potential();
  const double CE = energy_constant(3.0);
  EXPECT_NEAR(CE, 4.0 / 3.0, 1e-10);
  double prev = 1e300;
  for (double eps : {0.5, 0.45, 0.4, 0.35, 0.3}) {
    auto a = params(eps, 8.0 / eps);
    RadialOperator op(ansatz_grid(2, a, GridPolicy{}), eps, v, Nonlinearity{3.0, {}});
    auto s = solve_projected(op, a);
    ASSERT_TRUE(s.converged);
    double d = matched_discrepancy(op, a.rho, s.psi, CE);
    EXPECT_LT(d, prev) << eps;
    prev = d;
  }
}

TEST(Reduction, BracketSelection)
{
  ScanCurve c;
  for (double r : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) c.rows.push_back({r, 0.0, std::sin(r), 0.0, true});
  // sin changes sign only between 3 and 4 on these samples
  auto all = alpha_sign_changes(c);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].lo, 3.0);
  c.rows.push_back({7.0, 0.0, std::sin(7.0), 0.0, true});
  EXPECT_EQ(alpha_sign_changes(c).size(), 2u);
  EXPECT_EQ(select_bracket(c).lo, 3.0);
  EXPECT_EQ(select_bracket(c, 6.8).lo, 6.0);
  c.rows[3].converged = false;
  EXPECT_EQ(select_bracket(c).lo, 6.0);
}

TEST(Reduction, ScanValidation)
{
  auto op = config_op(0.4, make_sine_potential(), 0.01);
  EXPECT_THROW(reduced_energy_scan(op, params(0.4, 1.0), 4), Error);
}
