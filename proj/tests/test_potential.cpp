#include <spherelab/potential.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace spherelab;

TEST(Potential, FamilyNamesRoundTrip)
{
  for (auto f : {PotentialFamily::zero, PotentialFamily::sine, PotentialFamily::cosine_scaled,
                 PotentialFamily::polynomial_bounded, PotentialFamily::tabulated})
    EXPECT_EQ(parse_family(to_string(f)), f);
  EXPECT_THROW(parse_family("gaussian"), Error);
}

TEST(Potential, ZeroPotentialTwoDimensions)
{
  auto pt = eval_M(make_zero_potential(), 2, 3.0, 0.3, 5.0);
  EXPECT_DOUBLE_EQ(pt.M, 5.0);
  EXPECT_DOUBLE_EQ(pt.Mp, 1.0);
  EXPECT_DOUBLE_EQ(pt.Mpp, 0.0);
}

TEST(Potential, ZeroPotentialThreeDimensions)
{
  EXPECT_NEAR(eval_M(make_zero_potential(), 3, 3.0, 0.5, 2.0).M, 1.0, 1e-15);
}

TEST(Potential, SineDirectEvaluation)
{
  auto pt = eval_M(make_sine_potential(), 2, 3.0, 0.3, 10.0);
  EXPECT_NEAR(pt.M, 9.274635994096748, 1e-12);
}

TEST(Potential, AnalyticDerivativesMatchFiniteDifferences)
{
  auto v = make_sine_potential(1.0, 1.0);
  for (int n : {2, 3})
    for (double r = 1.0; r < 60.0; r += 0.37) {
      auto pt = eval_M(v, n, 3.0, 0.3, r);
      EXPECT_LE(std::abs(pt.Mp - eval_Mp_fd(v, n, 3.0, 0.3, r)), 1e-6 * (1.0 + std::abs(pt.Mp))) << r;
      double h = 1e-5 * r;
      double fd2 = (eval_M(v, n, 3.0, 0.3, r + h).Mp - eval_M(v, n, 3.0, 0.3, r - h).Mp) / (2 * h);
      EXPECT_LE(std::abs(pt.Mpp - fd2), 1e-5 * (1.0 + std::abs(pt.Mpp))) << r;
    }
}

TEST(Potential, RationalDerivatives)
{
  auto v = make_rational_potential({0.5, -1.0, 0.3}, {1.0, 0.0, 2.0});
  for (double r : {0.0, 0.4, 1.3, 7.0}) {
    double h = 1e-5;
    double lo = std::max(r - h, 0.0);
    EXPECT_NEAR(v.Vp(r), (v.V(r + h) - v.V(lo)) / (r + h - lo), 1e-5);
    EXPECT_NEAR(v.Vpp(r), (v.Vp(r + h) - v.Vp(lo)) / (r + h - lo), 1e-4);
  }
  EXPECT_GE(v.bound_V, 0.5);
  EXPECT_GE(v.bound_V, 0.15);
}

TEST(Potential, RationalValidation)
{
  EXPECT_THROW(make_rational_potential({1.0}, {2.0}), Error);
  EXPECT_THROW(make_rational_potential({1.0}, {1.0, -1.0}), Error);
  EXPECT_THROW(make_rational_potential({1.0, 1.0, 1.0}, {1.0, 1.0}), Error);
}

TEST(Potential, TabulatedSplineReproducesNodes)
{
  Vec r, y;
  for (int i = 0; i <= 40; ++i) { r.push_back(0.5 * i); y.push_back(std::sin(0.5 * i)); }
  auto v = make_tabulated_potential(r, y);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(v.V(r[i]), y[i], 1e-14);
  EXPECT_NEAR(v.V(5.25), std::sin(5.25), 2e-3);
  EXPECT_DOUBLE_EQ(v.V(100.0), v.V(20.0));
  EXPECT_DOUBLE_EQ(v.Vp(100.0), 0.0);
  EXPECT_THROW(make_tabulated_potential({0.0, 1.0}, {0.0, 1.0}), Error);
  EXPECT_THROW(make_tabulated_potential({0.0, 1.0, 2.0}, {0.0, 1.0}), Error);
}

TEST(Potential, EllipticityFloor)
{
  EXPECT_NEAR(ellipticity_lambda0(make_sine_potential(), 0.5), std::sqrt(0.75), 1e-15);
  EXPECT_THROW(ellipticity_lambda0(make_sine_potential(5.0), 0.5), Error);
}

TEST(Potential, ZeroPotentialHasNoCriticalPoint)
{
  try {
    find_critical_radius(make_zero_potential(), 2, 3.0, 0.3, 5.0, 20.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_critical_point);
  }
}

TEST(Potential, ConstantPotentialHasNoCriticalPoint)
{
  for (double c : {-0.5, 0.0, 2.0})
    for (int n : {2, 3}) {
      try {
        find_critical_radius(make_constant_potential(c), n, 3.0, 0.3, 1.0, 100.0, 0.0);
        FAIL();
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::no_critical_point);
      }
    }
}

TEST(Potential, SineCriticalRadiusSmallBracket)
{
  auto cr = find_critical_radius(make_sine_potential(), 2, 3.0, 0.3, 8.0, 11.0, 0.05);
  // smallest root of 1 + 0.09 sin r + 0.135 r cos r on [8, 11]
  EXPECT_NEAR(cr.t, 8.90664048713109, 1e-10);
  ASSERT_EQ(cr.all_roots.size(), 2u);
  EXPECT_NEAR(cr.all_roots[1], 10.25559207664824, 1e-10);
  EXPECT_GE(std::abs(cr.point.Mpp), 0.05);
  EXPECT_LE(std::abs(cr.point.Mp), 1e-12 * std::abs(cr.point.Mpp) * cr.t * 10);
}

TEST(Potential, SineCriticalRadiusDefaultBracket)
{
  const double eps = 0.25;
  auto cr = find_critical_radius(make_sine_potential(), 2, 3.0, eps, 0.5 / (eps * eps), 2.0 / (eps * eps), 0.05);
  EXPECT_GE(cr.t, 8.0);
  EXPECT_LE(cr.t, 32.0);
  for (double t : cr.all_roots) EXPECT_LE(std::abs(critical_identity_defect(make_sine_potential(), 2, 3.0, eps, t)), 1e-8);
}

TEST(Potential, IdentityDefectOtherExponents)
{
  for (double p : {2.0, 5.0})
    for (int n : {2, 3}) {
      auto cr = find_critical_radius(make_sine_potential(), n, p, 0.3, 5.0, 40.0, 0.0);
      EXPECT_LE(std::abs(critical_identity_defect(make_sine_potential(), n, p, 0.3, cr.t)), 1e-8) << p << n;
    }
}

TEST(Potential, DegenerateFloorRejects)
{
  try {
    find_critical_radius(make_sine_potential(), 2, 3.0, 0.3, 8.0, 11.0, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_critical_point);
  }
}

TEST(Potential, BadInputs)
{
  EXPECT_THROW(eval_M(make_sine_potential(), 2, 3.0, 0.3, 0.0), Error);
  EXPECT_THROW(find_critical_radius(make_sine_potential(), 2, 3.0, 0.3, 5.0, 4.0, 0.0), Error);
  EXPECT_THROW(eval_M(make_sine_potential(400.0), 2, 3.0, 0.3, 4.7), Error);
}
