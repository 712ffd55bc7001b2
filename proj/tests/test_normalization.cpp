#include <spherelab/normalization.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace spherelab;

namespace {

ProblemSetup sine_setup()
{
  ProblemSetup s;
  s.lambda0 = std::sqrt(0.75);
  s.eta = 0.05 * s.lambda0;
  return s;
}

struct Member {
  FullSolution sol;
  NormalizedRecord rec;
};

Member solve_member(const ProblemSetup& s, double eps, double rho_guess, double half_width = 0.5)
{
  auto op = s.configuration_operator(eps);
  auto rs = find_rho_star(op, s.ansatz(eps), Interval{rho_guess - half_width, rho_guess + half_width}, s.projected);
  Vec seed(rs.solution.z.size());
  for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = rs.solution.z[i] + rs.solution.omega[i];
  auto sol = solve_full(op, seed, s.full);
  return {sol, to_original(op, sol, mass_to_a(sol, s.n, s.p), s.C1, s.C2)};
}

// members solved once and shared across tests
const std::map<double, Member>& members()
{
  static const std::map<double, Member> m = [] {
    auto s = sine_setup();
    std::map<double, Member> out;
    for (auto [eps, rho] : std::vector<std::pair<double, double>>{
             {0.4, 21.1534}, {0.35, 24.671}, {0.3, 29.8156}, {0.25, 59.972}, {0.2, 106.820}})
      out.emplace(eps, solve_member(s, eps, rho));
    return out;
  }();
  return m;
}

std::vector<NormalizedRecord> family(std::initializer_list<double> eps)
{
  std::vector<NormalizedRecord> out;
  for (double e : eps) out.push_back(members().at(e).rec);
  return out;
}

} // namespace

TEST(Normalization, InversionIdentity)
{
  for (double p : {2.0, 3.0, 5.0})
    for (int n : {2, 3}) {
      double eps = 0.37;
      EXPECT_NEAR(mass_to_a(std::pow(eps, 4.0 / (p - 1.0) - n), n, p, eps), 1.0, 1e-14);
    }
}

TEST(Normalization, RoundTripUnitMass)
{
  for (const auto& [eps, m] : members()) {
    EXPECT_NEAR(m.rec.mass_check, 1.0, 1e-8) << eps;
    EXPECT_LE(std::abs(m.rec.dictionary_defect), 1e-12) << eps;
    EXPECT_DOUBLE_EQ(m.rec.mu, -1.0 / (eps * eps));
    EXPECT_TRUE(m.rec.in_configuration_set);
  }
  EXPECT_DOUBLE_EQ(members().at(0.4).rec.mu, -6.25);
}

TEST(Normalization, OriginalEquationResidual)
{
  for (const auto& [eps, m] : members()) EXPECT_LE(m.rec.eq1_residual, 1e-8) << eps;
}

TEST(Normalization, ScalingPredictionAtModerateEps)
{
  const auto& m = members().at(0.4);
  const double pred = 4.0 * 2.0 * M_PI * m.rec.rho_orig / 0.4;
  EXPECT_NEAR(m.rec.a / pred, 1.0, 0.15);
}

TEST(Normalization, ScalingLawComputedFamily)
{
  auto rep = scaling_law_check(family({0.3, 0.25, 0.2}), 2, 3.0);
  EXPECT_TRUE(rep.in_band_at_smallest);
  EXPECT_TRUE(rep.decreasing_dev);
  ASSERT_EQ(rep.R.size(), 3u);
  for (double R : rep.R) EXPECT_NEAR(R, 1.0, 0.15);
}

TEST(Normalization, ScalingLawAnsatzOnlyZeroPotential)
{
  auto v = make_zero_potential();
  std::vector<NormalizedRecord> fam;
  for (double eps : {0.5, 0.4, 0.3}) {
    AnsatzParams a;
    a.eps = eps;
    auto om = configuration_set(eps, a.C1, a.C2);
    a.rho = std::sqrt(om.lo * om.hi);
    auto g = configuration_grid(2, a, GridPolicy{});
    RadialOperator op(g, eps, v, Nonlinearity{3.0, {}});
    FullSolution sol;
    sol.eps = eps;
    sol.profile = build_z(a, v, 3.0, g);
    sol.peak_rho = a.rho;
    Vec u2(sol.profile.size());
    for (std::size_t i = 0; i < u2.size(); ++i) u2[i] = sol.profile[i] * sol.profile[i];
    sol.mass_weighted = sphere_area(2) * quadrature(g, u2);
    fam.push_back(to_original(op, sol, mass_to_a(sol, 2, 3.0)));
  }
  auto rep = scaling_law_check(fam, 2, 3.0);
  EXPECT_TRUE(rep.in_band_at_smallest);
}

TEST(Normalization, ScalingLawNeedsThreeMembers)
{
  try {
    scaling_law_check(family({0.4}), 2, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_family);
  }
}

TEST(Normalization, TrendsHoldOnFamily)
{
  auto rep = necessary_conditions_report(family({0.3, 0.25, 0.2}));
  EXPECT_FALSE(rep.vacuous);
  ASSERT_EQ(rep.items.size(), 5u);
  for (const auto& it : rep.items) EXPECT_TRUE(it.holds) << it.name;
  EXPECT_TRUE(rep.all_hold());
}

TEST(Normalization, TrendsVacuousForSingleMember)
{
  auto rep = necessary_conditions_report(family({0.4}));
  EXPECT_TRUE(rep.vacuous);
  EXPECT_FALSE(rep.warning.empty());
  EXPECT_TRUE(rep.all_hold());
}

TEST(Normalization, TrendFlagsMisSeededMember)
{
  auto fam = family({0.3, 0.25, 0.2});
  fam[1].in_configuration_set = false;
  fam[1].rho = 1e4;
  auto rep = necessary_conditions_report(fam);
  EXPECT_FALSE(rep.all_hold());
  bool flagged = false;
  for (const auto& it : rep.items)
    if (it.name == "peaks inside Omega_eps") flagged = !it.holds;
  EXPECT_TRUE(flagged);
  auto unordered = family({0.2, 0.25, 0.3});
  EXPECT_THROW(necessary_conditions_report(unordered), Error);
}

TEST(Normalization, FSolveAtSamplePoint)
{
  std::vector<FamilyPoint> pts;
  for (double e : {0.4, 0.35}) pts.push_back({e, members().at(e).rec.a, members().at(e).rec.rho_orig});
  int calls = 0;
  auto r = solve_F_for_eps(pts[0].a, pts, [&](double, double) { ++calls; return 0.0; });
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.eps, 0.4);
  EXPECT_EQ(calls, 0);
}

TEST(Normalization, FSolveOutsideRange)
{
  std::vector<FamilyPoint> pts;
  for (double e : {0.4, 0.35}) pts.push_back({e, members().at(e).rec.a, members().at(e).rec.rho_orig});
  try {
    solve_F_for_eps(0.5 * pts[0].a, pts, [](double, double) { return 0.0; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::bracket_failure);
  }
  EXPECT_THROW(solve_F_for_eps(1.0, {pts[0]}, [](double, double) { return 0.0; }), Error);
}

TEST(Normalization, FSolveBetweenSamples)
{
  auto s = sine_setup();
  std::vector<FamilyPoint> pts;
  for (double e : {0.4, 0.35}) pts.push_back({e, members().at(e).rec.a, members().at(e).rec.rho_orig});
  const double target = 0.5 * (pts[0].a + pts[1].a);
  auto fresh = [&](double eps, double erho) {
    return solve_member(s, eps, erho / eps).rec.a;
  };
  auto r = solve_F_for_eps(target, pts, fresh);
  ASSERT_TRUE(r.converged);
  EXPECT_GT(r.eps, 0.35);
  EXPECT_LT(r.eps, 0.4);
  // independent confirmation
  double a_check = fresh(r.eps, 0.5 * (pts[0].eps_rho + pts[1].eps_rho));
  EXPECT_LE(std::abs(a_check - target), 1e-6 * target);
}

TEST(Normalization, SyntheticMonotoneFSolve)
{
  // a(eps) = eps^-3 : exact root known
  std::vector<FamilyPoint> pts{{0.5, 8.0, 1.0}, {0.25, 64.0, 1.0}};
  auto r = solve_F_for_eps(27.0, pts, [](double e, double) { return std::pow(e, -3.0); });
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.eps, 1.0 / 3.0, 1e-8);
}
