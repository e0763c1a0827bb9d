#include "support.hpp"

#include <gtest/gtest.h>

using namespace sgsadmm;
using testing_support::gauss_mat;
using testing_support::gauss_vec;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// (v - u)/t in the subdifferential of fn at u, checked coordinatewise.
bool prox_certificate_ok(const ProxFriendlyFunction& fn, double t, const Vec& v, const Vec& u) {
  const Vec g = (v - u) / t;
  for (Index i = 0; i < u.size(); ++i) {
    switch (fn.kind()) {
      case ProxKind::zero:
        if (std::abs(g(i)) > 1e-12) return false;
        break;
      case ProxKind::l1:
        if (u(i) != 0.0 && std::abs(g(i) - fn.weight() * (u(i) > 0 ? 1.0 : -1.0)) > 1e-12) return false;
        if (u(i) == 0.0 && std::abs(g(i)) > fn.weight() + 1e-12) return false;
        break;
      case ProxKind::box:
        if (u(i) < fn.lo()(i) || u(i) > fn.hi()(i)) return false;
        if (u(i) > fn.lo()(i) && u(i) < fn.hi()(i) && std::abs(g(i)) > 1e-12) return false;
        if (u(i) == fn.lo()(i) && u(i) < fn.hi()(i) && g(i) > 1e-12) return false;
        if (u(i) == fn.hi()(i) && u(i) > fn.lo()(i) && g(i) < -1e-12) return false;
        break;
    }
  }
  return true;
}

}  // namespace

// -------------------------------------------------------------------- prox

TEST(Prox, Examples) {
  const Vec v = vec({2.0, -0.5});
  EXPECT_EQ(prox(ProxFriendlyFunction::zero(2), 0.7, v), v);
  const ProxFriendlyFunction l1 = ProxFriendlyFunction::l1(2, 1.0);
  const Vec u = prox(l1, 1.0, v);
  EXPECT_EQ(u, vec({1.0, 0.0}));
  EXPECT_TRUE(prox_certificate_ok(l1, 1.0, v, u));
  const ProxFriendlyFunction box = ProxFriendlyFunction::box(Vec::Zero(3), Vec::Ones(3));
  const Vec w = vec({-3.0, 0.4, 7.0});
  const Vec p = prox(box, 1.0, w);
  EXPECT_EQ(p, vec({0.0, 0.4, 1.0}));
  EXPECT_TRUE(prox_certificate_ok(box, 1.0, w, p));
  EXPECT_THROW(prox(l1, 0.0, v), std::invalid_argument);
}

TEST(Prox, OptimalityAndFirmNonexpansiveness) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> tdist(0.1, 3.0);
  const std::vector<ProxFriendlyFunction> fns{
      ProxFriendlyFunction::zero(4), ProxFriendlyFunction::l1(4, 0.6),
      ProxFriendlyFunction::box(vec({-1, 0, -0.5, 2}), vec({1, 0, 0.5, 3}))};
  for (const auto& fn : fns) {
    for (int t = 0; t < 500; ++t) {
      const double step = tdist(rng);
      const Vec a = gauss_vec(rng, 4, 2.0), b = gauss_vec(rng, 4, 2.0);
      const Vec pa = prox(fn, step, a), pb = prox(fn, step, b);
      EXPECT_TRUE(prox_certificate_ok(fn, step, a, pa));
      EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-14);
      // Firm nonexpansiveness: ||pa - pb||^2 <= <pa - pb, a - b>.
      EXPECT_LE((pa - pb).squaredNorm(), (pa - pb).dot(a - b) + 1e-12);
    }
  }
}

TEST(Prox, QuadraticMatchesEnumerationOracle) {
  std::mt19937_64 rng(103);
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 4;
    const Mat g = gauss_mat(rng, n, n);
    const Mat p = g * g.transpose() + 0.1 * Mat::Identity(n, n);
    const Vec q = gauss_vec(rng, n, 2.0);
    const ProxFriendlyFunction fn = t % 2 ? ProxFriendlyFunction::l1(n, 0.8)
                                          : ProxFriendlyFunction::box(Vec::Constant(n, -0.3), Vec::Constant(n, 0.4));
    const Vec u = prox_quadratic(fn, p, q);
    const Vec ref = testing_support::oracle_prox_quadratic(testing_support::theta_of(fn), n, p, q);
    ASSERT_EQ(ref.size(), n);
    EXPECT_LE((u - ref).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Prox, DomainAndValue) {
  const ProxFriendlyFunction box = ProxFriendlyFunction::box(Vec::Zero(1), Vec::Ones(1));
  EXPECT_TRUE(std::isinf(box.value(vec({2.0}))));
  EXPECT_EQ(box.value(vec({0.5})), 0.0);
  EXPECT_EQ(ProxFriendlyFunction::l1(2, 0.5).value(vec({-2.0, 1.0})), 1.5);
  EXPECT_THROW(ProxFriendlyFunction::box(Vec::Ones(1), Vec::Zero(1)), std::invalid_argument);
}

// ------------------------------------------------------------------- model

TEST(SmoothConvex, ValueGradientAndSandwich) {
  std::mt19937_64 rng(107);
  const BlockStructure s({2, 1});
  const Mat g = gauss_mat(rng, 3, 3);
  const Mat q = g * g.transpose() + 0.2 * Mat::Identity(3, 3);
  const Vec l = gauss_vec(rng, 3);
  for (MajorizerMode mj : {MajorizerMode::tight, MajorizerMode::loose}) {
    for (MinorizerMode mn : {MinorizerMode::zero, MinorizerMode::min_eig}) {
      const auto f = SmoothConvexFunction::quadratic(s, q, l, 0.3, mj, mn);
      const Vec x0 = gauss_vec(rng, 3);
      EXPECT_NEAR(f.value(x0), 0.5 * x0.dot(q * x0) + l.dot(x0) + 0.3, 1e-12);
      EXPECT_LE((f.gradient(x0) - (q * x0 + l)).norm(), 1e-12);
      for (int t = 0; t < 10000; ++t) {
        const Vec x = gauss_vec(rng, 3, 3.0), xp = gauss_vec(rng, 3, 3.0);
        const double fx = f.value(x);
        const double lower = f.minorizer_value(x, xp);
        const double upper = f.majorizer_value(x, xp);
        const double slack = 1e-10 * (1.0 + std::abs(fx));
        ASSERT_LE(lower, fx + slack);
        ASSERT_LE(fx, upper + slack);
        // Independent form of the majorizer.
        const Vec d = x - xp;
        const double up_ref = f.value(xp) + f.gradient(xp).dot(d) + 0.5 * d.dot(f.majorizer().matrix() * d);
        ASSERT_NEAR(upper, up_ref, 1e-10 * (1.0 + std::abs(up_ref)));
      }
    }
  }
  EXPECT_THROW(SmoothConvexFunction::quadratic(BlockStructure({1}), Mat::Constant(1, 1, -1.0), Vec::Zero(1), 0.0),
               ModelError);
}

TEST(SmoothConvex, GradientInequalityOnStressPreset) {
  const auto spec = make_preset("stress");
  for (const auto* fn : {&spec.f, &spec.g}) {
    const LemmaA1Result r = check_lemma_a1(*fn, 10000, 5);
    EXPECT_EQ(r.failures, 0);
    EXPECT_EQ(r.trials, 10000);
  }
  // u = u': left side 0; v = u: right side 0 and left side >= 0 by monotonicity.
  const auto& f = spec.f;
  std::mt19937_64 rng(3);
  const Vec u = gauss_vec(rng, spec.x_dim()), v = gauss_vec(rng, spec.x_dim()), up = gauss_vec(rng, spec.x_dim());
  EXPECT_EQ(Vec(f.gradient(u) - f.gradient(u)).dot(v - u), 0.0);
  EXPECT_GE(Vec(f.gradient(u) - f.gradient(up)).dot(u - up), 0.0);
}

TEST(TriangleIdentity, BothFormsAgree) {
  std::mt19937_64 rng(109);
  for (int t = 0; t < 200; ++t) {
    const BlockStructure s({2, 2});
    const Mat g = gauss_mat(rng, 4, 4);
    const BlockOperator h = BlockOperator::self_adjoint(s, g * g.transpose());
    const BlockVector u(s, gauss_vec(rng, 4)), v(s, gauss_vec(rng, 4));
    const double direct = weighted_inner(u, v, h);
    auto n2 = [&](const Vec& w) { return w.dot(h.matrix() * w); };
    const double a = 0.5 * (n2(u.data) + n2(v.data) - n2(Vec(u.data - v.data)));
    const double b = 0.5 * (n2(Vec(u.data + v.data)) - n2(u.data) - n2(v.data));
    const double scale = 1.0 + n2(u.data) + n2(v.data);
    EXPECT_NEAR(direct, a, 1e-12 * scale);
    EXPECT_NEAR(direct, b, 1e-12 * scale);
  }
}

TEST(AugLagrangian, Examples) {
  const ProblemSpec s = make_preset("tiny");
  const Vec x = vec({0.3}), y = vec({0.7});
  const Anchor at{x, y, Vec::Zero(1)};
  EXPECT_NEAR(majorized_aug_lagrangian(s, 1.0, x, y, at), 0.5 * 0.09 + 0.5 * 0.49, 1e-15);
  EXPECT_EQ(majorized_aug_lagrangian(s, 1.0, x, y, at), majorized_aug_lagrangian(s, 2.0, x, y, at));
  EXPECT_THROW(majorized_aug_lagrangian(s, 0.0, x, y, at), std::invalid_argument);
  const ProblemSpec b = make_preset("boxtiny");
  EXPECT_TRUE(std::isinf(majorized_aug_lagrangian(b, 1.0, vec({2.0}), y, at)));
}

TEST(AugLagrangian, TermByTermOnGeneratedInstance) {
  const ProblemSpec s = make_preset("threeby2");
  std::mt19937_64 rng(113);
  for (int t = 0; t < 20; ++t) {
    const Vec x = gauss_vec(rng, s.x_dim()), y = gauss_vec(rng, s.y_dim());
    const Anchor a{gauss_vec(rng, s.x_dim()), gauss_vec(rng, s.y_dim()), gauss_vec(rng, s.z_dim)};
    Vec yb = y;
    yb.head(s.y1_dim()) = yb.head(s.y1_dim()).cwiseMax(-0.3).cwiseMin(0.3);
    const double sigma = 1.7;
    // p(x) = 0.3 ||x_1||_1 on the first x block; q is the box indicator (zero inside).
    const double p = 0.3 * x.head(s.x1_dim()).lpNorm<1>();
    auto major = [](const SmoothConvexFunction& f, const Vec& u, const Vec& u0) {
      const Vec d = u - u0;
      return f.value(u0) + f.gradient(u0).dot(d) + 0.5 * d.dot(f.majorizer().matrix() * d);
    };
    const Vec r = s.A * x + s.B * yb - s.c;
    const double ref = p + major(s.f, x, a.x) + major(s.g, yb, a.y) + a.z.dot(r) + 0.5 * sigma * r.squaredNorm();
    EXPECT_NEAR(majorized_aug_lagrangian(s, sigma, x, yb, a), ref, 1e-10 * (1.0 + std::abs(ref)));
    const Mat S = Mat::Identity(s.x_dim(), s.x_dim()) * 0.4;
    const double with_s = majorized_aug_lagrangian(s, sigma, x, yb, a, ProximalTerms{&S, nullptr});
    EXPECT_NEAR(with_s, ref + 0.2 * (x - a.x).squaredNorm(), 1e-10 * (1.0 + std::abs(ref)));
  }
}

TEST(Kkt, Examples) {
  const ProblemSpec s = make_preset("tiny");
  const KKTResidual at_sol = kkt_residual(s, vec({0.5}), vec({0.5}), vec({-0.5}));
  EXPECT_LE(at_sol.total, 1e-12);
  const KKTResidual wrong_z = kkt_residual(s, vec({0.5}), vec({0.5}), vec({0.5}));
  EXPECT_LE(wrong_z.primal, 1e-15);
  EXPECT_GT(wrong_z.dual_x, 0.0);
  EXPECT_GT(wrong_z.dual_y, 0.0);
  const KKTResidual zeros = kkt_residual(s, vec({0.0}), vec({0.0}), vec({0.0}));
  EXPECT_DOUBLE_EQ(zeros.primal, 0.5);
  EXPECT_GE(zeros.dual_x, 0.0);
  EXPECT_EQ(zeros.total, std::max({zeros.primal, zeros.dual_x, zeros.dual_y}));
}

TEST(ProblemSpec, ValidateCatchesInconsistency) {
  ProblemSpec s = make_preset("tiny");
  s.c = Vec::Zero(2);
  EXPECT_THROW(s.validate(), ModelError);
  s = make_preset("tiny");
  s.p1 = ProxFriendlyFunction::zero(2);
  EXPECT_THROW(s.validate(), ModelError);
}

// ---------------------------------------------------------------- schedule

TEST(Schedule, ClosedFormTotals) {
  for (const auto& sched : {ToleranceSchedule::geometric(1e-2, 0.5), ToleranceSchedule::power(0.3, 2.5),
                            ToleranceSchedule::zero()}) {
    double sum = 0.0, sq = 0.0;
    for (long k = 0; k < 2000000; ++k) {
      const double e = sched(k);
      sum += e;
      sq += e * e;
    }
    EXPECT_NEAR(sched.total(), sum, 1e-6 * (1.0 + sum));
    EXPECT_NEAR(sched.total_squares(), sq, 1e-9 * (1.0 + sq));
  }
  EXPECT_EQ(ToleranceSchedule::parse("geom:0.1:0.25")(2), 0.1 * 0.25 * 0.25);
  EXPECT_EQ(ToleranceSchedule::parse("zero").total(), 0.0);
  EXPECT_THROW(ToleranceSchedule::parse("geom:1:1.5"), std::invalid_argument);
  EXPECT_THROW(ToleranceSchedule::parse("pow:1:1"), std::invalid_argument);
  EXPECT_THROW(ToleranceSchedule::parse("linear"), std::invalid_argument);
}

// --------------------------------------------------------------- instances

TEST(Instances, TinyKktPoint) {
  const ProblemSpec s = make_preset("tiny");
  // KKT system: x + z = 0, y + z = 0, x + y = 1.
  Mat k(3, 3);
  k << 1, 0, 1, 0, 1, 1, 1, 1, 0;
  const Vec sol = k.fullPivLu().solve(vec({0, 0, 1}));
  const Iterate o = oracle_solve(s, 1e-10);
  EXPECT_NEAR(o.x(0), sol(0), 1e-12);
  EXPECT_NEAR(o.y(0), sol(1), 1e-12);
  EXPECT_NEAR(o.z(0), sol(2), 1e-12);
  EXPECT_NEAR(o.x(0), 0.5, 1e-12);
}

TEST(Instances, L1TinyOracle) {
  const ProblemSpec s = make_preset("l1tiny");
  const Iterate o = oracle_solve(s, 1e-10);
  EXPECT_LE(kkt_residual(s, o.x, o.y, o.z).total, 1e-10);
  // Hand enumeration: x > 0 gives 1 + (x - 2) + z = 0, y + z = 0, x + y = 2, so x = 1.5.
  EXPECT_NEAR(o.x(0), 1.5, 1e-10);
}

TEST(Instances, BoxTinyOracleOnBoundary) {
  const ProblemSpec s = make_preset("boxtiny");
  const Iterate o = oracle_solve(s, 1e-10);
  EXPECT_NEAR(o.x(0), 0.5, 1e-12);
  EXPECT_LE(s.residual(o.x, o.y).norm(), 1e-12);
  // Normal cone at the upper bound: -(grad f + z) >= 0.
  EXPECT_GE(-(s.f.gradient(o.x)(0) + o.z(0)), -1e-12);
}

TEST(Instances, GeneratedPresetsAreConsistentAndDeterministic) {
  for (const auto& name : preset_names()) {
    const ProblemSpec a = make_preset(name), b = make_preset(name);
    EXPECT_NO_THROW(a.validate());
    EXPECT_TRUE(a == b) << name;
    const Iterate o = oracle_solve(a, 1e-10);
    EXPECT_LE(kkt_residual(a, o.x, o.y, o.z).total, 1e-9) << name;
  }
  const ProblemSpec t = make_preset("threeby2");
  EXPECT_EQ(t.x_structure, BlockStructure({2, 2, 1}));
  EXPECT_EQ(t.y_structure, BlockStructure({2, 1}));
  EXPECT_EQ(t.p1.kind(), ProxKind::l1);
  InstancePreset p = random_preset("threeby2");
  p.seed = 99;
  EXPECT_FALSE(generate(p) == t);
}

TEST(Instances, Errors) {
  EXPECT_THROW(random_preset("nope"), std::invalid_argument);
  InstancePreset p = random_preset("threeby2");
  p.eig_lo = -1.0;
  EXPECT_THROW(generate(p), std::invalid_argument);
  InstancePreset big = random_preset("threeby2");
  big.x_dims = {13, 1};
  EXPECT_THROW(oracle_solve(generate(big)), UnsupportedError);
}
