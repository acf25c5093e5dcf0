#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rknfc/problems.hpp"

using namespace rknfc;

namespace {

Vector random_point(std::mt19937& rng, double min_radius) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Vector q{{u(rng), u(rng)}};
    if (q.norm() <= 2.0 && q.norm() >= min_radius) return q;
  }
}

}  // namespace

TEST(Kepler, InitialInvariants) {
  const ProblemSpec p = perturbed_kepler(1e-3);
  const double eps = 1e-3;
  const double H0 = 0.5 * (1 + eps) * (1 + eps) - 1 - (2 * eps + eps * eps) / 3;
  EXPECT_NEAR(p.ivp.invariants[0].eval(p.ivp.q0, p.ivp.q0_prime), H0, 1e-14);
  EXPECT_NEAR(H0, -0.4996665, 1e-9);
  EXPECT_NEAR(p.ivp.invariants[1].eval(p.ivp.q0, p.ivp.q0_prime), 1 + eps, 1e-14);
  for (const auto& inv : p.ivp.invariants) {
    EXPECT_NEAR(inv.eval(p.ivp.q0, p.ivp.q0_prime), p.reference_values.at(inv.name), 1e-14);
  }
}

TEST(Kepler, ExactSolutionSatisfiesOde) {
  const ProblemSpec p = perturbed_kepler(1e-3);
  const double w = 1 + 1e-3;
  for (double t : {0.0, 1.0, M_PI}) {
    const PhaseState s = (*p.ivp.exact)(t);
    const Vector qdd = -w * w * s.q;
    EXPECT_LE((qdd - p.ivp.force(s.q)).norm(), 1e-12) << t;
    const Vector fd = ((*p.ivp.exact)(t + 1e-6).q - (*p.ivp.exact)(t - 1e-6).q) / 2e-6;
    EXPECT_LE((fd - s.qp).norm(), 1e-8);
  }
  const PhaseState s0 = (*p.ivp.exact)(0.0);
  EXPECT_EQ(s0.q, p.ivp.q0);
  EXPECT_EQ(s0.qp, p.ivp.q0_prime);
}

TEST(Kepler, HamiltonianConstantAlongExactSolution) {
  const ProblemSpec p = perturbed_kepler(1e-3);
  const auto& H = p.ivp.invariants[0].eval;
  const double dt = 1e-3;
  for (double t = 0.0; t <= 10.0; t += 0.37) {
    const PhaseState a = (*p.ivp.exact)(t - dt);
    const PhaseState b = (*p.ivp.exact)(t + dt);
    EXPECT_LE(std::abs(H(b.q, b.qp) - H(a.q, a.qp)) / (2 * dt), 1e-10) << t;
  }
}

TEST(Kepler, RejectsSingularityAndNegativeEpsilon) {
  const ProblemSpec p = perturbed_kepler();
  EXPECT_THROW(p.ivp.force(Vector::Zero(2)), ForceDomainError);
  EXPECT_THROW((*p.ivp.jacobian)(Vector::Zero(2)), ForceDomainError);
  EXPECT_THROW(perturbed_kepler(-1.0), InvalidArgument);
}

TEST(HenonHeiles, InitialHamiltonian) {
  const ProblemSpec p = henon_heiles();
  EXPECT_NEAR(p.ivp.invariants[0].eval(p.ivp.q0, p.ivp.q0_prime), 17.0 / 192.0, 1e-15);
  EXPECT_NEAR(17.0 / 192.0, 0.08854166, 1e-8);
  EXPECT_FALSE(p.ivp.exact.has_value());
}

TEST(HenonHeiles, ForceIsMinusPotentialGradient) {
  const ProblemSpec p = henon_heiles();
  auto V = [](const Vector& q) {
    return 0.5 * q.squaredNorm() + q[0] * q[0] * q[1] - q[1] * q[1] * q[1] / 3.0;
  };
  std::mt19937 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Vector q = random_point(rng, 0.0);
    Vector grad(2);
    for (int j = 0; j < 2; ++j) {
      Vector a = q, b = q;
      a[j] += 1e-6;
      b[j] -= 1e-6;
      grad[j] = (V(a) - V(b)) / 2e-6;
    }
    EXPECT_LE((p.ivp.force(q) + grad).norm(), 1e-8);
  }
}

TEST(HenonHeiles, JacobianAtInitialPoint) {
  const ProblemSpec p = henon_heiles();
  const double q1 = std::sqrt(11.0 / 96.0);
  const Matrix expected{{-1.0, -2.0 * q1}, {-2.0 * q1, -1.0}};
  EXPECT_LE(((*p.ivp.jacobian)(p.ivp.q0) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((finite_difference_jacobian(p.ivp.force, p.ivp.q0) - expected).cwiseAbs().maxCoeff(),
            1e-6);
}

TEST(Problems, AnalyticJacobiansMatchFiniteDifferences) {
  std::mt19937 rng(123);
  for (const ProblemSpec& p : {perturbed_kepler(), henon_heiles()}) {
    const double min_r = p.name == "kepler" ? 0.1 : 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vector q = random_point(rng, min_r);
      const Matrix fd = finite_difference_jacobian(p.ivp.force, q);
      const Matrix an = (*p.ivp.jacobian)(q);
      const double scale = std::max(1.0, an.cwiseAbs().maxCoeff());
      EXPECT_LE((fd - an).cwiseAbs().maxCoeff(), 1e-6 * scale) << p.name << ' ' << q.transpose();
    }
  }
}

TEST(Registry, LookupAndCustomProblems) {
  ProblemRegistry reg;
  EXPECT_TRUE(reg.contains("kepler"));
  EXPECT_TRUE(reg.contains("henon-heiles"));
  EXPECT_FALSE(reg.contains("fpu"));
  EXPECT_THROW(reg.make("fpu", 1.0), InvalidArgument);
  EXPECT_EQ(reg.make("kepler", 100.0).ivp.t_end, 100.0);
  reg.add("oscillator", [](double t_end) {
    ProblemSpec p;
    p.name = "oscillator";
    p.ivp.dim = 1;
    p.ivp.force = [](const Vector& q) -> Vector { return -q; };
    p.ivp.q0 = Vector{{1.0}};
    p.ivp.q0_prime = Vector{{0.0}};
    p.ivp.t_end = t_end;
    return p;
  });
  EXPECT_TRUE(reg.contains("oscillator"));
  EXPECT_EQ(reg.names().size(), 3u);
}
