// SPDX-License-Identifier: Apache-2.0

#include "inekformer/lie.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace ikf;
using ikf::test::Rng;
using ikf::test::series_exp;
using ikf::test::twist_hat;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Skew, ZeroMapsToZeroMatrix) {
  EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
}

TEST(Skew, ReproducesCrossProduct) {
  const Vec3 e1(1, 0, 0), e2(0, 1, 0), e3(0, 0, 1);
  EXPECT_TRUE((skew(e1) * e2).isApprox(e3, 1e-15));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w = rng.vec3(2.0), u = rng.vec3(2.0);
    EXPECT_TRUE((skew(w) * u).isApprox(w.cross(u), 1e-12));
  }
}

TEST(Skew, Antisymmetric) {
  const Mat3 s = skew(Vec3(1, 2, 3));
  EXPECT_TRUE((s + s.transpose()).isZero(0.0));
}

TEST(So3Exp, ZeroGivesIdentity) {
  EXPECT_TRUE(so3_exp(Vec3::Zero()).matrix().isApprox(Mat3::Identity(), 0.0));
}

TEST(So3Exp, QuarterTurnAboutZ) {
  const Rotation r = so3_exp(Vec3(0, 0, kPi / 2));
  EXPECT_TRUE((r * Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST(So3Exp, MatchesSeriesOracle) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = rng.vec3(3.0);
    const Mat3 oracle = series_exp(Mat3(skew(phi)));
    EXPECT_LT((so3_exp(phi).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(So3Log, IdentityGivesZero) {
  EXPECT_TRUE(so3_log(Rotation()).isZero(0.0));
}

TEST(So3Log, PiAboutXUpToConvention) {
  // At theta == pi the convention takes the largest axis component
  // non-negative, so the x-axis flip maps to (+pi, 0, 0).
  const Vec3 phi = so3_log(so3_exp(Vec3(kPi, 0, 0)));
  EXPECT_TRUE(phi.isApprox(Vec3(kPi, 0, 0), 1e-9));
}

TEST(So3Log, TinyAngleSeriesBranch) {
  const Vec3 phi = so3_log(so3_exp(Vec3(1e-9, 0, 0)));
  EXPECT_NEAR(phi.x(), 1e-9, 1e-15);
  EXPECT_NEAR(phi.y(), 0.0, 1e-15);
  EXPECT_NEAR(phi.z(), 0.0, 1e-15);
}

TEST(So3Log, RoundTripRandom) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Vec3 phi = rng.vec3(1.0);
    phi *= rng.uniform(0.0, 1.0) * (kPi - 1e-3) / std::max(phi.norm(), 1e-12);
    EXPECT_LT((so3_log(so3_exp(phi)) - phi).norm(), 1e-9);
  }
}

TEST(So3Log, RoundTripMagnitudeSweep) {
  Rng rng(4);
  for (const double mag : {1e-9, 1e-4, 1.0, kPi - 1e-6}) {
    for (int i = 0; i < 20; ++i) {
      const Vec3 axis = rng.vec3(1.0).normalized();
      const Vec3 phi = mag * axis;
      EXPECT_LT((so3_log(so3_exp(phi)) - phi).norm(), 1e-8)
          << "magnitude " << mag;
    }
  }
}

TEST(Gamma, ZeroAngleLimits) {
  EXPECT_TRUE(gamma0(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0));
  EXPECT_TRUE(gamma1(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0));
  EXPECT_TRUE(gamma2(Vec3::Zero()).isApprox(0.5 * Mat3::Identity(), 0.0));
}

namespace {

// Trapezoid quadrature of the integral definitions:
//   Gamma1 = int_0^1 exp(phi s) ds,  Gamma2 = int_0^1 (1-s) exp(phi s) ds.
Mat3 gamma_quadrature(const Vec3& phi, int order, int points = 10000) {
  Mat3 acc = Mat3::Zero();
  for (int i = 0; i <= points; ++i) {
    const double s = static_cast<double>(i) / points;
    const double w = (i == 0 || i == points) ? 0.5 : 1.0;
    const double factor = order == 2 ? (1.0 - s) : 1.0;
    acc += w * factor * so3_exp(phi * s).matrix();
  }
  return acc / points;
}

}  // namespace

TEST(Gamma, QuadratureOracle) {
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    Vec3 phi = rng.vec3(1.0);
    phi *= rng.uniform(0.0, 3.0) / std::max(phi.norm(), 1e-12);
    EXPECT_LT((gamma1(phi) - gamma_quadrature(phi, 1)).cwiseAbs().maxCoeff(),
              1e-6);
    EXPECT_LT((gamma2(phi) - gamma_quadrature(phi, 2)).cwiseAbs().maxCoeff(),
              1e-6);
  }
}

namespace {

// Exact references sum_{n} A^n / (n+k)! that stay fully accurate through
// the small-angle region, unlike the naive closed forms.
Mat3 gamma_series(const Vec3& phi, int k, int terms = 30) {
  const Mat3 a = skew(phi);
  Mat3 term = Mat3::Identity();
  double denominator = 1.0;
  for (int j = 1; j <= k; ++j) denominator *= j;
  term /= denominator;
  Mat3 sum = term;
  for (int n = 1; n <= terms; ++n) {
    term = term * a / static_cast<double>(n + k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(Gamma, TaylorBranchConsistency) {
  // The Taylor branch agrees with the exact series to 1e-12 throughout the
  // small-angle region (this is where the naive closed forms lose digits).
  for (const double mag : {1e-9, 1e-6, 9e-5}) {
    const Vec3 phi = mag * Vec3(1, 0, 0);
    EXPECT_LT((gamma0(phi) - gamma_series(phi, 0)).cwiseAbs().maxCoeff(),
              1e-12)
        << mag;
    EXPECT_LT((gamma1(phi) - gamma_series(phi, 1)).cwiseAbs().maxCoeff(),
              1e-12)
        << mag;
    EXPECT_LT((gamma2(phi) - gamma_series(phi, 2)).cwiseAbs().maxCoeff(),
              1e-12)
        << mag;
  }
  // Just above the threshold the closed form is continuous with the Taylor
  // branch up to its cancellation floor (~eps/theta^2 on the A^2 term).
  const Vec3 above = 2e-4 * Vec3(1, 0, 0);
  EXPECT_LT((gamma2(above) - gamma_series(above, 2)).cwiseAbs().maxCoeff(),
            1e-8);
  // Well away from the threshold the closed form is fully accurate again.
  const Vec3 safe = 0.05 * Vec3(0, 1, 0);
  EXPECT_LT((gamma2(safe) - gamma_series(safe, 2)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Sek3Exp, ZeroTwistGivesIdentity) {
  const StateElement g = StateElement::exp(Twist15::Zero());
  EXPECT_TRUE(g.dense().isApprox(Mat7::Identity(), 0.0));
}

TEST(Sek3Exp, PureTranslationKeepsSlots) {
  Twist15 xi = Twist15::Zero();
  xi.tail<12>() << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const StateElement g = StateElement::exp(xi);
  EXPECT_TRUE(g.rot.matrix().isApprox(Mat3::Identity(), 0.0));
  for (int k = 0; k < 4; ++k)
    EXPECT_TRUE(g.col(k).isApprox(xi.segment<3>(3 + 3 * k), 0.0));
}

TEST(Sek3Exp, MatchesSeriesOracle) {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const Twist15 xi = rng.twist(2.0, 2.0);
    const Mat7 oracle = series_exp(twist_hat(xi));
    EXPECT_LT((StateElement::exp(xi).dense() - oracle).cwiseAbs().maxCoeff(),
              1e-9);
  }
}

TEST(Sek3Compose, IdentityAndInverseLaws) {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const StateElement a = rng.element();
    EXPECT_LT((a.compose(a.inverse()).dense() - Mat7::Identity())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
    const StateElement b = rng.element();
    EXPECT_TRUE(StateElement::identity().compose(b).dense().isApprox(
        b.dense(), 1e-15));
  }
}

TEST(Sek3Compose, DenseProductOracle) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const StateElement a = rng.element(), b = rng.element();
    EXPECT_LT(
        (a.compose(b).dense() - Mat7(a.dense() * b.dense())).cwiseAbs().maxCoeff(),
        1e-12);
    EXPECT_LT((a.inverse().dense() - Mat7(a.dense().inverse()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(Sek3Compose, Associativity) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const StateElement a = rng.element(), b = rng.element(), c = rng.element();
    EXPECT_LT((a.compose(b).compose(c).dense() -
               a.compose(b.compose(c)).dense())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
  }
}

TEST(Rotation, StaysOrthonormalOverChainedCompositions) {
  Rng rng(10);
  Rotation r;
  const Rotation inc = so3_exp(Vec3(1e-3, 2e-3, -1.5e-3));
  for (int i = 0; i < 100000; ++i) r = r * inc;
  EXPECT_TRUE(r.is_valid(1e-9));
}

TEST(LeftJacobian, So3BlockMatchesGamma1) {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    Twist15 xi = Twist15::Zero();
    xi.head<3>() = rng.vec3(2.0);
    const auto jl = sek3_left_jacobian<4>(xi);
    EXPECT_LT(
        (jl.topLeftCorner<3, 3>() - gamma1(xi.head<3>())).cwiseAbs().maxCoeff(),
        1e-12);
  }
}
