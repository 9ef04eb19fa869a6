#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "errors.hpp"
#include "step_control.hpp"

using namespace pnsaf;

TEST_CASE("shrink_error") {
  CHECK(shrink_error(0.1, 0.2) == 0.0);
  CHECK(shrink_error(-0.5, 0.2) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(shrink_error(0.7, 0.0) == 0.7);   // zero threshold is the identity
  CHECK(shrink_error(-0.7, 0.0) == -0.7);

  // Contraction, any inputs.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double e = dist(rng);
    const double t = std::abs(dist(rng));
    CHECK(std::abs(shrink_error(e, t)) <= std::abs(e));
  }
}

TEST_CASE("update_power") {
  CHECK(update_power(0.0, 0.9, 0.0) == 0.0);
  CHECK(update_power(1.0, 0.9, 0.0) == doctest::Approx(0.9).epsilon(1e-15));
  // Constant input converges to its square.
  double p = 0.0;
  for (int i = 0; i < 4000; ++i) p = update_power(p, 0.99, 0.5);
  CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("vss_step") {
  CHECK(vss_step(0.0, 0.01) == 0.0);
  CHECK(vss_step(0.01, 0.01) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(vss_step(0.03, 0.01) == doctest::Approx(0.75).epsilon(1e-15));
  // Strictly increasing in the error power, decreasing in the noise power.
  CHECK(vss_step(0.02, 0.01) > vss_step(0.01, 0.01));
  CHECK(vss_step(0.02, 0.02) < vss_step(0.02, 0.01));
  // Always below one.
  for (double p : {1e-9, 1.0, 1e9}) CHECK(vss_step(p, 1e-6) < 1.0);
}

TEST_CASE("sm_step") {
  CHECK(sm_step(0.05, 0.1) == 0.0);                      // inside the bound
  CHECK(sm_step(0.2, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sm_step(-0.2, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sm_step(1e12, 0.1) < 1.0);
  CHECK(sm_step(1e12, 0.1) > 0.999);
}

TEST_CASE("fixed controller emits its constant") {
  auto ctrl = StepController::fixed(1.0);
  std::vector<double> mu(4);
  ctrl.steps(std::vector<double>{9.0, -3.0, 0.0, 1e6}, mu);
  for (double m : mu) CHECK(m == 1.0);
  CHECK_THROWS_AS(StepController::fixed(0.0), Error);
  CHECK_THROWS_AS(StepController::fixed(2.0), Error);
}

TEST_CASE("set-membership controller") {
  // sigma_eta^2 = 0.04, N = 4, gamma = 9 -> bound = sqrt(9 * 0.01) = 0.3.
  auto ctrl = StepController::set_membership(9.0, 0.04, 4);
  CHECK(ctrl.bound() == doctest::Approx(0.3).epsilon(1e-15));
  std::vector<double> mu(4);
  ctrl.steps(std::vector<double>{0.15, 0.6, -0.6, 0.0}, mu);
  CHECK(mu[0] == 0.0);
  CHECK(mu[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mu[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mu[3] == 0.0);
  CHECK_THROWS_AS(StepController::set_membership(9.0, 0.0, 4), Error);
}

TEST_CASE("shrinkage controller chains the three formulas") {
  // N=1, kappa=1, M=10 -> theta = 0.9; sigma_eta,D^2 = 0.0025; lambda = 3.
  auto ctrl = StepController::shrinkage_vss(3.0, 1.0, 0.0025, 1, 10);
  CHECK(ctrl.theta() == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(ctrl.subband_noise_variance() == doctest::Approx(0.0025).epsilon(1e-15));
  const double t = std::sqrt(3.0 * 0.0025);
  CHECK(ctrl.threshold() == doctest::Approx(t).epsilon(1e-15));

  std::vector<double> mu(1);
  ctrl.steps(std::vector<double>{0.5866}, mu);
  const double eps = 0.5866 - t;
  const double power = 0.1 * eps * eps;
  const double expected = power / (power + 0.0025);
  CHECK(mu[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(mu[0] == doctest::Approx(0.9091).epsilon(1e-3));
  CHECK(ctrl.error_power()[0] == doctest::Approx(power).epsilon(1e-15));
  CHECK(power == doctest::Approx(0.025).epsilon(1e-3));
}

TEST_CASE("shrinkage controller zeroes sub-threshold errors at cold start") {
  auto ctrl = StepController::shrinkage_vss(3.5, 1.0, 0.01, 4, 128);
  const double t = ctrl.threshold();
  std::vector<double> mu(4);
  ctrl.steps(std::vector<double>{0.5 * t, -0.9 * t, 0.0, 0.99 * t}, mu);
  for (double m : mu) CHECK(m == 0.0);
}

TEST_CASE("adaptive steps stay inside [0, 1)") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 2.0);
  auto vss = StepController::shrinkage_vss(3.5, 1.0, 0.01, 4, 64);
  auto sm = StepController::set_membership(9.0, 0.01, 4);
  std::vector<double> e(4), mu(4);
  for (int k = 0; k < 2000; ++k) {
    for (auto& v : e) v = dist(rng);
    vss.steps(e, mu);
    for (double m : mu) {
      CHECK(m >= 0.0);
      CHECK(m < 1.0);
    }
    sm.steps(e, mu);
    for (double m : mu) {
      CHECK(m >= 0.0);
      CHECK(m < 1.0);
    }
  }
}

TEST_CASE("controller state advances exactly once per call") {
  auto ctrl = StepController::shrinkage_vss(3.0, 1.0, 0.0025, 1, 10);
  std::vector<double> mu(1);
  ctrl.steps(std::vector<double>{1.0}, mu);
  const double after_one = ctrl.error_power()[0];
  ctrl.steps(std::vector<double>{0.0}, mu);
  CHECK(ctrl.error_power()[0] == doctest::Approx(0.9 * after_one).epsilon(1e-15));
  ctrl.reset();
  CHECK(ctrl.error_power()[0] == 0.0);
}

TEST_CASE("controller validates sizes and parameters") {
  auto ctrl = StepController::shrinkage_vss(3.5, 1.0, 0.01, 4, 64);
  std::vector<double> mu(3);
  CHECK_THROWS_AS(ctrl.steps(std::vector<double>{1.0, 2.0, 3.0}, mu), Error);
  CHECK_THROWS_AS(StepController::shrinkage_vss(-1.0, 1.0, 0.01, 4, 64),
                  Error);
  CHECK_THROWS_AS(StepController::shrinkage_vss(3.5, 0.5, 0.01, 4, 64),
                  Error);
  CHECK_THROWS_AS(StepController::shrinkage_vss(3.5, 1.0, 0.01, 64, 4),
                  Error);  // theta would leave (0, 1)
}
