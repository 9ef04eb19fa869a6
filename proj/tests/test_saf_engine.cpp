#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "saf_engine.hpp"
#include "signals.hpp"

using namespace pnsaf;

namespace {

// Self-contained NLMS, written independently of the engine.
struct NlmsOracle {
  std::vector<double> w, x;
  double mu, delta;

  NlmsOracle(int taps, double mu_, double delta_)
      : w(taps, 0.0), x(taps, 0.0), mu(mu_), delta(delta_) {}

  void step(double input, double desired) {
    for (size_t j = x.size() - 1; j > 0; --j) x[j] = x[j - 1];
    x[0] = input;
    double y = 0.0, energy = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      y += w[j] * x[j];
      energy += x[j] * x[j];
    }
    const double e = desired - y;
    const double g = mu * e / (energy + delta);
    for (size_t j = 0; j < x.size(); ++j) w[j] += g * x[j];
  }
};

SafConfig base_config(int m, int n) {
  SafConfig cfg;
  cfg.filter_length = m;
  cfg.num_subbands = n;
  return cfg;
}

}  // namespace

TEST_CASE("errors follow the inner-product definition") {
  const auto bank = design_bank(1, 1, 60.0);
  auto cfg = base_config(2, 1);
  SafEngine engine(cfg, bank);

  SubbandFrame frame;
  frame.regressors = {{2.0, 3.0}};
  frame.desired = {5.0};

  std::vector<double> e(1);
  engine.subband_errors(frame, e);
  CHECK(e[0] == 5.0);  // w = 0

  // Hand case: w = (1, -1), u = (2, 3), d = 5 -> e = 5 - (2 - 3) = 6.
  const std::vector<double> gains = {1.0, 1.0};
  const std::vector<double> steps = {1.0};
  cfg.delta = 0.0;  // exact unit-regressor updates below
  SafEngine fresh(cfg, bank);
  SubbandFrame unit;
  unit.regressors = {{1.0, 0.0}};
  unit.desired = {1.0};
  fresh.subband_errors(unit, e);
  fresh.update_weights(unit, gains, steps);  // w = (1, 0)
  unit.regressors = {{0.0, 1.0}};
  unit.desired = {-1.0};
  fresh.subband_errors(unit, e);
  fresh.update_weights(unit, gains, steps);  // w = (1, -1)
  CHECK(fresh.weights()[0] == 1.0);
  CHECK(fresh.weights()[1] == -1.0);

  frame.regressors = {{2.0, 3.0}};
  frame.desired = {5.0};
  fresh.subband_errors(frame, e);
  CHECK(e[0] == 6.0);
}

TEST_CASE("single NLMS-style update from zero weights") {
  // N=1, G=I, delta=0, mu=1, u=(1,1), d=2 -> w = (1,1).
  const auto bank = design_bank(1, 1, 60.0);
  auto cfg = base_config(2, 1);
  cfg.delta = 0.0;
  SafEngine engine(cfg, bank);
  SubbandFrame frame;
  frame.regressors = {{1.0, 1.0}};
  frame.desired = {2.0};
  std::vector<double> e(1);
  engine.subband_errors(frame, e);
  const std::vector<double> gains = {1.0, 1.0};
  const std::vector<double> steps = {1.0};
  engine.update_weights(frame, gains, steps);
  CHECK(engine.weights()[0] == 1.0);
  CHECK(engine.weights()[1] == 1.0);
}

TEST_CASE("zero errors and zero steps leave the weights untouched") {
  const auto bank = design_bank(4, 32, 60.0);
  auto cfg = base_config(16, 4);
  SafEngine engine(cfg, bank);
  const auto input = gen_ar1(0.5, 64, 3);
  for (int k = 0; k < 16; ++k) {
    const std::span<const double> block(input.data() + 4 * k, 4);
    engine.process_block(block, block);
  }
  const std::vector<double> before(engine.weights().begin(),
                                   engine.weights().end());

  SubbandFrame frame;
  frame.regressors.assign(4, std::vector<double>(16, 0.5));
  frame.desired.assign(4, 0.0);
  std::vector<double> e(4);
  engine.subband_errors(frame, e);

  // All steps zero.
  engine.update_weights(frame, compute_gains(cfg.gain_rule, before),
                        std::vector<double>(4, 0.0));
  for (size_t j = 0; j < before.size(); ++j)
    CHECK(engine.weights()[j] == before[j]);

  // All errors zero: build a frame whose desired equals the prediction.
  std::vector<double> desired(4);
  for (int i = 0; i < 4; ++i) {
    double y = 0.0;
    for (int j = 0; j < 16; ++j) y += frame.regressors[i][j] * before[j];
    desired[i] = y;
  }
  frame.desired = desired;
  engine.subband_errors(frame, e);
  for (double v : e) CHECK(std::abs(v) <= 1e-14);
  engine.update_weights(frame, compute_gains(cfg.gain_rule, before),
                        std::vector<double>(4, 1.0));
  for (size_t j = 0; j < before.size(); ++j)
    CHECK(engine.weights()[j] == doctest::Approx(before[j]).epsilon(1e-12));
}

TEST_CASE("N = 1 with identity gains is NLMS") {
  const int m = 32;
  const auto bank = design_bank(1, 1, 60.0);
  auto cfg = base_config(m, 1);
  cfg.delta = 1e-3;
  cfg.step_controller = StepController::fixed(0.7);
  SafEngine engine(cfg, bank);
  NlmsOracle oracle(m, 0.7, 1e-3);

  const auto input = gen_ar1(0.9, 10'000, 21);
  const auto path = gen_sparse_echo_path(m, 6, 1.0, 22);
  const auto run = synthesize_desired(path, input, 30.0, 23);

  double worst = 0.0;
  for (size_t n = 0; n < run.input.size(); ++n) {
    engine.process_block({run.input.data() + n, 1},
                         {run.desired.data() + n, 1});
    oracle.step(run.input[n], run.desired[n]);
    for (int j = 0; j < m; ++j)
      worst = std::max(worst, std::abs(engine.weights()[j] - oracle.w[j]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("scaling all gains leaves the unregularized update unchanged") {
  const int m = 24;
  const auto bank = design_bank(4, 32, 60.0);
  auto cfg = base_config(m, 4);
  cfg.delta = 0.0;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> dist;

  for (double scale : {0.1, 10.0}) {
    SafEngine a(cfg, bank), b(cfg, bank);
    for (int k = 0; k < 100; ++k) {
      SubbandFrame frame;
      frame.regressors.assign(4, std::vector<double>(m));
      frame.desired.assign(4, 0.0);
      for (auto& reg : frame.regressors)
        for (auto& v : reg) v = dist(rng);
      for (auto& d : frame.desired) d = dist(rng);
      std::vector<double> gains(m), steps(4), e(4);
      for (auto& g : gains) g = 0.1 + std::abs(dist(rng));
      for (auto& s : steps) s = 0.5 + 0.4 * std::abs(dist(rng));
      auto scaled = gains;
      for (auto& g : scaled) g *= scale;

      a.subband_errors(frame, e);
      a.update_weights(frame, gains, steps);
      b.subband_errors(frame, e);
      b.update_weights(frame, scaled, steps);
      for (int j = 0; j < m; ++j) {
        const double ref = a.weights()[j];
        CHECK(std::abs(b.weights()[j] - ref) <=
              std::max(1e-15, std::abs(ref) * 1e-12));
      }
    }
  }
}

TEST_CASE("noise-free run converges below -100 dB") {
  const int m = 64;
  const auto bank = design_bank(4, 32, 60.0);
  auto cfg = base_config(m, 4);
  cfg.gain_rule = GainRule::ipnlms(0.0, 1e-3);
  cfg.step_controller = StepController::fixed(1.0);
  SafEngine engine(cfg, bank);

  const auto input = gen_ar1(0.95, 50'000, 5);
  const auto path = gen_sparse_echo_path(m, 8, 2.0, 6);
  const auto run = synthesize_desired(
      path, input, std::numeric_limits<double>::infinity(), 7);

  double best = 0.0;
  for (size_t k = 0; k < run.input.size() / 4; ++k) {
    engine.process_block({run.input.data() + 4 * k, 4},
                         {run.desired.data() + 4 * k, 4});
    best = std::min(best, nmsd_db(path.weights, engine.weights()));
  }
  CHECK(best < -100.0);
}

TEST_CASE("zero blocks from a cold start leave everything at zero") {
  const auto bank = design_bank(4, 32, 60.0);
  auto cfg = base_config(16, 4);
  cfg.gain_rule = GainRule::ipnlms(0.0, 1e-3);
  cfg.step_controller = StepController::shrinkage_vss(3.5, 1.0, 0.01, 4, 16);
  SafEngine vss_engine(cfg, bank);
  cfg.step_controller = StepController::fixed(0.7);
  SafEngine fixed_engine(cfg, bank);

  const std::vector<double> zeros(4, 0.0);
  for (int k = 0; k < 10; ++k) {
    vss_engine.process_block(zeros, zeros);
    fixed_engine.process_block(zeros, zeros);
  }
  for (double w : vss_engine.weights()) CHECK(w == 0.0);
  for (double w : fixed_engine.weights()) CHECK(w == 0.0);
  for (double mu : vss_engine.last_steps()) CHECK(mu == 0.0);
  for (double mu : fixed_engine.last_steps()) CHECK(mu == 0.7);
  for (double e : vss_engine.last_errors()) CHECK(e == 0.0);
}

TEST_CASE("divergence raises a flagged error") {
  const auto bank = design_bank(1, 1, 60.0);
  auto cfg = base_config(4, 1);
  SafEngine engine(cfg, bank);
  const double good[1] = {1.0};
  const double bad[1] = {std::numeric_limits<double>::quiet_NaN()};
  try {
    engine.process_block(good, bad);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.status() == Status::diverged);
  }
}

TEST_CASE("reset restores the initial state and replays identically") {
  const auto bank = design_bank(2, 16, 60.0);
  auto cfg = base_config(8, 2);
  cfg.gain_rule = GainRule::ipnlms(0.0, 1e-3);
  cfg.step_controller = StepController::shrinkage_vss(3.5, 1.0, 0.01, 2, 8);

  SafEngine a(cfg, bank), b(cfg, bank);
  const auto input = gen_ar1(0.8, 400, 31);
  const auto path = gen_sparse_echo_path(8, 3, 0.5, 32);
  const auto run = synthesize_desired(path, input, 20.0, 33);

  // b runs halfway, resets, then both replay the full run.
  for (size_t k = 0; k < 50; ++k)
    b.process_block({run.input.data() + 2 * k, 2},
                    {run.desired.data() + 2 * k, 2});
  b.reset();
  CHECK(b.iteration() == 0);
  for (double w : b.weights()) CHECK(w == 0.0);

  for (size_t k = 0; k < run.input.size() / 2; ++k) {
    a.process_block({run.input.data() + 2 * k, 2},
                    {run.desired.data() + 2 * k, 2});
    b.process_block({run.input.data() + 2 * k, 2},
                    {run.desired.data() + 2 * k, 2});
  }
  for (int j = 0; j < 8; ++j) CHECK(a.weights()[j] == b.weights()[j]);

  // reset is idempotent
  a.reset();
  a.reset();
  for (double w : a.weights()) CHECK(w == 0.0);
}

TEST_CASE("engine validates its configuration") {
  const auto bank = design_bank(4, 32, 60.0);
  auto cfg = base_config(16, 2);  // bank mismatch
  CHECK_THROWS_AS(SafEngine(cfg, bank), Error);
  cfg = base_config(16, 4);
  cfg.delta = -1.0;
  CHECK_THROWS_AS(SafEngine(cfg, bank), Error);
  cfg = base_config(0, 4);
  CHECK_THROWS_AS(SafEngine(cfg, bank), Error);
}
