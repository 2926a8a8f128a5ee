#include <doctest.h>

#include <cmath>
#include <random>

#include "rarsim/outcome_model.hpp"

using namespace rarsim;

namespace {

OutcomeModel flat_model(double beta0, int stages = 5, int block = 20,
                        int k = 1) {
  return build_scenario_i(0.0, beta0, Eigen::VectorXd::Zero(k), stages, block,
                          k);
}

}  // namespace

TEST_CASE("expit basic values") {
  CHECK(expit(0.0) == doctest::Approx(0.5));
  CHECK(expit(-0.8473) == doctest::Approx(0.3000).epsilon(1e-4));
  // direct evaluation of the covariate-positive rate
  CHECK(expit(-0.8473 + 1.2528) == doctest::Approx(0.6000).epsilon(1e-4));
  CHECK(expit(800.0) == doctest::Approx(1.0));
  CHECK(expit(-800.0) == doctest::Approx(0.0));
}

TEST_CASE("expit is increasing and symmetric") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    if (a < b) CHECK(expit(a) < expit(b));
    CHECK(expit(a) + expit(-a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(logit(expit(1.37)) == doctest::Approx(1.37).epsilon(1e-10));
}

TEST_CASE("success probability matches the linear predictor") {
  OutcomeModel m = flat_model(-0.8473);
  m.beta_z = 1.2528;
  CHECK(success_probability(m, 0, 1, 0) == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(success_probability(m, 0, 1, 1) == doctest::Approx(0.6).epsilon(1e-4));
  OutcomeModel zero = flat_model(0.0);
  CHECK(success_probability(zero, 1, 3, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(success_probability(m, 5, 1, 0), std::out_of_range);
  CHECK_THROWS_AS(success_probability(m, 0, 9, 0), std::out_of_range);
}

TEST_CASE("marginal rate is the covariate mixture") {
  OutcomeModel m = flat_model(-0.8473);
  m.beta_z = 1.2528;

  m.q_schedule.setZero();
  CHECK(marginal_success_probability(m, 0, 1) ==
        doctest::Approx(success_probability(m, 0, 1, 0)));
  m.q_schedule.setOnes();
  CHECK(marginal_success_probability(m, 0, 1) ==
        doctest::Approx(success_probability(m, 0, 1, 1)));
  m.q_schedule.setConstant(0.5);
  // direct evaluation: 0.5*0.3 + 0.5*0.6
  CHECK(marginal_success_probability(m, 0, 1) ==
        doctest::Approx(0.45).epsilon(1e-4));

  // always between the two conditional rates
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    m.q_schedule.setConstant(u(rng));
    const double lo = success_probability(m, 0, 1, 0);
    const double hi = success_probability(m, 0, 1, 1);
    const double mid = marginal_success_probability(m, 0, 1);
    CHECK(mid >= lo - 1e-12);
    CHECK(mid <= hi + 1e-12);
  }
}

TEST_CASE("mean response rate") {
  OutcomeModel m = flat_model(-0.8473, 4, 10, 2);
  CHECK(mean_response_rate(m, 1) ==
        doctest::Approx(marginal_success_probability(m, 1, 1)));
  // treatment effect zero when all arm coefficients vanish
  CHECK(mean_response_rate(m, 1) - mean_response_rate(m, 0) ==
        doctest::Approx(0.0));
  CHECK(mean_response_rate(m, 2) == doctest::Approx(mean_response_rate(m, 0)));

  // two-stage arithmetic mean of 0.3 and 0.5
  OutcomeModel two = flat_model(logit(0.3), 2, 10, 1);
  two.beta_t = logit(0.5) - logit(0.3);
  CHECK(mean_response_rate(two, 0) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("trend coefficient inversion") {
  CHECK(solve_trend_coefficient(0.0, -0.8473, 5) == doctest::Approx(0.0));
  // (logit(0.54) - logit(0.30)) / 4, checked against a brute-force root below
  CHECK(solve_trend_coefficient(0.24, -0.8473, 5) ==
        doctest::Approx(0.2519).epsilon(1e-4));
  CHECK(solve_trend_coefficient(0.16, -0.8473, 5) ==
        doctest::Approx(0.1717).epsilon(1e-4));

  // brute-force root check of expit(beta0 + bt*(J-1)) - expit(beta0) = D
  const double bt = solve_trend_coefficient(0.24, -0.8473, 5);
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (expit(-0.8473 + mid * 4) - expit(-0.8473) < 0.24) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  CHECK(bt == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));

  CHECK_THROWS_AS(solve_trend_coefficient(0.9, 0.0, 5), std::invalid_argument);
}

TEST_CASE("scenario (i): trend recovered exactly, rates rise from 0.3") {
  const OutcomeModel m =
      build_scenario_i(0.24, -0.8473, Eigen::VectorXd::Zero(1), 5, 20, 1);
  CHECK(m.beta_z == 0.0);
  const double recovered = marginal_success_probability(m, 0, 5) -
                           marginal_success_probability(m, 0, 1);
  CHECK(std::abs(recovered - 0.24) < 1e-12);
  CHECK(marginal_success_probability(m, 0, 1) ==
        doctest::Approx(0.3).epsilon(1e-4));
  for (int j = 1; j < 5; ++j) {
    CHECK(marginal_success_probability(m, 0, j) <
          marginal_success_probability(m, 0, j + 1));
  }

  // effect 0.4 corresponds to beta_1 near 1.6946
  Eigen::VectorXd eff(1);
  eff << logit(0.7) - logit(0.3);
  CHECK(eff[0] == doctest::Approx(1.6946).epsilon(1e-4));
}

TEST_CASE("scenario (ii): schedules and monotonicity in q") {
  Eigen::VectorXd q(10);
  for (int j = 0; j < 10; ++j) q[j] = 0.5 + j * 0.05;
  const OutcomeModel m =
      build_scenario_ii(q, 1.2528, -0.8473, Eigen::VectorXd::Zero(2), 10, 20,
                        2);
  CHECK(m.beta_t == 0.0);
  // rates rise with q_j when beta_z > 0
  for (int j = 1; j < 10; ++j) {
    CHECK(marginal_success_probability(m, 0, j) <
          marginal_success_probability(m, 0, j + 1));
  }
  CHECK(marginal_success_probability(m, 0, 1) ==
        doctest::Approx(0.45).epsilon(1e-3));

  // piecewise up-then-down schedule of the drift study
  Eigen::VectorXd pw(10);
  for (int j = 1; j <= 10; ++j)
    pw[j - 1] = j < 6 ? 0.2 + (j - 1) * 0.05 : 0.35 - (j - 6) * 0.05;
  const OutcomeModel mp =
      build_scenario_ii(pw, 1.2528, -0.8473, Eigen::VectorXd::Zero(2), 10, 20,
                        2);
  CHECK(marginal_success_probability(mp, 0, 5) >
        marginal_success_probability(mp, 0, 1));
  CHECK(marginal_success_probability(mp, 0, 10) <
        marginal_success_probability(mp, 0, 6));

  Eigen::VectorXd wrong(3);
  wrong << 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(build_scenario_ii(wrong, 1.0, 0.0, Eigen::VectorXd::Zero(1),
                                    10, 20, 1),
                  std::invalid_argument);
}

TEST_CASE("model validation") {
  OutcomeModel m = flat_model(-0.5);
  m.beta_arm[0] = 0.3;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = flat_model(-0.5);
  m.q_schedule[2] = 1.4;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
