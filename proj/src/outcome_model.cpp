#include "rarsim/outcome_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rarsim {

double expit(double u) {
  // Evaluate through the negative branch so exp never overflows.
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("logit: p must lie in (0,1), got " +
                                std::to_string(p));
  }
  return std::log(p / (1.0 - p));
}

void OutcomeModel::validate() const {
  if (stages < 1) throw std::invalid_argument("OutcomeModel: J must be >= 1");
  if (block_size < 1)
    throw std::invalid_argument("OutcomeModel: b must be >= 1");
  if (n_experimental < 1)
    throw std::invalid_argument("OutcomeModel: K must be >= 1");
  if (beta_arm.size() != n_experimental + 1)
    throw std::invalid_argument("OutcomeModel: beta_arm must have K+1 entries");
  if (beta_arm[0] != 0.0)
    throw std::invalid_argument("OutcomeModel: beta_arm[0] must be 0");
  if (q_schedule.size() != stages)
    throw std::invalid_argument("OutcomeModel: q_schedule length must equal J");
  for (int j = 0; j < q_schedule.size(); ++j) {
    if (!(q_schedule[j] >= 0.0 && q_schedule[j] <= 1.0))
      throw std::invalid_argument("OutcomeModel: q_j must lie in [0,1]");
  }
  if (!std::isfinite(beta0) || !std::isfinite(beta_t) || !std::isfinite(beta_z))
    throw std::invalid_argument("OutcomeModel: coefficients must be finite");
}

namespace {

void check_indices(const OutcomeModel& m, int arm, int stage) {
  if (arm < 0 || arm > m.n_experimental)
    throw std::out_of_range("arm index out of range: " + std::to_string(arm));
  if (stage < 1 || stage > m.stages)
    throw std::out_of_range("stage index out of range: " +
                            std::to_string(stage));
}

}  // namespace

double success_probability(const OutcomeModel& m, int arm, int stage, int z) {
  check_indices(m, arm, stage);
  const double eta = m.beta0 + m.beta_t * (stage - 1) +
                     m.beta_z * static_cast<double>(z) + m.beta_arm[arm];
  return expit(eta);
}

double marginal_success_probability(const OutcomeModel& m, int arm, int stage) {
  check_indices(m, arm, stage);
  const double q = m.q_schedule[stage - 1];
  return (1.0 - q) * success_probability(m, arm, stage, 0) +
         q * success_probability(m, arm, stage, 1);
}

double mean_response_rate(const OutcomeModel& m, int arm) {
  double sum = 0.0;
  for (int j = 1; j <= m.stages; ++j) {
    sum += marginal_success_probability(m, arm, j);
  }
  return sum / m.stages;
}

double solve_trend_coefficient(double overall_trend, double beta0, int stages) {
  if (stages < 2)
    throw std::invalid_argument("solve_trend_coefficient: J must be >= 2");
  const double start = expit(beta0);
  const double end = start + overall_trend;
  if (!(end > 0.0 && end < 1.0))
    throw std::invalid_argument(
        "solve_trend_coefficient: trend drives the final-stage rate outside "
        "(0,1)");
  return (logit(end) - beta0) / (stages - 1);
}

namespace {

Eigen::VectorXd with_control_zero(const Eigen::VectorXd& experimental_effects,
                                  int n_experimental) {
  if (experimental_effects.size() != n_experimental)
    throw std::invalid_argument("expected K experimental arm effects");
  Eigen::VectorXd beta_arm(n_experimental + 1);
  beta_arm[0] = 0.0;
  beta_arm.tail(n_experimental) = experimental_effects;
  return beta_arm;
}

}  // namespace

OutcomeModel build_scenario_i(double overall_trend, double beta0,
                              const Eigen::VectorXd& experimental_effects,
                              int stages, int block_size, int n_experimental) {
  OutcomeModel m;
  m.beta0 = beta0;
  m.beta_t = overall_trend == 0.0
                 ? 0.0
                 : solve_trend_coefficient(overall_trend, beta0, stages);
  m.beta_z = 0.0;
  m.beta_arm = with_control_zero(experimental_effects, n_experimental);
  m.q_schedule = Eigen::VectorXd::Zero(stages);
  m.stages = stages;
  m.block_size = block_size;
  m.n_experimental = n_experimental;
  m.validate();
  return m;
}

OutcomeModel build_scenario_ii(const Eigen::VectorXd& q_schedule, double beta_z,
                               double beta0,
                               const Eigen::VectorXd& experimental_effects,
                               int stages, int block_size, int n_experimental) {
  if (q_schedule.size() != stages)
    throw std::invalid_argument("build_scenario_ii: q_schedule length != J");
  OutcomeModel m;
  m.beta0 = beta0;
  m.beta_t = 0.0;
  m.beta_z = beta_z;
  m.beta_arm = with_control_zero(experimental_effects, n_experimental);
  m.q_schedule = q_schedule;
  m.stages = stages;
  m.block_size = block_size;
  m.n_experimental = n_experimental;
  m.validate();
  return m;
}

}  // namespace rarsim
