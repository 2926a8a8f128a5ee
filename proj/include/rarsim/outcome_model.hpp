#pragma once

#include <Eigen/Core>

namespace rarsim {

/// exp(u) / (1 + exp(u)); strictly increasing, saturates smoothly.
double expit(double u);

/// Inverse of expit; requires p in (0, 1).
double logit(double p);

/// Data-generating model for a blocked trial with binary outcomes: the
/// success log-odds are beta0 + beta_t * (j - 1) + beta_z * z + beta_arm[k]
/// for a patient on arm k at stage j with binary covariate z.  The covariate
/// prevalence may change over stages through q_schedule.
struct OutcomeModel {
  double beta0 = 0.0;
  double beta_t = 0.0;
  double beta_z = 0.0;
  Eigen::VectorXd beta_arm;    // size K+1, beta_arm[0] fixed at 0
  Eigen::VectorXd q_schedule;  // size J, q_j in [0,1]
  int stages = 1;              // J
  int block_size = 1;          // b
  int n_experimental = 1;      // K
  bool z_observed = false;

  int n_arms() const { return n_experimental + 1; }
  int total_size() const { return stages * block_size; }

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

/// One patient of a simulated trial.
struct PatientRecord {
  int stage = 1;    // 1..J
  int z = 0;        // {0,1}
  int arm = 0;      // 0..K, 0 = control
  int outcome = 0;  // {0,1}
};

/// Success probability conditional on the covariate value.
double success_probability(const OutcomeModel& m, int arm, int stage, int z);

/// Success probability with the covariate marginalised out at stage j:
/// (1-q_j) * rate(z=0) + q_j * rate(z=1).
double marginal_success_probability(const OutcomeModel& m, int arm, int stage);

/// Stage-averaged marginal success rate of an arm.
double mean_response_rate(const OutcomeModel& m, int arm);

/// Solves for the per-stage trend coefficient giving an overall rate change
/// of `overall_trend` between the first and last stage:
///   expit(beta0 + beta_t * (J-1)) - expit(beta0) = overall_trend.
double solve_trend_coefficient(double overall_trend, double beta0, int stages);

/// Changes in the standard of care: linear log-odds trend, no covariate.
/// `experimental_effects` holds the K log-odds effects of arms 1..K.
OutcomeModel build_scenario_i(double overall_trend, double beta0,
                              const Eigen::VectorXd& experimental_effects,
                              int stages, int block_size, int n_experimental);

/// Patient drift: stage-varying covariate prevalence, no log-odds trend.
OutcomeModel build_scenario_ii(const Eigen::VectorXd& q_schedule, double beta_z,
                               double beta0,
                               const Eigen::VectorXd& experimental_effects,
                               int stages, int block_size, int n_experimental);

}  // namespace rarsim
