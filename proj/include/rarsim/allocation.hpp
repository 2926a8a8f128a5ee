#pragma once

#include <Eigen/Core>
#include <vector>

#include "rarsim/gittins.hpp"
#include "rarsim/rng.hpp"

namespace rarsim {

/// Accumulated outcomes of one arm together with its Beta prior.
struct ArmState {
  int successes = 0;
  int failures = 0;
  double prior_a = 1.0;
  double prior_b = 1.0;

  int n() const { return successes + failures; }
  double posterior_a() const { return prior_a + successes; }
  double posterior_b() const { return prior_b + failures; }
  double posterior_mean() const {
    return posterior_a() / (posterior_a() + posterior_b());
  }
};

enum class RuleKind { CR, TS, RSIHR, FLGI, CFLGI };

const char* rule_name(RuleKind kind);
RuleKind rule_from_name(const std::string& name);

/// Allocation rule plus its tuning knobs.  FLGI/CFLGI require a Gittins
/// table covering every posterior state reachable within the trial.
struct AllocationRuleSpec {
  RuleKind kind = RuleKind::CR;
  int ts_draws = 10000;         // Monte Carlo draws for TS win probabilities
  int flgi_inner_sims = 100;    // inner block simulations for FLGI/CFLGI
  double control_floor = -1.0;  // CFLGI floor; < 0 means 1/(K+1)
  const GittinsTable* gittins = nullptr;
};

/// Equal allocation over K+1 arms.
Eigen::VectorXd cr_probabilities(int n_experimental);

/// Thompson-sampling allocation: w_k = P(arm k has the largest rate),
/// estimated over `n_draws` joint posterior draws, then pi_k proportional to
/// w_k^aggressiveness.  aggressiveness = 0 gives equal allocation.
Eigen::VectorXd ts_probabilities(const std::vector<ArmState>& states,
                                 double aggressiveness, int n_draws, Rng& rng);

/// Failure-minimising allocation: pi_k proportional to sqrt(rate_k).
/// Rates must lie strictly inside (0, 1).
Eigen::VectorXd rsihr_probabilities(
    const Eigen::Ref<const Eigen::VectorXd>& rate_estimates);

/// Same rule fed by arm states: the MLE s/n per arm, clamped into
/// [eps, 1-eps] with eps = 1/(2n+2) at the boundaries, and the prior mean
/// for arms without data.
Eigen::VectorXd rsihr_probabilities(const std::vector<ArmState>& states);

/// Forward-looking Gittins allocation: the chance that a patient of the
/// upcoming block of size `block_size` lands on arm k when the block is
/// filled by the greedy index policy, with hypothetical outcomes drawn from
/// the posterior predictive and states updated inside the simulated block.
Eigen::VectorXd flgi_probabilities(const std::vector<ArmState>& states,
                                   int block_size, const GittinsTable& table,
                                   int n_sims, Rng& rng);

/// Raises pi[0] to `floor` if it is below and rescales the experimental
/// arms proportionally so the vector still sums to one.
Eigen::VectorXd apply_control_floor(Eigen::VectorXd pi, double floor);

/// FLGI with the control allocation kept at or above `floor`.
Eigen::VectorXd cflgi_probabilities(const std::vector<ArmState>& states,
                                    int block_size, const GittinsTable& table,
                                    int n_sims, double floor, Rng& rng);

/// Rule dispatch used by the trial engine for block `block_index` (1-based).
/// The first block is always allocated equally by the engine itself; this
/// computes the data-driven probabilities of later blocks.  TS receives the
/// aggressiveness (block_index-1)*block_size / (2*total_size).
Eigen::VectorXd block_probabilities(const AllocationRuleSpec& rule,
                                    const std::vector<ArmState>& states,
                                    int block_index, int block_size,
                                    int total_size, Rng& rng);

}  // namespace rarsim
