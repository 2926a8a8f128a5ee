#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rarsim/inference.hpp"
#include "rarsim/trial.hpp"

namespace rarsim {

/// Aggregated study results over independent trial replicates.
struct OperatingCharacteristics {
  double rejection_rate = 0.0;  // alpha under the null, power otherwise
  double rejection_se = 0.0;    // binomial s.e.
  double p_star = 0.0;          // mean fraction of patients on the best arm
  double p_star_se = 0.0;       // sample s.d. / sqrt(Nr)
  double ens = 0.0;             // mean successes per trial
  double ens_se = 0.0;          // sample s.d. / sqrt(Nr)
  double delta_ens = std::numeric_limits<double>::quiet_NaN();
  double delta_ens_se = std::numeric_limits<double>::quiet_NaN();
  int replicates = 0;
  int best_arm = 0;
  std::string scenario_id;
};

/// Simulates one trial: block 1 is allocated equally, every later block with
/// the rule's probabilities computed from the data of all earlier blocks.
/// Arm assignments are independent draws from the block probability vector.
TrialResult run_trial(const TrialConfig& cfg, Rng& rng);

/// Nr independent replicates with counter-derived seeds; rejection applies
/// the configured test per experimental arm at level alpha/K (or at the
/// calibrated threshold) and rejects if any comparison does.
OperatingCharacteristics run_study(const TrialConfig& cfg, int replicates,
                                   int n_threads = 0);

/// As run_study but every replicate's decision comes from the Monte Carlo
/// randomization test with `n_resamples` resamples at level alpha.
OperatingCharacteristics run_randomization_study(const TrialConfig& cfg,
                                                 int replicates,
                                                 int n_resamples,
                                                 int n_threads = 0);

/// Fills study.delta_ens with the ENS difference against the paired CR study
/// (same scenario id required; throws otherwise).
void compare_to_cr(OperatingCharacteristics& study,
                   const OperatingCharacteristics& cr_study);

/// Simulates Nr null trials under the configured rule and returns the
/// conservative empirical alpha_target-quantile of the per-comparison
/// p-values, used thereafter as the rejection threshold for the design.
/// Warns when replicates * alpha_target < 10.
double calibrate_cutoff(const TrialConfig& cfg, int replicates,
                        double alpha_target, int n_threads = 0);

/// Replicated logistic model fits (Tables of estimation studies): mean
/// estimate, mean squared error against the generating value and the
/// two-sided Wald rejection rate per coefficient.
struct GlmStudyRow {
  std::string coefficient;
  double mean_estimate = 0.0;
  double mse = 0.0;
  double reject_rate = 0.0;  // share of replicates with p < 0.05
  double true_value = 0.0;
  int n_finite = 0;      // replicates with all-finite estimates
  int n_separated = 0;   // replicates with detected separation
  int replicates = 0;
};

std::vector<GlmStudyRow> run_glm_study(const TrialConfig& cfg, int replicates,
                                       const GlmSpec& spec, bool firth,
                                       int n_threads = 0);

/// Index-ordered parallel map used by the studies; results identical for any
/// worker count.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

}  // namespace rarsim
