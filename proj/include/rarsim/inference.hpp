#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rarsim/allocation.hpp"
#include "rarsim/outcome_model.hpp"
#include "rarsim/rng.hpp"
#include "rarsim/trial.hpp"

namespace rarsim {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

/// Standard normal tail helpers.
double normal_two_sided_p(double z);
double normal_lower_p(double z);

/// Two-proportion z statistic with pooled variance, oriented as
/// (s0/n0 - s1/n1) / se, and its two-sided p-value.  Degenerate pooled rates
/// (all successes or all failures) give statistic 0 and p 1.
TestResult z_test(int s0, int n0, int s1, int n1, double alpha = 0.05);

/// Exact two-sided Fisher test by hypergeometric enumeration; the two-sided
/// p sums every table whose probability does not exceed the observed one
/// (minimum-likelihood convention).
TestResult fisher_exact(int s0, int n0, int s1, int n1, double alpha = 0.05);

/// Per-comparison level under Bonferroni across K experimental arms.
double bonferroni_level(double alpha, int n_experimental);

/// Covariate layout of a logistic fit: intercept always, optional linear
/// stage term (j - 1), optional binary covariate, optional arm dummies.
struct GlmSpec {
  bool time = false;
  bool covariate_z = false;
  bool arms = true;
  int n_experimental = 0;  // number of arm dummies when arms is set
};

struct GlmFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;  // two-sided Wald
  bool converged = false;
  bool separation_detected = false;
  bool penalized = false;
  int iterations = 0;
};

/// Newton-Raphson maximum likelihood; invariants on exit: when converged is
/// true the score has max component below 1e-6 and no separation was found.
/// Estimates are reported as-is (with flags) when the likelihood stalls.
GlmFit fit_logistic_mle(const std::vector<PatientRecord>& records,
                        const GlmSpec& spec);

/// Firth-penalised fit: maximises log-likelihood + 0.5 log det I(beta).
/// Finite estimates even under complete or quasi-complete separation.
GlmFit fit_logistic_firth(const std::vector<PatientRecord>& records,
                          const GlmSpec& spec);

/// True when the MLE diverges: an arm group (or control) with all-equal
/// outcomes, or a capped fit ending with coefficient norm > 10 and gradient
/// norm > 1e-4.
bool detect_separation(const std::vector<PatientRecord>& records,
                       const GlmSpec& spec);

/// Monte Carlo randomization test: re-draws the allocation sequence under
/// `rule` block by block against the fixed observed outcome sequence,
/// rebuilding the statistic each time.  p = (1 + #at-least-as-extreme) /
/// (n_resamples + 1).  The statistic is the z statistic for K = 1 and the
/// most significant per-arm z under K > 1.
TestResult randomization_test(const TrialResult& observed,
                              const AllocationRuleSpec& rule, int n_resamples,
                              double alpha, Rng& rng, bool two_sided = false);

}  // namespace rarsim
