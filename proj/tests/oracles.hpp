#pragma once

// Independent brute-force oracles used only by tests.  Each one deliberately
// avoids the code path of the implementation it checks.

#include <Eigen/Core>
#include <vector>

#include "rarsim/allocation.hpp"
#include "rarsim/gittins.hpp"
#include "rarsim/outcome_model.hpp"

namespace rarsim::oracle {

/// Gittins index by a coarse-to-fine lambda grid: for every candidate lambda
/// a finite-horizon value iteration over the full outcome triangle compares
/// playing against retiring, and the grid point with the smallest gap wins.
/// Refined to roughly `precision`.
double gittins_grid_search(int a, int b, double discount, double precision);

/// Two-sided Fisher p by direct hypergeometric enumeration with pmf ratios
/// (no log-gamma).
double fisher_two_sided(int s0, int n0, int s1, int n1);

/// Exact FLGI block probabilities by enumerating every greedy path of the
/// upcoming block, splitting ties and weighting outcomes by the posterior
/// predictive.  Feasible for block_size <= ~6.
Eigen::VectorXd flgi_enumeration(const std::vector<ArmState>& states,
                                 int block_size, const GittinsTable& table);

/// Exact randomization-test tail probability for a tiny trial run under a
/// rule with closed-form probabilities (CR or RSIHR): enumerates every
/// allocation sequence, weighting by the rule's block probabilities given
/// the fixed outcome sequence.
double randomization_tail_enumeration(const std::vector<int>& outcomes,
                                      int block_size, RuleKind rule,
                                      double observed_statistic,
                                      bool two_sided);

/// Log-likelihood maximizer for an intercept + single arm dummy design by
/// nested grid refinement, to about 1e-4 per coordinate.
Eigen::Vector2d grid_mle_two_param(const std::vector<PatientRecord>& records);

/// One-dimensional maximizer of the Firth-penalized intercept-only
/// log-likelihood by golden-section search.
double firth_intercept_golden(int successes, int n);

}  // namespace rarsim::oracle
