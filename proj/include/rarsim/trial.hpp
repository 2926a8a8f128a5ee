#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rarsim/allocation.hpp"
#include "rarsim/outcome_model.hpp"

namespace rarsim {

enum class TestKind { ZTest, FisherExact, Randomization };

const char* test_name(TestKind kind);
TestKind test_from_name(const std::string& name);

/// Hypothesis-testing handle for a design.  Each experimental arm is compared
/// against control at per-comparison level alpha / K; `threshold` overrides
/// that level with a cutoff calibrated under the design's null.  Comparisons
/// are one-sided (experimental superior) unless two_sided is set; Fisher
/// p-values are inherently two-sided and rely on calibration.
struct TestSpec {
  TestKind kind = TestKind::ZTest;
  double alpha = 0.05;
  double threshold = -1.0;  // calibrated per-comparison cutoff; < 0 = nominal
  int resamples = 500;      // randomization test only
  bool two_sided = false;
};

/// A full design: outcome model, allocation rule, test and the master seed
/// from which every replicate stream is derived.
struct TrialConfig {
  OutcomeModel model;
  AllocationRuleSpec rule;
  TestSpec test;
  std::uint64_t master_seed = 1;
  std::string scenario_id;  // guards pairings such as delta-ENS vs CR

  int total_size() const { return model.total_size(); }
  void validate() const;
};

/// Complete record of one simulated trial.
struct TrialResult {
  std::vector<PatientRecord> records;   // T entries in allocation order
  Eigen::MatrixXd block_probabilities;  // J x (K+1), as used per block
  std::vector<ArmState> final_states;   // K+1 arms
  Eigen::VectorXd z_statistics;         // K entries, arm k vs control
  int stages = 0;
  int block_size = 0;
  int n_experimental = 0;

  int successes() const;
  int patients_on(int arm) const;
};

}  // namespace rarsim
