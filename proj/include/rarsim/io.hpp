#pragma once

#include <string>
#include <vector>

#include "rarsim/engine.hpp"
#include "rarsim/trial.hpp"

namespace rarsim {

/// Patient records as CSV with header "stage,z,arm,outcome".
void write_records_csv(const std::vector<PatientRecord>& records,
                       const std::string& path);
std::vector<PatientRecord> read_records_csv(const std::string& path);

/// Per-block allocation probability sidecar, header "block,pi_0,...,pi_K".
void write_block_probabilities_csv(const Eigen::MatrixXd& probs,
                                   const std::string& path);
Eigen::MatrixXd read_block_probabilities_csv(const std::string& path);

/// Rebuilds a TrialResult from its two serialized files.
TrialResult assemble_trial(std::vector<PatientRecord> records,
                           Eigen::MatrixXd block_probs);

/// Fixed-schema study results table.  The runtime column is the only one
/// allowed to differ between identical runs.
std::string results_csv_header();
std::string results_csv_row(const std::string& rule, int n_experimental,
                            int total, int block_size, int stages,
                            const std::string& scenario,
                            const OperatingCharacteristics& oc,
                            double runtime_seconds, std::uint64_t seed);

/// One row per fitted coefficient of a GLM study.
std::string glm_csv_header();
std::string glm_csv_row(const std::string& study, const std::string& method,
                        const GlmStudyRow& row);

}  // namespace rarsim
