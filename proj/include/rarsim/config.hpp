#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rarsim/engine.hpp"
#include "rarsim/inference.hpp"
#include "rarsim/trial.hpp"

namespace rarsim {

enum class AnalysisKind { Test, Glm };

/// One (scenario, rule, test) combination of a study suite.
struct StudySpec {
  std::string name;
  std::string scenario_label;  // "D=0.16" or a schedule tag for the CSV
  OutcomeModel model;
  RuleKind rule_kind = RuleKind::CR;
  int ts_draws = 10000;
  int flgi_inner_sims = 100;
  double control_floor = -1.0;
  TestSpec test;
  std::optional<int> calibrate_replicates;  // calibrate threshold first
  AnalysisKind analysis = AnalysisKind::Test;
  GlmSpec glm;
  bool glm_firth = true;
  int replicates = 1000;
  bool delta_ens = false;  // also run a paired CR study
};

struct StudySuite {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string out;
  std::string gittins_table_path;
  std::vector<StudySpec> studies;
};

/// Parses and fully validates a JSON study-suite file; unknown keys are
/// rejected with the offending key path.
StudySuite parse_config(const std::string& path);
StudySuite parse_config_text(const std::string& text,
                             const std::string& origin = "<config>");

/// Runs every study of the suite, appending one results row per study (plus
/// GLM rows for estimation studies) and returns the CSV text blocks.
struct SuiteOutput {
  std::string results_csv;
  std::string glm_csv;  // empty when no estimation study ran
};
SuiteOutput run_suite(const StudySuite& suite, const GittinsTable* table);

}  // namespace rarsim
