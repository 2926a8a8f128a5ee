#include "rarsim/config.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rarsim/io.hpp"
#include "json.hpp"

namespace rarsim {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (known.find(item.key()) == known.end())
      throw std::invalid_argument("config: unknown key '" + item.key() +
                                  "' in " + where);
  }
}

Eigen::VectorXd to_vector(const json& arr, const std::string& where) {
  if (!arr.is_array())
    throw std::invalid_argument("config: " + where + " must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw std::invalid_argument("config: " + where + " must hold numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

OutcomeModel parse_model(const json& obj, const std::string& where,
                         std::string* scenario_label) {
  reject_unknown_keys(obj,
                      {"beta0", "beta_t", "D", "beta_z", "beta_arm",
                       "q_schedule", "J", "b", "K", "z_observed"},
                      where);
  OutcomeModel m;
  for (const char* key : {"J", "b", "K"}) {
    if (!obj.contains(key))
      throw std::invalid_argument("config: " + where + " needs key '" + key +
                                  "'");
  }
  m.stages = obj.at("J").get<int>();
  m.block_size = obj.at("b").get<int>();
  m.n_experimental = obj.at("K").get<int>();
  if (m.stages < 1 || m.block_size < 1 || m.n_experimental < 1)
    throw std::invalid_argument("config: " + where +
                                ": J, b and K must be positive");
  m.beta0 = obj.value("beta0", 0.0);
  m.beta_z = obj.value("beta_z", 0.0);
  m.z_observed = obj.value("z_observed", false);

  if (obj.contains("beta_t") && obj.contains("D"))
    throw std::invalid_argument("config: " + where +
                                ": give either beta_t or D, not both");
  double overall_trend = 0.0;
  if (obj.contains("D")) {
    overall_trend = obj.at("D").get<double>();
    m.beta_t = overall_trend == 0.0
                   ? 0.0
                   : solve_trend_coefficient(overall_trend, m.beta0, m.stages);
    if (scenario_label && scenario_label->empty()) {
      std::ostringstream tag;
      tag << "D=" << overall_trend;
      *scenario_label = tag.str();
    }
  } else {
    m.beta_t = obj.value("beta_t", 0.0);
  }

  if (obj.contains("beta_arm")) {
    const Eigen::VectorXd effects = to_vector(obj.at("beta_arm"), where);
    if (effects.size() != m.n_experimental)
      throw std::invalid_argument(
          "config: " + where + ": beta_arm must list the K experimental arm "
          "effects (the control effect is fixed at 0)");
    m.beta_arm = Eigen::VectorXd::Zero(m.n_experimental + 1);
    m.beta_arm.tail(m.n_experimental) = effects;
  } else {
    m.beta_arm = Eigen::VectorXd::Zero(m.n_experimental + 1);
  }

  if (obj.contains("q_schedule")) {
    const json& q = obj.at("q_schedule");
    if (q.is_number()) {
      m.q_schedule =
          Eigen::VectorXd::Constant(m.stages, q.get<double>());
    } else {
      m.q_schedule = to_vector(q, where + ".q_schedule");
      if (m.q_schedule.size() != m.stages)
        throw std::invalid_argument("config: " + where +
                                    ": q_schedule length must equal J");
    }
  } else {
    m.q_schedule = Eigen::VectorXd::Zero(m.stages);
  }
  m.validate();
  return m;
}

StudySpec parse_study(const json& obj, std::size_t index) {
  const std::string where = "studies[" + std::to_string(index) + "]";
  reject_unknown_keys(obj,
                      {"name", "model", "rule", "test", "nr", "analysis",
                       "glm", "delta_ens"},
                      where);
  StudySpec s;
  s.name = obj.value("name", "study" + std::to_string(index));
  if (!obj.contains("model"))
    throw std::invalid_argument("config: " + where + " needs a model");
  s.model = parse_model(obj.at("model"), where + ".model", &s.scenario_label);
  if (s.scenario_label.empty()) s.scenario_label = s.name;

  if (!obj.contains("rule"))
    throw std::invalid_argument("config: " + where + " needs a rule");
  const json& rule = obj.at("rule");
  reject_unknown_keys(rule, {"rule", "m_ts", "m_flgi", "control_floor"},
                      where + ".rule");
  s.rule_kind = rule_from_name(rule.at("rule").get<std::string>());
  s.ts_draws = rule.value("m_ts", 10000);
  s.flgi_inner_sims = rule.value("m_flgi", 100);
  s.control_floor = rule.value("control_floor", -1.0);
  if (s.ts_draws < 1 || s.flgi_inner_sims < 1)
    throw std::invalid_argument("config: " + where +
                                ": m_ts and m_flgi must be positive");

  if (obj.contains("test")) {
    const json& test = obj.at("test");
    reject_unknown_keys(
        test, {"kind", "alpha", "threshold", "m", "two_sided", "calibrate_nr"},
        where + ".test");
    s.test.kind = test_from_name(test.value("kind", std::string("z")));
    s.test.alpha = test.value("alpha", 0.05);
    s.test.threshold = test.value("threshold", -1.0);
    s.test.resamples = test.value("m", 500);
    s.test.two_sided = test.value("two_sided", false);
    if (test.contains("calibrate_nr"))
      s.calibrate_replicates = test.at("calibrate_nr").get<int>();
  }

  const std::string analysis = obj.value("analysis", std::string("test"));
  if (analysis == "test") {
    s.analysis = AnalysisKind::Test;
  } else if (analysis == "glm") {
    s.analysis = AnalysisKind::Glm;
  } else {
    throw std::invalid_argument("config: " + where +
                                ": analysis must be 'test' or 'glm'");
  }
  if (obj.contains("glm")) {
    const json& glm = obj.at("glm");
    reject_unknown_keys(glm, {"time", "z", "arms", "firth"}, where + ".glm");
    s.glm.time = glm.value("time", false);
    s.glm.covariate_z = glm.value("z", false);
    s.glm.arms = glm.value("arms", true);
    s.glm_firth = glm.value("firth", true);
  }
  s.glm.n_experimental = s.model.n_experimental;

  s.replicates = obj.value("nr", 1000);
  if (s.replicates < 1)
    throw std::invalid_argument("config: " + where + ": nr must be >= 1");
  s.delta_ens = obj.value("delta_ens", false);
  return s;
}

}  // namespace

StudySuite parse_config_text(const std::string& text,
                             const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + origin + ": " + e.what());
  }
  if (!root.is_object())
    throw std::invalid_argument("config: " + origin +
                                ": top level must be an object");
  reject_unknown_keys(root, {"seed", "threads", "out", "gittins_table",
                             "studies"},
                      "top level");
  StudySuite suite;
  suite.seed = root.value("seed", 1ULL);
  suite.threads = root.value("threads", 0);
  suite.out = root.value("out", std::string());
  suite.gittins_table_path = root.value("gittins_table", std::string());
  if (!root.contains("studies") || !root.at("studies").is_array() ||
      root.at("studies").empty())
    throw std::invalid_argument("config: " + origin +
                                ": needs a non-empty studies array");
  for (std::size_t i = 0; i < root.at("studies").size(); ++i) {
    suite.studies.push_back(parse_study(root.at("studies")[i], i));
  }

  bool needs_table = false;
  for (const StudySpec& s : suite.studies) {
    if (s.rule_kind == RuleKind::FLGI || s.rule_kind == RuleKind::CFLGI)
      needs_table = true;
  }
  if (needs_table && suite.gittins_table_path.empty())
    throw std::invalid_argument(
        "config: a FLGI/CFLGI study requires the gittins_table key");
  return suite;
}

StudySuite parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

namespace {

TrialConfig to_trial_config(const StudySpec& s, const StudySuite& suite,
                            const GittinsTable* table, std::size_t index) {
  TrialConfig cfg;
  cfg.model = s.model;
  cfg.rule.kind = s.rule_kind;
  cfg.rule.ts_draws = s.ts_draws;
  cfg.rule.flgi_inner_sims = s.flgi_inner_sims;
  cfg.rule.control_floor = s.control_floor;
  cfg.rule.gittins = table;
  cfg.test = s.test;
  cfg.master_seed = derive_seed(suite.seed, index);
  cfg.scenario_id = s.scenario_label;
  return cfg;
}

}  // namespace

SuiteOutput run_suite(const StudySuite& suite, const GittinsTable* table) {
  SuiteOutput out;
  out.results_csv = results_csv_header() + "\n";
  bool any_glm = false;
  std::string glm_rows;

  for (std::size_t i = 0; i < suite.studies.size(); ++i) {
    const StudySpec& s = suite.studies[i];
    TrialConfig cfg = to_trial_config(s, suite, table, i);
    const auto started = std::chrono::steady_clock::now();

    if (s.analysis == AnalysisKind::Glm) {
      any_glm = true;
      const auto rows =
          run_glm_study(cfg, s.replicates, s.glm, s.glm_firth, suite.threads);
      for (const GlmStudyRow& row : rows) {
        glm_rows += glm_csv_row(s.name, s.glm_firth ? "firth" : "mle", row);
        glm_rows += "\n";
      }
      continue;
    }

    if (s.calibrate_replicates) {
      TrialConfig null_cfg = cfg;
      null_cfg.model.beta_arm.setZero();
      const double target =
          bonferroni_level(cfg.test.alpha, cfg.model.n_experimental);
      cfg.test.threshold = calibrate_cutoff(null_cfg, *s.calibrate_replicates,
                                            target, suite.threads);
      std::cerr << "study " << s.name << ": calibrated threshold "
                << cfg.test.threshold << " (target " << target << ")\n";
    }

    OperatingCharacteristics oc =
        cfg.test.kind == TestKind::Randomization
            ? run_randomization_study(cfg, s.replicates, cfg.test.resamples,
                                      suite.threads)
            : run_study(cfg, s.replicates, suite.threads);

    if (s.delta_ens) {
      TrialConfig cr_cfg = cfg;
      cr_cfg.rule = AllocationRuleSpec{};  // plain CR twin
      cr_cfg.test = cfg.test.kind == TestKind::Randomization
                        ? TestSpec{TestKind::ZTest, cfg.test.alpha}
                        : cfg.test;
      cr_cfg.test.threshold = -1.0;
      cr_cfg.master_seed = derive_seed(cfg.master_seed, 0x63725f747769ULL);
      const OperatingCharacteristics cr =
          run_study(cr_cfg, s.replicates, suite.threads);
      compare_to_cr(oc, cr);
    }

    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    out.results_csv +=
        results_csv_row(rule_name(s.rule_kind), s.model.n_experimental,
                        s.model.total_size(), s.model.block_size,
                        s.model.stages, s.scenario_label, oc, runtime,
                        cfg.master_seed) +
        "\n";
  }

  if (any_glm) out.glm_csv = glm_csv_header() + "\n" + glm_rows;
  return out;
}

}  // namespace rarsim
