#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rarsim/config.hpp"
#include "rarsim/engine.hpp"
#include "rarsim/gittins.hpp"
#include "rarsim/io.hpp"

namespace {

using namespace rarsim;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

std::optional<GittinsTable> load_table_if_needed(const StudySuite& suite) {
  bool needed = false;
  for (const StudySpec& s : suite.studies) {
    if (s.rule_kind == RuleKind::FLGI || s.rule_kind == RuleKind::CFLGI)
      needed = true;
  }
  if (!needed) return std::nullopt;
  try {
    return load_gittins_table(suite.gittins_table_path);
  } catch (const std::exception& e) {
    throw std::runtime_error(
        std::string(e.what()) +
        "\nbuild it first, e.g.: rarsim gittins-table --discount 0.99 "
        "--max-n <2+T> --out " +
        suite.gittins_table_path);
  }
}

const StudySpec& pick_study(const StudySuite& suite, const std::string& name) {
  if (name.empty()) return suite.studies.front();
  for (const StudySpec& s : suite.studies) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("no study named '" + name + "' in config");
}

TrialConfig study_to_config(const StudySuite& suite, const StudySpec& s,
                            const GittinsTable* table) {
  TrialConfig cfg;
  cfg.model = s.model;
  cfg.rule.kind = s.rule_kind;
  cfg.rule.ts_draws = s.ts_draws;
  cfg.rule.flgi_inner_sims = s.flgi_inner_sims;
  cfg.rule.control_floor = s.control_floor;
  cfg.rule.gittins = table;
  cfg.test = s.test;
  cfg.master_seed = suite.seed;
  cfg.scenario_id = s.scenario_label;
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Monte Carlo engine for response-adaptive randomised trials "
               "with binary outcomes"};
  app.require_subcommand(1);

  // gittins-table
  auto* gt = app.add_subcommand("gittins-table",
                                "Precompute and store a Gittins index table");
  double gt_discount = 0.99;
  int gt_max_n = 102;
  double gt_tol = 1e-6;
  std::string gt_out = "gittins.tbl";
  int gt_threads = 0;
  gt->add_option("--discount", gt_discount, "discount factor in (0,1)")
      ->capture_default_str();
  gt->add_option("--max-n", gt_max_n,
                 "largest covered posterior count a+b (use 2+T)")
      ->capture_default_str();
  gt->add_option("--tol", gt_tol, "index precision")->capture_default_str();
  gt->add_option("--out", gt_out, "output file")->capture_default_str();
  gt->add_option("--threads", gt_threads, "worker threads (0 = all cores)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the studies of a config");
  std::string sim_config;
  std::string sim_out;
  std::string sim_glm_out;
  std::optional<std::uint64_t> sim_seed;
  std::optional<int> sim_threads;
  sim->add_option("--config", sim_config, "study suite JSON")->required();
  sim->add_option("--out", sim_out, "results CSV path (default from config)");
  sim->add_option("--glm-out", sim_glm_out,
                  "estimation CSV path (default <out>.glm.csv)");
  sim->add_option("--seed", sim_seed, "override the config seed");
  sim->add_option("--threads", sim_threads, "override the config thread count");

  // calibrate
  auto* cal = app.add_subcommand(
      "calibrate", "Calibrate a rejection cutoff under a study's global null");
  std::string cal_config;
  std::string cal_study;
  int cal_nr = 5000;
  std::optional<std::uint64_t> cal_seed;
  std::optional<int> cal_threads;
  cal->add_option("--config", cal_config, "study suite JSON")->required();
  cal->add_option("--study", cal_study, "study name (default: first)");
  cal->add_option("--nr", cal_nr, "null replicates")->capture_default_str();
  cal->add_option("--seed", cal_seed, "override the config seed");
  cal->add_option("--threads", cal_threads, "override the config thread count");

  // randtest
  auto* rt = app.add_subcommand(
      "randtest", "Randomization test for a serialized trial");
  std::string rt_trial;
  std::string rt_probs;
  std::string rt_config;
  std::string rt_study;
  int rt_m = 500;
  std::uint64_t rt_seed = 1;
  double rt_alpha = 0.05;
  bool rt_two_sided = false;
  rt->add_option("--trial", rt_trial, "patient record CSV")->required();
  rt->add_option("--probs", rt_probs, "per-block probability sidecar CSV")
      ->required();
  rt->add_option("--config", rt_config,
                 "study suite JSON providing the allocation rule")
      ->required();
  rt->add_option("--study", rt_study, "study name (default: first)");
  rt->add_option("--m", rt_m, "resamples")->capture_default_str();
  rt->add_option("--seed", rt_seed, "resampling seed")->capture_default_str();
  rt->add_option("--alpha", rt_alpha, "test level")->capture_default_str();
  rt->add_flag("--two-sided", rt_two_sided, "two-sided comparison");

  // fit
  auto* fit = app.add_subcommand("fit", "Logistic model fit of a record CSV");
  std::string fit_data;
  bool fit_time = false;
  bool fit_z = false;
  bool fit_no_arms = false;
  bool fit_mle = false;
  fit->add_option("--data", fit_data, "patient record CSV")->required();
  fit->add_flag("--time", fit_time, "include the linear stage term");
  fit->add_flag("--z", fit_z, "include the binary covariate");
  fit->add_flag("--no-arms", fit_no_arms, "drop the arm dummies");
  fit->add_flag("--mle", fit_mle, "plain maximum likelihood (default: Firth)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  if (gt->parsed()) {
    std::cerr << "computing Gittins indices: discount " << gt_discount
              << ", max n " << gt_max_n << ", tol " << gt_tol << "\n";
    const GittinsTable table =
        compute_gittins_table(gt_discount, gt_max_n, gt_tol, gt_threads);
    save_gittins_table(table, gt_out);
    std::cerr << "wrote " << table.values().size() << " states to " << gt_out
              << "\n";
    return 0;
  }

  if (sim->parsed()) {
    StudySuite suite = parse_config(sim_config);
    if (sim_seed) suite.seed = *sim_seed;
    if (sim_threads) suite.threads = *sim_threads;
    if (!sim_out.empty()) suite.out = sim_out;
    const auto table = load_table_if_needed(suite);
    const SuiteOutput output =
        run_suite(suite, table ? &*table : nullptr);
    write_text(suite.out, output.results_csv);
    if (!output.glm_csv.empty()) {
      const std::string glm_path =
          !sim_glm_out.empty()
              ? sim_glm_out
              : (suite.out.empty() ? "" : suite.out + ".glm.csv");
      write_text(glm_path, output.glm_csv);
    }
    return 0;
  }

  if (cal->parsed()) {
    StudySuite suite = parse_config(cal_config);
    if (cal_seed) suite.seed = *cal_seed;
    if (cal_threads) suite.threads = *cal_threads;
    const auto table = load_table_if_needed(suite);
    const StudySpec& study = pick_study(suite, cal_study);
    TrialConfig cfg = study_to_config(suite, study, table ? &*table : nullptr);
    cfg.model.beta_arm.setZero();
    const double target =
        bonferroni_level(cfg.test.alpha, cfg.model.n_experimental);
    const double threshold =
        calibrate_cutoff(cfg, cal_nr, target, suite.threads);
    std::cout << "study,threshold,target,nr\n"
              << study.name << ',' << threshold << ',' << target << ','
              << cal_nr << "\n";
    return 0;
  }

  if (rt->parsed()) {
    StudySuite suite = parse_config(rt_config);
    const auto table = load_table_if_needed(suite);
    const StudySpec& study = pick_study(suite, rt_study);
    const TrialConfig cfg =
        study_to_config(suite, study, table ? &*table : nullptr);
    const TrialResult trial = assemble_trial(
        read_records_csv(rt_trial), read_block_probabilities_csv(rt_probs));
    Rng rng = make_rng(rt_seed, 0);
    const TestResult res = randomization_test(trial, cfg.rule, rt_m, rt_alpha,
                                              rng, rt_two_sided);
    std::cout << "statistic,p_value,reject\n"
              << res.statistic << ',' << res.p_value << ','
              << (res.reject ? 1 : 0) << "\n";
    return 0;
  }

  if (fit->parsed()) {
    const auto records = read_records_csv(fit_data);
    GlmSpec spec;
    spec.time = fit_time;
    spec.covariate_z = fit_z;
    spec.arms = !fit_no_arms;
    const GlmFit result = fit_mle ? fit_logistic_mle(records, spec)
                                  : fit_logistic_firth(records, spec);
    std::cout << "coefficient,estimate,std_error,p_value,converged,"
                 "separation_detected,penalized\n";
    for (std::size_t j = 0; j < result.names.size(); ++j) {
      std::cout << result.names[j] << ',' << result.coefficients[j] << ','
                << result.std_errors[j] << ',' << result.p_values[j] << ','
                << (result.converged ? 1 : 0) << ','
                << (result.separation_detected ? 1 : 0) << ','
                << (result.penalized ? 1 : 0) << "\n";
    }
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
