#include "rarsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace rarsim {

const char* test_name(TestKind kind) {
  switch (kind) {
    case TestKind::ZTest: return "z";
    case TestKind::FisherExact: return "fisher";
    case TestKind::Randomization: return "randomization";
  }
  return "?";
}

TestKind test_from_name(const std::string& name) {
  if (name == "z") return TestKind::ZTest;
  if (name == "fisher") return TestKind::FisherExact;
  if (name == "randomization") return TestKind::Randomization;
  throw std::invalid_argument("unknown test kind: " + name);
}

void TrialConfig::validate() const {
  model.validate();
  if (!(test.alpha > 0.0 && test.alpha <= 1.0))
    throw std::invalid_argument("TrialConfig: alpha must lie in (0,1]");
  if ((rule.kind == RuleKind::FLGI || rule.kind == RuleKind::CFLGI) &&
      rule.gittins == nullptr)
    throw std::runtime_error(
        "TrialConfig: FLGI/CFLGI require a Gittins table; build one with the "
        "gittins-table subcommand and reference it in the configuration");
}

int TrialResult::successes() const {
  int s = 0;
  for (const PatientRecord& r : records) s += r.outcome;
  return s;
}

int TrialResult::patients_on(int arm) const {
  int n = 0;
  for (const PatientRecord& r : records) n += (r.arm == arm) ? 1 : 0;
  return n;
}

void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 0) n_threads = 1;
  }
  n_threads = std::min(n_threads, n);
  if (n_threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

TrialResult run_trial(const TrialConfig& cfg, Rng& rng) {
  const OutcomeModel& m = cfg.model;
  const int n_arms = m.n_arms();
  const int total = m.total_size();

  TrialResult out;
  out.stages = m.stages;
  out.block_size = m.block_size;
  out.n_experimental = m.n_experimental;
  out.records.reserve(total);
  out.block_probabilities.resize(m.stages, n_arms);
  out.final_states.assign(n_arms, ArmState{});

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int j = 1; j <= m.stages; ++j) {
    const Eigen::VectorXd pi =
        j == 1 ? cr_probabilities(m.n_experimental)
               : block_probabilities(cfg.rule, out.final_states, j,
                                     m.block_size, total, rng);
    out.block_probabilities.row(j - 1) = pi;
    const double q = m.q_schedule[j - 1];
    for (int i = 0; i < m.block_size; ++i) {
      const double u = unif(rng);
      int arm = n_arms - 1;
      double cum = 0.0;
      for (int k = 0; k < n_arms; ++k) {
        cum += pi[k];
        if (u < cum) {
          arm = k;
          break;
        }
      }
      const int z = unif(rng) < q ? 1 : 0;
      const int y =
          unif(rng) < success_probability(m, arm, j, z) ? 1 : 0;
      out.records.push_back(PatientRecord{j, z, arm, y});
      if (y == 1) {
        out.final_states[arm].successes += 1;
      } else {
        out.final_states[arm].failures += 1;
      }
    }
  }

  out.z_statistics.resize(m.n_experimental);
  const int n0 = out.final_states[0].n();
  for (int k = 1; k < n_arms; ++k) {
    const int nk = out.final_states[k].n();
    out.z_statistics[k - 1] =
        (n0 >= 1 && nk >= 1)
            ? z_test(out.final_states[0].successes, n0,
                     out.final_states[k].successes, nk)
                  .statistic
            : 0.0;
  }
  return out;
}

namespace {

// Best arm for p*: the arm with the largest stage-averaged response rate;
// the (arbitrary but fixed) last arm when all rates tie, as under the
// global null.
int best_arm_of(const OutcomeModel& m) {
  int best = m.n_experimental;
  double best_rate = mean_response_rate(m, best);
  for (int k = 0; k <= m.n_experimental; ++k) {
    const double r = mean_response_rate(m, k);
    if (r > best_rate + 1e-12) {
      best = k;
      best_rate = r;
    }
  }
  return best;
}

// One-sided p-value for "arm k superior to control" under the configured
// test.  The z statistic is oriented (control - arm)/se, so superiority is
// its lower tail.  Fisher p-values are two-sided by construction and rely on
// the calibrated threshold.
double comparison_p(const TrialConfig& cfg, const ArmState& control,
                    const ArmState& arm) {
  const int n0 = control.n();
  const int nk = arm.n();
  if (n0 < 1 || nk < 1) return 1.0;  // no evidence either way
  switch (cfg.test.kind) {
    case TestKind::ZTest: {
      const double z =
          z_test(control.successes, n0, arm.successes, nk).statistic;
      return cfg.test.two_sided ? normal_two_sided_p(z) : normal_lower_p(z);
    }
    case TestKind::FisherExact:
      return fisher_exact(control.successes, n0, arm.successes, nk).p_value;
    case TestKind::Randomization:
      throw std::logic_error("randomization decisions are replicate-level");
  }
  return 1.0;
}

bool reject_trial(const TrialConfig& cfg, const TrialResult& trial) {
  const double level =
      cfg.test.threshold >= 0.0
          ? cfg.test.threshold
          : bonferroni_level(cfg.test.alpha, cfg.model.n_experimental);
  for (int k = 1; k <= cfg.model.n_experimental; ++k) {
    const double p =
        comparison_p(cfg, trial.final_states[0], trial.final_states[k]);
    if (p <= level) return true;
  }
  return false;
}

struct ReplicateStats {
  double reject = 0.0;
  double frac_best = 0.0;
  double successes = 0.0;
};

OperatingCharacteristics aggregate(const TrialConfig& cfg,
                                   const std::vector<ReplicateStats>& reps,
                                   int best_arm) {
  const int nr = static_cast<int>(reps.size());
  OperatingCharacteristics oc;
  oc.replicates = nr;
  oc.best_arm = best_arm;
  oc.scenario_id = cfg.scenario_id;
  double sum_rej = 0.0, sum_frac = 0.0, sum_succ = 0.0;
  for (const ReplicateStats& r : reps) {
    sum_rej += r.reject;
    sum_frac += r.frac_best;
    sum_succ += r.successes;
  }
  oc.rejection_rate = sum_rej / nr;
  oc.rejection_se =
      std::sqrt(oc.rejection_rate * (1.0 - oc.rejection_rate) / nr);
  oc.p_star = sum_frac / nr;
  oc.ens = sum_succ / nr;
  double var_frac = 0.0, var_succ = 0.0;
  for (const ReplicateStats& r : reps) {
    var_frac += (r.frac_best - oc.p_star) * (r.frac_best - oc.p_star);
    var_succ += (r.successes - oc.ens) * (r.successes - oc.ens);
  }
  if (nr > 1) {
    oc.p_star_se = std::sqrt(var_frac / (nr - 1) / nr);
    oc.ens_se = std::sqrt(var_succ / (nr - 1) / nr);
  }
  return oc;
}

}  // namespace

OperatingCharacteristics run_study(const TrialConfig& cfg, int replicates,
                                   int n_threads) {
  cfg.validate();
  if (replicates < 1)
    throw std::invalid_argument("run_study: need at least one replicate");
  const int best = best_arm_of(cfg.model);
  const double total = cfg.total_size();
  std::vector<ReplicateStats> reps(replicates);
  parallel_for(replicates, n_threads, [&](int r) {
    Rng rng = make_rng(cfg.master_seed, static_cast<std::uint64_t>(r));
    const TrialResult trial = run_trial(cfg, rng);
    reps[r].reject = reject_trial(cfg, trial) ? 1.0 : 0.0;
    reps[r].frac_best = trial.patients_on(best) / total;
    reps[r].successes = trial.successes();
  });
  return aggregate(cfg, reps, best);
}

OperatingCharacteristics run_randomization_study(const TrialConfig& cfg,
                                                 int replicates,
                                                 int n_resamples,
                                                 int n_threads) {
  cfg.validate();
  const int best = best_arm_of(cfg.model);
  const double total = cfg.total_size();
  std::vector<ReplicateStats> reps(replicates);
  // Trial and resampling streams are split so the observed trial never
  // depends on the number of resamples.
  const std::uint64_t resample_salt = 0x7261746573ULL;
  parallel_for(replicates, n_threads, [&](int r) {
    Rng rng = make_rng(cfg.master_seed, static_cast<std::uint64_t>(r));
    const TrialResult trial = run_trial(cfg, rng);
    Rng rt_rng = make_rng(derive_seed(cfg.master_seed, resample_salt),
                          static_cast<std::uint64_t>(r));
    const TestResult res =
        randomization_test(trial, cfg.rule, n_resamples, cfg.test.alpha,
                           rt_rng, cfg.test.two_sided);
    reps[r].reject = res.reject ? 1.0 : 0.0;
    reps[r].frac_best = trial.patients_on(best) / total;
    reps[r].successes = trial.successes();
  });
  return aggregate(cfg, reps, best);
}

void compare_to_cr(OperatingCharacteristics& study,
                   const OperatingCharacteristics& cr_study) {
  if (study.scenario_id != cr_study.scenario_id)
    throw std::invalid_argument(
        "compare_to_cr: studies were run under different scenarios ('" +
        study.scenario_id + "' vs '" + cr_study.scenario_id + "')");
  study.delta_ens = study.ens - cr_study.ens;
  study.delta_ens_se = std::hypot(study.ens_se, cr_study.ens_se);
}

double calibrate_cutoff(const TrialConfig& cfg, int replicates,
                        double alpha_target, int n_threads) {
  cfg.validate();
  if (cfg.test.kind == TestKind::Randomization)
    throw std::invalid_argument(
        "calibrate_cutoff: the randomization test calibrates itself");
  for (int k = 1; k <= cfg.model.n_experimental; ++k) {
    if (cfg.model.beta_arm[k] != 0.0)
      throw std::invalid_argument(
          "calibrate_cutoff: the calibration model must satisfy the global "
          "null (beta_arm all zero)");
  }
  if (alpha_target >= 1.0) return 1.0;
  if (replicates * alpha_target < 10.0)
    std::cerr << "warning: calibrate_cutoff quantile rests on fewer than 10 "
                 "null p-values (Nr * alpha = "
              << replicates * alpha_target << ")\n";

  const int k_arms = cfg.model.n_experimental;
  std::vector<double> pvals(static_cast<std::size_t>(replicates) * k_arms);
  const std::uint64_t calibration_salt = 0x63616c69ULL;
  parallel_for(replicates, n_threads, [&](int r) {
    Rng rng = make_rng(derive_seed(cfg.master_seed, calibration_salt),
                       static_cast<std::uint64_t>(r));
    const TrialResult trial = run_trial(cfg, rng);
    for (int k = 1; k <= k_arms; ++k) {
      pvals[static_cast<std::size_t>(r) * k_arms + (k - 1)] =
          comparison_p(cfg, trial.final_states[0], trial.final_states[k]);
    }
  });
  std::sort(pvals.begin(), pvals.end());
  // Largest support point whose empirical CDF stays at or below the target;
  // with a discrete p-value distribution this keeps the achieved level
  // conservative.
  const std::size_t m = pvals.size();
  std::size_t idx = static_cast<std::size_t>(std::floor(alpha_target * m));
  if (idx >= m) idx = m - 1;
  if (idx == 0) return 0.0;
  // Step back over the tie group straddling the target.
  double cand = pvals[idx - 1];
  std::size_t count_le =
      std::upper_bound(pvals.begin(), pvals.end(), cand) - pvals.begin();
  while (count_le > static_cast<std::size_t>(alpha_target * m) && cand > 0.0) {
    const std::size_t first_eq =
        std::lower_bound(pvals.begin(), pvals.end(), cand) - pvals.begin();
    if (first_eq == 0) return 0.0;
    cand = pvals[first_eq - 1];
    count_le =
        std::upper_bound(pvals.begin(), pvals.end(), cand) - pvals.begin();
  }
  return cand;
}

std::vector<GlmStudyRow> run_glm_study(const TrialConfig& cfg, int replicates,
                                       const GlmSpec& spec, bool firth,
                                       int n_threads) {
  cfg.validate();
  GlmSpec resolved = spec;
  if (resolved.arms && resolved.n_experimental <= 0)
    resolved.n_experimental = cfg.model.n_experimental;

  // Generating values in design-column order.
  std::vector<std::string> names{"beta0"};
  std::vector<double> truth{cfg.model.beta0};
  if (resolved.time) {
    names.push_back("beta_t");
    truth.push_back(cfg.model.beta_t);
  }
  if (resolved.covariate_z) {
    names.push_back("beta_z");
    truth.push_back(cfg.model.beta_z);
  }
  if (resolved.arms) {
    for (int k = 1; k <= resolved.n_experimental; ++k) {
      names.push_back("beta_" + std::to_string(k));
      truth.push_back(cfg.model.beta_arm[k]);
    }
  }
  const int p = static_cast<int>(names.size());

  std::vector<Eigen::VectorXd> estimates(replicates);
  std::vector<Eigen::VectorXd> pvalues(replicates);
  std::vector<char> separated(replicates, 0);
  parallel_for(replicates, n_threads, [&](int r) {
    Rng rng = make_rng(cfg.master_seed, static_cast<std::uint64_t>(r));
    const TrialResult trial = run_trial(cfg, rng);
    const GlmFit fit = firth ? fit_logistic_firth(trial.records, resolved)
                             : fit_logistic_mle(trial.records, resolved);
    estimates[r] = fit.coefficients;
    pvalues[r] = fit.p_values;
    separated[r] = fit.separation_detected ? 1 : 0;
  });

  std::vector<GlmStudyRow> rows(p);
  for (int j = 0; j < p; ++j) {
    GlmStudyRow& row = rows[j];
    row.coefficient = names[j];
    row.true_value = truth[j];
    row.replicates = replicates;
    for (int r = 0; r < replicates; ++r) {
      const double est = estimates[r][j];
      if (std::isfinite(est)) row.n_finite += 1;
      row.n_separated += separated[r];
      row.mean_estimate += est;
      row.mse += (est - truth[j]) * (est - truth[j]);
      row.reject_rate += pvalues[r][j] < 0.05 ? 1.0 : 0.0;
    }
    row.mean_estimate /= replicates;
    row.mse /= replicates;
    row.reject_rate /= replicates;
  }
  return rows;
}

}  // namespace rarsim
