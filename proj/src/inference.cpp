#include "rarsim/inference.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rarsim {

double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double normal_lower_p(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TestResult z_test(int s0, int n0, int s1, int n1, double alpha) {
  if (n0 < 1 || n1 < 1)
    throw std::invalid_argument("z_test: both groups need at least one patient");
  if (s0 < 0 || s0 > n0 || s1 < 0 || s1 > n1)
    throw std::invalid_argument("z_test: success counts out of range");
  const double pooled = static_cast<double>(s0 + s1) / (n0 + n1);
  TestResult r;
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.reject = false;
    return r;
  }
  const double p0 = static_cast<double>(s0) / n0;
  const double p1 = static_cast<double>(s1) / n1;
  const double se =
      std::sqrt(pooled * (1.0 - pooled) * (1.0 / n0 + 1.0 / n1));
  r.statistic = (p0 - p1) / se;
  r.p_value = normal_two_sided_p(r.statistic);
  r.reject = r.p_value <= alpha;
  return r;
}

TestResult fisher_exact(int s0, int n0, int s1, int n1, double alpha) {
  if (n0 < 0 || n1 < 0 || n0 + n1 == 0)
    throw std::invalid_argument("fisher_exact: empty table");
  if (s0 < 0 || s0 > n0 || s1 < 0 || s1 > n1)
    throw std::invalid_argument("fisher_exact: success counts out of range");
  const int s = s0 + s1;
  const int n = n0 + n1;
  auto log_choose = [](int nn, int kk) {
    return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) -
           std::lgamma(nn - kk + 1.0);
  };
  const double log_denom = log_choose(n, s);
  const int x_lo = std::max(0, s - n1);
  const int x_hi = std::min(s, n0);
  const double log_p_obs =
      log_choose(n0, s0) + log_choose(n1, s1) - log_denom;
  double p = 0.0;
  for (int x = x_lo; x <= x_hi; ++x) {
    const double log_px =
        log_choose(n0, x) + log_choose(n1, s - x) - log_denom;
    if (log_px <= log_p_obs + 1e-7) p += std::exp(log_px);
  }
  TestResult r;
  r.statistic =
      (n1 > 0 ? static_cast<double>(s1) / n1 : 0.0) -
      (n0 > 0 ? static_cast<double>(s0) / n0 : 0.0);
  r.p_value = std::min(p, 1.0);
  r.reject = r.p_value <= alpha;
  return r;
}

double bonferroni_level(double alpha, int n_experimental) {
  if (n_experimental < 1)
    throw std::invalid_argument("bonferroni_level: K must be >= 1");
  return alpha / n_experimental;
}

namespace {

struct GlmData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

GlmData build_design(const std::vector<PatientRecord>& records,
                     const GlmSpec& spec) {
  if (records.empty())
    throw std::invalid_argument("logistic fit: no records");
  const int n = static_cast<int>(records.size());
  int k = spec.n_experimental;
  if (spec.arms && k <= 0) {
    for (const PatientRecord& r : records) k = std::max(k, r.arm);
  }
  const int p = 1 + (spec.time ? 1 : 0) + (spec.covariate_z ? 1 : 0) +
                (spec.arms ? k : 0);
  GlmData d;
  d.x = Eigen::MatrixXd::Zero(n, p);
  d.y.resize(n);
  d.names.push_back("beta0");
  if (spec.time) d.names.push_back("beta_t");
  if (spec.covariate_z) d.names.push_back("beta_z");
  for (int a = 1; spec.arms && a <= k; ++a)
    d.names.push_back("beta_" + std::to_string(a));
  for (int i = 0; i < n; ++i) {
    const PatientRecord& r = records[i];
    int c = 0;
    d.x(i, c++) = 1.0;
    if (spec.time) d.x(i, c++) = static_cast<double>(r.stage - 1);
    if (spec.covariate_z) d.x(i, c++) = static_cast<double>(r.z);
    if (spec.arms && r.arm >= 1) {
      if (r.arm > k)
        throw std::invalid_argument("logistic fit: arm index exceeds K");
      d.x(i, c + r.arm - 1) = 1.0;
    }
    d.y[i] = static_cast<double>(r.outcome);
  }
  return d;
}

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (int i = 0; i < eta.size(); ++i) {
    ll += y[i] * eta[i] - log1pexp(eta[i]);
  }
  return ll;
}

Eigen::LDLT<Eigen::MatrixXd> info_ldlt(const Eigen::MatrixXd& info) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    // Singular information (e.g. an arm without patients): nudge onto the
    // ridge so the iteration stays defined; the fit is flagged elsewhere.
    Eigen::MatrixXd reg = info;
    reg.diagonal().array() += 1e-8;
    ldlt.compute(reg);
  }
  return ldlt;
}

double penalized_log_likelihood(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  Eigen::VectorXd w(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    ll += y[i] * eta[i] - log1pexp(eta[i]);
    const double mu = expit(eta[i]);
    w[i] = mu * (1.0 - mu);
  }
  const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
  const auto ldlt = info_ldlt(info);
  return ll + 0.5 * ldlt.vectorD().array().log().sum();
}

// Complete or quasi-complete separation shows up in this design as a
// treatment group whose observed outcomes are all equal.
bool perfect_arm_prediction(const std::vector<PatientRecord>& records,
                            const GlmSpec& spec) {
  int k = spec.n_experimental;
  for (const PatientRecord& r : records) k = std::max(k, r.arm);
  std::vector<int> succ(k + 1, 0), tot(k + 1, 0);
  for (const PatientRecord& r : records) {
    tot[r.arm] += 1;
    succ[r.arm] += r.outcome;
  }
  for (int a = 0; a <= k; ++a) {
    if (tot[a] == 0) continue;
    if (succ[a] == 0 || succ[a] == tot[a]) return true;
  }
  return false;
}

void wald_inference(GlmFit& fit, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& beta) {
  Eigen::VectorXd w(x.rows());
  const Eigen::VectorXd eta = x * beta;
  for (int i = 0; i < eta.size(); ++i) {
    const double mu = expit(eta[i]);
    w[i] = mu * (1.0 - mu);
  }
  const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
  const Eigen::MatrixXd cov = info_ldlt(info).solve(
      Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const int p = static_cast<int>(beta.size());
  fit.std_errors.resize(p);
  fit.p_values.resize(p);
  for (int j = 0; j < p; ++j) {
    fit.std_errors[j] = std::sqrt(std::max(cov(j, j), 0.0));
    fit.p_values[j] = fit.std_errors[j] > 0.0
                          ? normal_two_sided_p(beta[j] / fit.std_errors[j])
                          : 1.0;
  }
}

}  // namespace

GlmFit fit_logistic_mle(const std::vector<PatientRecord>& records,
                        const GlmSpec& spec) {
  const GlmData d = build_design(records, spec);
  const int p = static_cast<int>(d.x.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = log_likelihood(d.x, d.y, beta);

  GlmFit fit;
  fit.names = d.names;
  fit.penalized = false;
  fit.separation_detected = perfect_arm_prediction(records, spec);

  constexpr int kMaxIter = 25;
  bool grad_small = false;
  for (int it = 1; it <= kMaxIter; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd eta = d.x * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (int i = 0; i < eta.size(); ++i) {
      mu[i] = expit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::VectorXd grad = d.x.transpose() * (d.y - mu);
    if (grad.cwiseAbs().maxCoeff() < 1e-6) {
      grad_small = true;
      break;
    }
    const Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    const Eigen::VectorXd delta = info_ldlt(info).solve(grad);
    double step = 1.0;
    Eigen::VectorXd cand = beta + delta;
    double ll_cand = log_likelihood(d.x, d.y, cand);
    int halvings = 0;
    while (ll_cand < ll && halvings < 40) {
      step *= 0.5;
      cand = beta + step * delta;
      ll_cand = log_likelihood(d.x, d.y, cand);
      ++halvings;
    }
    const double rel = std::abs(ll_cand - ll) / (std::abs(ll_cand) + 0.1);
    beta = cand;
    ll = ll_cand;
    if (rel < 1e-8) break;  // deviance stalled (typical under separation)
  }

  fit.coefficients = beta;
  if (!grad_small) {
    const Eigen::VectorXd eta = d.x * beta;
    Eigen::VectorXd mu(eta.size());
    for (int i = 0; i < eta.size(); ++i) mu[i] = expit(eta[i]);
    grad_small =
        (d.x.transpose() * (d.y - mu)).cwiseAbs().maxCoeff() < 1e-6;
  }
  fit.converged = grad_small && !fit.separation_detected;
  wald_inference(fit, d.x, beta);
  return fit;
}

GlmFit fit_logistic_firth(const std::vector<PatientRecord>& records,
                          const GlmSpec& spec) {
  const GlmData d = build_design(records, spec);
  const int n = static_cast<int>(d.x.rows());
  const int p = static_cast<int>(d.x.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double pll = penalized_log_likelihood(d.x, d.y, beta);

  GlmFit fit;
  fit.names = d.names;
  fit.penalized = true;
  fit.separation_detected = perfect_arm_prediction(records, spec);

  constexpr int kMaxIter = 100;
  for (int it = 1; it <= kMaxIter; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd eta = d.x * beta;
    Eigen::VectorXd mu(n), w(n);
    for (int i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    const auto ldlt = info_ldlt(info);
    // Hat diagonal h_i = w_i x_i' I^{-1} x_i gives the Jeffreys-prior score
    // adjustment (y - mu) + h (1/2 - mu).
    const Eigen::MatrixXd solved = ldlt.solve(d.x.transpose());
    Eigen::VectorXd adj(n);
    for (int i = 0; i < n; ++i) {
      const double h = w[i] * d.x.row(i).dot(solved.col(i));
      adj[i] = (d.y[i] - mu[i]) + h * (0.5 - mu[i]);
    }
    const Eigen::VectorXd score = d.x.transpose() * adj;
    if (score.cwiseAbs().maxCoeff() < 1e-6) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd delta = ldlt.solve(score);
    double step = 1.0;
    Eigen::VectorXd cand = beta + delta;
    double pll_cand = penalized_log_likelihood(d.x, d.y, cand);
    int halvings = 0;
    while (pll_cand < pll && halvings < 40) {
      step *= 0.5;
      cand = beta + step * delta;
      pll_cand = penalized_log_likelihood(d.x, d.y, cand);
      ++halvings;
    }
    beta = cand;
    pll = pll_cand;
  }

  fit.coefficients = beta;
  wald_inference(fit, d.x, beta);
  return fit;
}

bool detect_separation(const std::vector<PatientRecord>& records,
                       const GlmSpec& spec) {
  if (perfect_arm_prediction(records, spec)) return true;
  const GlmData d = build_design(records, spec);
  const int p = static_cast<int>(d.x.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = log_likelihood(d.x, d.y, beta);
  Eigen::VectorXd grad(p);
  for (int it = 1; it <= 50; ++it) {
    const Eigen::VectorXd eta = d.x * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (int i = 0; i < eta.size(); ++i) {
      mu[i] = expit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    grad = d.x.transpose() * (d.y - mu);
    if (grad.cwiseAbs().maxCoeff() < 1e-10) break;
    const Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    const Eigen::VectorXd delta = info_ldlt(info).solve(grad);
    Eigen::VectorXd cand = beta + delta;
    double ll_cand = log_likelihood(d.x, d.y, cand);
    double step = 1.0;
    int halvings = 0;
    while (ll_cand < ll && halvings < 40) {
      step *= 0.5;
      cand = beta + step * delta;
      ll_cand = log_likelihood(d.x, d.y, cand);
      ++halvings;
    }
    beta = cand;
    ll = ll_cand;
  }
  return beta.cwiseAbs().maxCoeff() > 10.0 &&
         grad.cwiseAbs().maxCoeff() > 1e-4;
}

namespace {

double combined_statistic(const Eigen::VectorXd& z, bool two_sided) {
  // K = 1 reduces to the plain (absolute) z statistic.  For several arms the
  // most significant comparison carries the test.
  if (two_sided) return z.cwiseAbs().maxCoeff();
  return z.minCoeff();  // most negative = experimental most superior
}

bool at_least_as_extreme(double stat, double observed, bool two_sided) {
  if (two_sided) return stat >= observed - 1e-12;
  return stat <= observed + 1e-12;
}

}  // namespace

TestResult randomization_test(const TrialResult& observed,
                              const AllocationRuleSpec& rule, int n_resamples,
                              double alpha, Rng& rng, bool two_sided) {
  if (n_resamples < 1)
    throw std::invalid_argument("randomization_test: need M >= 1 resamples");
  const int stages = observed.stages;
  const int block = observed.block_size;
  const int n_arms = observed.n_experimental + 1;
  const int total = stages * block;
  if (static_cast<int>(observed.records.size()) != total)
    throw std::invalid_argument("randomization_test: record count != b*J");

  const double obs_stat = combined_statistic(observed.z_statistics, two_sided);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int n_extreme = 0;
  std::vector<ArmState> states(n_arms);
  Eigen::VectorXd z(observed.n_experimental);
  for (int m = 0; m < n_resamples; ++m) {
    for (int k = 0; k < n_arms; ++k) {
      states[k] = ArmState{0, 0, observed.final_states[k].prior_a,
                           observed.final_states[k].prior_b};
    }
    for (int j = 1; j <= stages; ++j) {
      const Eigen::VectorXd pi =
          j == 1 ? cr_probabilities(observed.n_experimental)
                 : block_probabilities(rule, states, j, block, total, rng);
      for (int i = 0; i < block; ++i) {
        // Allocation redrawn under the rule; the outcome stays the one
        // observed for this patient slot.
        double u = unif(rng);
        int arm = n_arms - 1;
        double cum = 0.0;
        for (int k = 0; k < n_arms; ++k) {
          cum += pi[k];
          if (u < cum) {
            arm = k;
            break;
          }
        }
        const int y = observed.records[(j - 1) * block + i].outcome;
        if (y == 1) {
          states[arm].successes += 1;
        } else {
          states[arm].failures += 1;
        }
      }
    }
    const int n0 = states[0].n();
    for (int k = 1; k < n_arms; ++k) {
      const int nk = states[k].n();
      z[k - 1] = (n0 >= 1 && nk >= 1)
                     ? z_test(states[0].successes, n0, states[k].successes, nk)
                           .statistic
                     : 0.0;
    }
    if (at_least_as_extreme(combined_statistic(z, two_sided), obs_stat,
                            two_sided))
      ++n_extreme;
  }

  TestResult r;
  r.statistic = obs_stat;
  r.p_value = (1.0 + n_extreme) / (n_resamples + 1.0);
  r.reject = r.p_value <= alpha;
  return r;
}

}  // namespace rarsim
