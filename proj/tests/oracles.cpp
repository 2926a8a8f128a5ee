#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rarsim::oracle {

namespace {

// Value-iteration gap between playing the arm and retiring on the standing
// reward, for one lambda, over the depth-H outcome triangle below (a, b).
double play_minus_retire(int a, int b, double lambda, double discount,
                         int horizon, std::vector<double>& next,
                         std::vector<double>& cur) {
  next.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  cur.resize(static_cast<std::size_t>(horizon) + 1);
  for (int t = horizon - 1; t >= 1; --t) {
    const double annuity =
        lambda * (1.0 - std::pow(discount, horizon - t)) / (1.0 - discount);
    const double total = a + b + t;
    for (int i = 0; i <= t; ++i) {
      const double p = (a + i) / total;
      const double play = p * (1.0 + discount * next[i + 1]) +
                          (1.0 - p) * discount * next[i];
      cur[i] = std::max(annuity, play);
    }
    cur.swap(next);
  }
  const double p = static_cast<double>(a) / (a + b);
  const double play =
      p * (1.0 + discount * next[1]) + (1.0 - p) * discount * next[0];
  const double retire =
      lambda * (1.0 - std::pow(discount, horizon)) / (1.0 - discount);
  return play - retire;
}

}  // namespace

double gittins_grid_search(int a, int b, double discount, double precision) {
  const double tail = precision * 0.1 * (1.0 - discount);
  const int horizon =
      std::max(2, static_cast<int>(std::ceil(std::log(tail) /
                                             std::log(discount))));
  std::vector<double> next, cur;
  double lo = 0.0;
  double hi = 1.0;
  double best = 0.5;
  // Coarse-to-fine sweep; the gap is monotone in lambda so the sign change
  // sits at the index.
  while ((hi - lo) / 64.0 > precision * 0.25) {
    const double step = (hi - lo) / 64.0;
    best = lo;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int g = 0; g <= 64; ++g) {
      const double lambda = lo + g * step;
      const double gap = std::abs(play_minus_retire(a, b, lambda, discount,
                                                    horizon, next, cur));
      if (gap < best_gap) {
        best_gap = gap;
        best = lambda;
      }
    }
    lo = std::max(0.0, best - step);
    hi = std::min(1.0, best + step);
  }
  return best;
}

double fisher_two_sided(int s0, int n0, int s1, int n1) {
  const int s = s0 + s1;
  const int n = n0 + n1;
  // Pascal's triangle keeps the binomials exact for the table sizes the
  // oracle sweeps (n <= 30).
  std::vector<std::vector<long double>> choose(n + 1);
  for (int i = 0; i <= n; ++i) {
    choose[i].assign(i + 1, 1.0L);
    for (int j = 1; j < i; ++j)
      choose[i][j] = choose[i - 1][j - 1] + choose[i - 1][j];
  }
  const long double denom = choose[n][s];
  const int x_lo = std::max(0, s - n1);
  const int x_hi = std::min(s, n0);
  const long double p_obs = choose[n0][s0] * choose[n1][s1] / denom;
  long double p = 0.0L;
  for (int x = x_lo; x <= x_hi; ++x) {
    const long double px = choose[n0][x] * choose[n1][s - x] / denom;
    if (px <= p_obs * (1.0L + 1e-7L)) p += px;
  }
  return static_cast<double>(std::min(p, 1.0L));
}

namespace {

struct EnumArm {
  int a;
  int b;
};

void flgi_recurse(std::vector<EnumArm>& arms, const GittinsTable& table,
                  int remaining, double weight, Eigen::VectorXd& counts) {
  if (remaining == 0) return;
  const int n_arms = static_cast<int>(arms.size());
  double best_index = -1.0;
  std::vector<int> ties;
  for (int k = 0; k < n_arms; ++k) {
    const double idx = table.at(arms[k].a, arms[k].b);
    if (idx > best_index) {
      best_index = idx;
      ties.assign(1, k);
    } else if (idx == best_index) {
      ties.push_back(k);
    }
  }
  const double split = weight / ties.size();
  for (int k : ties) {
    counts[k] += split;
    const double p =
        static_cast<double>(arms[k].a) / (arms[k].a + arms[k].b);
    arms[k].a += 1;
    flgi_recurse(arms, table, remaining - 1, split * p, counts);
    arms[k].a -= 1;
    arms[k].b += 1;
    flgi_recurse(arms, table, remaining - 1, split * (1.0 - p), counts);
    arms[k].b -= 1;
  }
}

}  // namespace

Eigen::VectorXd flgi_enumeration(const std::vector<ArmState>& states,
                                 int block_size, const GittinsTable& table) {
  std::vector<EnumArm> arms(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    arms[k].a = static_cast<int>(states[k].posterior_a());
    arms[k].b = static_cast<int>(states[k].posterior_b());
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(states.size());
  flgi_recurse(arms, table, block_size, 1.0, counts);
  return counts / block_size;
}

namespace {

double pooled_z(int s0, int n0, int s1, int n1) {
  if (n0 < 1 || n1 < 1) return 0.0;
  const double pooled = static_cast<double>(s0 + s1) / (n0 + n1);
  if (pooled <= 0.0 || pooled >= 1.0) return 0.0;
  const double se =
      std::sqrt(pooled * (1.0 - pooled) * (1.0 / n0 + 1.0 / n1));
  return (static_cast<double>(s0) / n0 - static_cast<double>(s1) / n1) / se;
}

struct RtEnum {
  const std::vector<int>* outcomes;
  int block_size;
  RuleKind rule;
  double observed;
  bool two_sided;
  double tail = 0.0;

  double pi1_for_block(int s0, int n0, int s1, int n1) const {
    if (rule == RuleKind::CR) return 0.5;
    // RSIHR with the engine's clamping; prior mean 0.5 without data.
    auto rate = [](int s, int n) {
      if (n == 0) return 0.5;
      const double eps = 1.0 / (2.0 * n + 2.0);
      return std::clamp(static_cast<double>(s) / n, eps, 1.0 - eps);
    };
    const double r0 = std::sqrt(rate(s0, n0));
    const double r1 = std::sqrt(rate(s1, n1));
    return r1 / (r0 + r1);
  }

  void recurse(int i, int s0, int n0, int s1, int n1, double pi1,
               double weight) {
    const int total = static_cast<int>(outcomes->size());
    if (i == total) {
      const double z = pooled_z(s0, n0, s1, n1);
      const bool extreme = two_sided ? std::abs(z) >= observed - 1e-12
                                     : z <= observed + 1e-12;
      if (extreme) tail += weight;
      return;
    }
    if (i % block_size == 0 && i > 0) pi1 = pi1_for_block(s0, n0, s1, n1);
    const int y = (*outcomes)[i];
    recurse(i + 1, s0 + y, n0 + 1, s1, n1, pi1, weight * (1.0 - pi1));
    recurse(i + 1, s0, n0, s1 + y, n1 + 1, pi1, weight * pi1);
  }
};

}  // namespace

double randomization_tail_enumeration(const std::vector<int>& outcomes,
                                      int block_size, RuleKind rule,
                                      double observed_statistic,
                                      bool two_sided) {
  if (rule != RuleKind::CR && rule != RuleKind::RSIHR)
    throw std::invalid_argument(
        "randomization_tail_enumeration: only CR and RSIHR have closed-form "
        "block probabilities");
  RtEnum ctx;
  ctx.outcomes = &outcomes;
  ctx.block_size = block_size;
  ctx.rule = rule;
  ctx.observed = two_sided ? std::abs(observed_statistic) : observed_statistic;
  ctx.two_sided = two_sided;
  ctx.recurse(0, 0, 0, 0, 0, 0.5, 1.0);
  return ctx.tail;
}

namespace {

double two_param_loglik(const std::vector<PatientRecord>& records, double b0,
                        double b1) {
  double ll = 0.0;
  for (const PatientRecord& r : records) {
    const double eta = b0 + (r.arm >= 1 ? b1 : 0.0);
    const double lse = eta > 35.0 ? eta
                       : eta < -35.0 ? std::exp(eta)
                                     : std::log1p(std::exp(eta));
    ll += r.outcome * eta - lse;
  }
  return ll;
}

}  // namespace

Eigen::Vector2d grid_mle_two_param(const std::vector<PatientRecord>& records) {
  double c0 = 0.0, c1 = 0.0;
  double half = 8.0;
  for (int stage = 0; stage < 7; ++stage) {
    double best = -std::numeric_limits<double>::infinity();
    double best0 = c0, best1 = c1;
    const double step = half / 20.0;
    for (int i = -20; i <= 20; ++i) {
      for (int j = -20; j <= 20; ++j) {
        const double b0 = c0 + i * step;
        const double b1 = c1 + j * step;
        const double ll = two_param_loglik(records, b0, b1);
        if (ll > best) {
          best = ll;
          best0 = b0;
          best1 = b1;
        }
      }
    }
    c0 = best0;
    c1 = best1;
    half = 2.0 * step;
  }
  return Eigen::Vector2d(c0, c1);
}

double firth_intercept_golden(int successes, int n) {
  auto penalized = [&](double b0) {
    const double mu = expit(b0);
    const double lse = b0 > 35.0 ? b0
                       : b0 < -35.0 ? std::exp(b0)
                                    : std::log1p(std::exp(b0));
    return successes * b0 - n * lse + 0.5 * std::log(n * mu * (1.0 - mu));
  };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -12.0, hi = 12.0;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = penalized(x1);
  double f2 = penalized(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = penalized(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = penalized(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace rarsim::oracle
