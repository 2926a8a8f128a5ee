#include "rarsim/allocation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rarsim {

const char* rule_name(RuleKind kind) {
  switch (kind) {
    case RuleKind::CR: return "CR";
    case RuleKind::TS: return "TS";
    case RuleKind::RSIHR: return "RSIHR";
    case RuleKind::FLGI: return "FLGI";
    case RuleKind::CFLGI: return "CFLGI";
  }
  return "?";
}

RuleKind rule_from_name(const std::string& name) {
  if (name == "CR") return RuleKind::CR;
  if (name == "TS") return RuleKind::TS;
  if (name == "RSIHR") return RuleKind::RSIHR;
  if (name == "FLGI") return RuleKind::FLGI;
  if (name == "CFLGI") return RuleKind::CFLGI;
  throw std::invalid_argument("unknown allocation rule: " + name);
}

Eigen::VectorXd cr_probabilities(int n_experimental) {
  if (n_experimental < 1)
    throw std::invalid_argument("cr_probabilities: K must be >= 1");
  const int n_arms = n_experimental + 1;
  return Eigen::VectorXd::Constant(n_arms, 1.0 / n_arms);
}

Eigen::VectorXd ts_probabilities(const std::vector<ArmState>& states,
                                 double aggressiveness, int n_draws, Rng& rng) {
  const int n_arms = static_cast<int>(states.size());
  if (n_arms < 2) throw std::invalid_argument("ts_probabilities: need >= 2 arms");
  if (aggressiveness < 0.0)
    throw std::invalid_argument("ts_probabilities: aggressiveness must be >= 0");
  if (n_draws < 1)
    throw std::invalid_argument("ts_probabilities: n_draws must be >= 1");

  Eigen::VectorXd wins = Eigen::VectorXd::Zero(n_arms);
  std::vector<std::gamma_distribution<double>> ga;
  std::vector<std::gamma_distribution<double>> gb;
  ga.reserve(n_arms);
  gb.reserve(n_arms);
  for (const ArmState& s : states) {
    ga.emplace_back(s.posterior_a(), 1.0);
    gb.emplace_back(s.posterior_b(), 1.0);
  }
  std::uniform_int_distribution<int> pick_any(0, n_arms - 1);
  std::vector<double> draw(n_arms);
  for (int m = 0; m < n_draws; ++m) {
    int best = 0;
    int n_ties = 1;
    for (int k = 0; k < n_arms; ++k) {
      const double x = ga[k](rng);
      const double y = gb[k](rng);
      draw[k] = x / (x + y);
      if (k == 0) continue;
      if (draw[k] > draw[best]) {
        best = k;
        n_ties = 1;
      } else if (draw[k] == draw[best]) {
        // Ties are a measure-zero event for Beta draws; split uniformly.
        ++n_ties;
        if (std::uniform_int_distribution<int>(1, n_ties)(rng) == 1) best = k;
      }
    }
    wins[best] += 1.0;
  }
  // pow(0, 0) == 1, so aggressiveness 0 yields equal allocation even for
  // arms that never won a draw.
  Eigen::VectorXd pi(n_arms);
  for (int k = 0; k < n_arms; ++k) {
    pi[k] = std::pow(wins[k] / n_draws, aggressiveness);
  }
  pi /= pi.sum();
  return pi;
}

Eigen::VectorXd rsihr_probabilities(
    const Eigen::Ref<const Eigen::VectorXd>& rate_estimates) {
  const int n_arms = static_cast<int>(rate_estimates.size());
  if (n_arms < 2)
    throw std::invalid_argument("rsihr_probabilities: need >= 2 arms");
  for (int k = 0; k < n_arms; ++k) {
    if (!(rate_estimates[k] > 0.0 && rate_estimates[k] < 1.0))
      throw std::invalid_argument(
          "rsihr_probabilities: rate estimates must lie in (0,1)");
  }
  Eigen::VectorXd pi = rate_estimates.array().sqrt();
  pi /= pi.sum();
  return pi;
}

Eigen::VectorXd rsihr_probabilities(const std::vector<ArmState>& states) {
  const int n_arms = static_cast<int>(states.size());
  Eigen::VectorXd rates(n_arms);
  for (int k = 0; k < n_arms; ++k) {
    const ArmState& s = states[k];
    if (s.n() == 0) {
      rates[k] = s.prior_a / (s.prior_a + s.prior_b);
    } else {
      const double eps = 1.0 / (2.0 * s.n() + 2.0);
      const double mle = static_cast<double>(s.successes) / s.n();
      rates[k] = std::min(std::max(mle, eps), 1.0 - eps);
    }
  }
  return rsihr_probabilities(rates);
}

namespace {

struct InnerArm {
  int a;  // posterior success count
  int b;  // posterior failure count
  double index;
};

}  // namespace

Eigen::VectorXd flgi_probabilities(const std::vector<ArmState>& states,
                                   int block_size, const GittinsTable& table,
                                   int n_sims, Rng& rng) {
  const int n_arms = static_cast<int>(states.size());
  if (n_arms < 2)
    throw std::invalid_argument("flgi_probabilities: need >= 2 arms");
  if (block_size < 1)
    throw std::invalid_argument("flgi_probabilities: block size must be >= 1");
  if (n_sims < 1)
    throw std::invalid_argument("flgi_probabilities: n_sims must be >= 1");
  for (const ArmState& s : states) {
    const int a = static_cast<int>(s.posterior_a());
    const int b = static_cast<int>(s.posterior_b());
    if (s.posterior_a() != a || s.posterior_b() != b)
      throw std::invalid_argument(
          "flgi_probabilities: the Gittins table requires integer posterior "
          "counts");
    // The deepest state reachable inside the block must be covered.
    if (!table.contains(a, b) || a + b + block_size > table.max_state())
      throw std::runtime_error(
          "flgi_probabilities: Gittins table does not cover states reachable "
          "within the block (need max n >= " +
          std::to_string(a + b + block_size) + ")");
  }

  std::vector<InnerArm> base(n_arms);
  for (int k = 0; k < n_arms; ++k) {
    base[k].a = static_cast<int>(states[k].posterior_a());
    base[k].b = static_cast<int>(states[k].posterior_b());
    base[k].index = table.at(base[k].a, base[k].b);
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_arms);
  std::vector<InnerArm> arms(n_arms);
  for (int m = 0; m < n_sims; ++m) {
    arms = base;
    for (int t = 0; t < block_size; ++t) {
      int best = 0;
      int n_ties = 1;
      for (int k = 1; k < n_arms; ++k) {
        if (arms[k].index > arms[best].index) {
          best = k;
          n_ties = 1;
        } else if (arms[k].index == arms[best].index) {
          ++n_ties;
          if (std::uniform_int_distribution<int>(1, n_ties)(rng) == 1)
            best = k;
        }
      }
      counts[best] += 1.0;
      InnerArm& arm = arms[best];
      const double p_success =
          static_cast<double>(arm.a) / (arm.a + arm.b);  // posterior predictive
      if (unif(rng) < p_success) {
        ++arm.a;
      } else {
        ++arm.b;
      }
      arm.index = table.at(arm.a, arm.b);
    }
  }
  return counts / (static_cast<double>(n_sims) * block_size);
}

Eigen::VectorXd apply_control_floor(Eigen::VectorXd pi, double floor) {
  if (!(floor >= 0.0 && floor <= 1.0))
    throw std::invalid_argument("apply_control_floor: floor must lie in [0,1]");
  if (pi[0] >= floor) return pi;
  const double experimental = 1.0 - pi[0];
  const double scale = experimental > 0.0 ? (1.0 - floor) / experimental : 0.0;
  pi.tail(pi.size() - 1) *= scale;
  pi[0] = floor;
  return pi;
}

Eigen::VectorXd cflgi_probabilities(const std::vector<ArmState>& states,
                                    int block_size, const GittinsTable& table,
                                    int n_sims, double floor, Rng& rng) {
  return apply_control_floor(
      flgi_probabilities(states, block_size, table, n_sims, rng), floor);
}

Eigen::VectorXd block_probabilities(const AllocationRuleSpec& rule,
                                    const std::vector<ArmState>& states,
                                    int block_index, int block_size,
                                    int total_size, Rng& rng) {
  const int n_experimental = static_cast<int>(states.size()) - 1;
  switch (rule.kind) {
    case RuleKind::CR:
      return cr_probabilities(n_experimental);
    case RuleKind::TS: {
      const double c =
          static_cast<double>(block_index - 1) * block_size / (2.0 * total_size);
      return ts_probabilities(states, c, rule.ts_draws, rng);
    }
    case RuleKind::RSIHR:
      return rsihr_probabilities(states);
    case RuleKind::FLGI:
      if (rule.gittins == nullptr)
        throw std::runtime_error("FLGI rule requires a Gittins table");
      return flgi_probabilities(states, block_size, *rule.gittins,
                                rule.flgi_inner_sims, rng);
    case RuleKind::CFLGI: {
      if (rule.gittins == nullptr)
        throw std::runtime_error("CFLGI rule requires a Gittins table");
      const double floor = rule.control_floor >= 0.0
                               ? rule.control_floor
                               : 1.0 / (n_experimental + 1);
      return cflgi_probabilities(states, block_size, *rule.gittins,
                                 rule.flgi_inner_sims, floor, rng);
    }
  }
  throw std::logic_error("unreachable rule kind");
}

}  // namespace rarsim
