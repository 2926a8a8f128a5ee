#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rarsim {

/// Precomputed Gittins indices for a Bernoulli arm under a Beta posterior,
/// indexed by posterior counts (a, b) with a, b >= 1 and a + b <= max_state.
/// Under uniform priors the posterior counts are (1 + successes,
/// 1 + failures), so a table with max_state = 2 + T covers every state
/// reachable in a trial of size T.
class GittinsTable {
 public:
  GittinsTable() = default;
  GittinsTable(double discount, int max_state, double tol,
               std::vector<double> values);

  double discount() const { return discount_; }
  int max_state() const { return max_state_; }
  double tol() const { return tol_; }
  const std::vector<double>& values() const { return values_; }

  bool contains(int a, int b) const {
    return a >= 1 && b >= 1 && a + b <= max_state_;
  }

  /// Stored index for posterior counts (a, b); throws std::out_of_range if
  /// the state is not covered.
  double at(int a, int b) const;

  static std::size_t size_for(int max_state);
  static std::size_t flat_index(int max_state, int a, int b) {
    // Row a holds b = 1 .. max_state - a.
    const std::size_t row_offset = static_cast<std::size_t>(a - 1) * max_state -
                                   static_cast<std::size_t>(a) * (a - 1) / 2;
    return row_offset + static_cast<std::size_t>(b - 1);
  }

 private:
  double discount_ = 0.0;
  int max_state_ = 0;
  double tol_ = 0.0;
  std::vector<double> values_;
};

/// Calibration value of a single state: the standing reward rate lambda at
/// which playing the Beta(a, b) arm and retiring on lambda/(1-d) are
/// indifferent.  Bisection over lambda; each evaluation is a backward pass
/// over the outcome tree truncated at a horizon H with d^H/(1-d) < tol.
/// The optional bracket narrows the initial bisection interval.
double gittins_index(int a, int b, double discount, double tol,
                     double bracket_lo = -1.0, double bracket_hi = -1.0);

/// Dense table of gittins_index over all states with a + b <= max_state.
/// Bisections are independent, so states are processed in parallel;
/// monotonicity in (a, b) provides warm brackets from neighbouring states.
GittinsTable compute_gittins_table(double discount, int max_state, double tol,
                                   int n_threads = 0);

/// Versioned binary table file; values round-trip bit-exactly.
void save_gittins_table(const GittinsTable& table, const std::string& path);
GittinsTable load_gittins_table(const std::string& path);

}  // namespace rarsim
