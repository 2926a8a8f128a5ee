#include "rarsim/gittins.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace rarsim {

GittinsTable::GittinsTable(double discount, int max_state, double tol,
                           std::vector<double> values)
    : discount_(discount),
      max_state_(max_state),
      tol_(tol),
      values_(std::move(values)) {
  if (!(discount_ > 0.0 && discount_ < 1.0))
    throw std::invalid_argument("GittinsTable: discount must lie in (0,1)");
  if (max_state_ < 2)
    throw std::invalid_argument("GittinsTable: max_state must be >= 2");
  if (values_.size() != size_for(max_state_))
    throw std::invalid_argument("GittinsTable: value count mismatch");
}

std::size_t GittinsTable::size_for(int max_state) {
  // Sum over a = 1..max_state-1 of (max_state - a) states.
  const std::size_t n = static_cast<std::size_t>(max_state);
  return n * (n - 1) / 2;
}

double GittinsTable::at(int a, int b) const {
  if (!contains(a, b)) {
    throw std::out_of_range("GittinsTable: state (" + std::to_string(a) + "," +
                            std::to_string(b) + ") outside table with max n " +
                            std::to_string(max_state_));
  }
  return values_[flat_index(max_state_, a, b)];
}

namespace {

int horizon_for(double discount, double tol) {
  // Smallest H with d^H / (1 - d) < tol; the value of anything beyond depth
  // H is below tol, so the backward pass can stop there.
  const double target = tol * (1.0 - discount);
  const int h =
      static_cast<int>(std::ceil(std::log(target) / std::log(discount)));
  return h < 1 ? 1 : h;
}

// Value of playing the Beta(a,b) arm optimally against retirement on a
// standing reward lambda/(1-d), minus the retirement value.  One backward
// pass over depths H-1..0; level t holds the states (a+i, b+t-i).
double continuation_minus_retire(int a, int b, double lambda, double discount,
                                 int horizon, std::vector<double>& buf_next,
                                 std::vector<double>& buf_cur) {
  const double retire = lambda / (1.0 - discount);
  buf_next.assign(static_cast<std::size_t>(horizon) + 1, retire);
  buf_cur.resize(static_cast<std::size_t>(horizon) + 1);
  const double n0 = static_cast<double>(a + b);
  for (int t = horizon - 1; t >= 1; --t) {
    const double inv_n = 1.0 / (n0 + t);
    for (int i = 0; i <= t; ++i) {
      const double p = (a + i) * inv_n;
      const double cont = p * (1.0 + discount * buf_next[i + 1]) +
                          (1.0 - p) * discount * buf_next[i];
      buf_cur[i] = cont > retire ? cont : retire;
    }
    buf_cur.swap(buf_next);
  }
  const double p = a / n0;
  const double cont = p * (1.0 + discount * buf_next[1]) +
                      (1.0 - p) * discount * buf_next[0];
  return cont - retire;
}

}  // namespace

double gittins_index(int a, int b, double discount, double tol,
                     double bracket_lo, double bracket_hi) {
  if (a < 1 || b < 1)
    throw std::invalid_argument("gittins_index: counts must be >= 1");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::invalid_argument("gittins_index: discount must lie in (0,1)");
  if (!(tol > 0.0))
    throw std::invalid_argument("gittins_index: tol must be positive");

  const int horizon = horizon_for(discount, tol);
  std::vector<double> buf_next;
  std::vector<double> buf_cur;

  // The index dominates the posterior mean and lives below 1.
  const double mean = static_cast<double>(a) / (a + b);
  double lo = bracket_lo >= 0.0 ? bracket_lo : mean;
  double hi = bracket_hi >= 0.0 ? bracket_hi : 1.0;
  if (lo < mean) lo = mean;
  if (hi > 1.0) hi = 1.0;
  if (hi < lo) hi = 1.0;

  int guard = 0;
  while (hi - lo > tol) {
    if (++guard > 200) {
      throw std::runtime_error(
          "gittins_index: bisection failed to converge (a=" +
          std::to_string(a) + ", b=" + std::to_string(b) +
          ", interval=" + std::to_string(hi - lo) + ")");
    }
    const double mid = 0.5 * (lo + hi);
    const double diff = continuation_minus_retire(a, b, mid, discount, horizon,
                                                  buf_next, buf_cur);
    if (diff > 0.0) {
      lo = mid;  // playing still preferred: index above mid
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

GittinsTable compute_gittins_table(double discount, int max_state, double tol,
                                   int n_threads) {
  if (max_state < 2)
    throw std::invalid_argument("compute_gittins_table: max_state must be >= 2");
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 0) n_threads = 1;
  }

  std::vector<double> values(GittinsTable::size_for(max_state), 0.0);

  // Diagonals a+b = n are processed from the deepest up so each state can
  // start its bisection inside [index(a, b+1), index(a+1, b)].
  for (int n = max_state; n >= 2; --n) {
    const int n_states = n - 1;  // a = 1..n-1
    std::atomic<int> next{1};
    auto worker = [&]() {
      for (;;) {
        const int a = next.fetch_add(1);
        if (a > n_states) break;
        const int b = n - a;
        double lo = -1.0;
        double hi = -1.0;
        if (n < max_state) {
          lo = values[GittinsTable::flat_index(max_state, a, b + 1)];
          hi = values[GittinsTable::flat_index(max_state, a + 1, b)];
          // Guard against brackets degraded by the tol-level noise of the
          // neighbouring bisections.
          lo -= tol;
          hi += tol;
          if (lo < 0.0) lo = 0.0;
          if (hi > 1.0) hi = 1.0;
        }
        values[GittinsTable::flat_index(max_state, a, b)] =
            gittins_index(a, b, discount, tol, lo, hi);
      }
    };
    if (n_threads == 1 || n_states == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      const int used = n_threads < n_states ? n_threads : n_states;
      pool.reserve(used);
      for (int t = 0; t < used; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
  }
  return GittinsTable(discount, max_state, tol, std::move(values));
}

namespace {

constexpr char kMagic[8] = {'R', 'A', 'R', 'G', 'I', 'T', 'T', '1'};

template <class T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_gittins_table(const GittinsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, table.discount());
  const std::uint64_t n = static_cast<std::uint64_t>(table.max_state());
  write_raw(out, n);
  write_raw(out, table.tol());
  const std::uint64_t count = table.values().size();
  write_raw(out, count);
  out.write(reinterpret_cast<const char*>(table.values().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

GittinsTable load_gittins_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open Gittins table: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a Gittins table file: " + path);
  double discount = 0.0;
  std::uint64_t max_state = 0;
  double tol = 0.0;
  std::uint64_t count = 0;
  read_raw(in, discount);
  read_raw(in, max_state);
  read_raw(in, tol);
  read_raw(in, count);
  if (!in || count != GittinsTable::size_for(static_cast<int>(max_state)))
    throw std::runtime_error("corrupt Gittins table header: " + path);
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated Gittins table: " + path);
  return GittinsTable(discount, static_cast<int>(max_state), tol,
                      std::move(values));
}

}  // namespace rarsim
