#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "rarsim/gittins.hpp"

using namespace rarsim;

TEST_CASE("myopic limit: index approaches s/(s+f) as the discount vanishes") {
  const double nu = gittins_index(1, 1, 1e-3, 1e-8);
  CHECK(nu >= 0.5);
  CHECK(nu == doctest::Approx(0.5).epsilon(2e-3));
  const double nu31 = gittins_index(3, 1, 1e-3, 1e-8);
  CHECK(nu31 == doctest::Approx(0.75).epsilon(2e-3));
}

TEST_CASE("index of (1,1) at discount 0.99 matches the grid-search oracle") {
  const double nu = gittins_index(1, 1, 0.99, 1e-6);
  const double ref = oracle::gittins_grid_search(1, 1, 0.99, 1e-5);
  CHECK(nu == doctest::Approx(ref).epsilon(1e-4));
}

TEST_CASE("small-grid indices match the grid-search oracle") {
  // Modest discount keeps the oracle's horizon short; the comparison covers
  // a 6x6 posterior grid here and the full 10x10 grid in the acceptance run.
  const double d = 0.9;
  const GittinsTable table = compute_gittins_table(d, 12, 1e-6);
  for (int a = 1; a <= 6; ++a) {
    for (int b = 1; b <= 6; ++b) {
      const double ref = oracle::gittins_grid_search(a, b, d, 1e-5);
      CHECK(table.at(a, b) == doctest::Approx(ref).epsilon(1e-4));
    }
  }
}

TEST_CASE("table monotonicity and myopic dominance") {
  const GittinsTable table = compute_gittins_table(0.95, 20, 1e-6);
  for (int a = 1; a < 20; ++a) {
    for (int b = 1; a + b <= 19; ++b) {
      const double here = table.at(a, b);
      CHECK(here > 0.0);
      CHECK(here < 1.0);
      CHECK(here >= static_cast<double>(a) / (a + b) - 1e-9);
      CHECK(table.at(a + 1, b) >= here - 1e-9);
      CHECK(table.at(a, b + 1) <= here + 1e-9);
    }
  }
  CHECK(table.at(2, 1) > table.at(1, 2));
}

TEST_CASE("exploration bonus shrinks along a diagonal") {
  const GittinsTable table = compute_gittins_table(0.95, 42, 1e-6);
  // states with mean 1/2: (k, k)
  double last = table.at(1, 1) - 0.5;
  for (int k = 2; k <= 20; ++k) {
    const double bonus = table.at(k, k) - 0.5;
    CHECK(bonus <= last + 1e-9);
    last = bonus;
  }
}

TEST_CASE("tightening the tolerance moves no index by more than tol") {
  const GittinsTable coarse = compute_gittins_table(0.9, 10, 1e-4);
  const GittinsTable fine = compute_gittins_table(0.9, 10, 1e-6);
  for (int a = 1; a < 10; ++a) {
    for (int b = 1; a + b <= 10; ++b) {
      CHECK(std::abs(coarse.at(a, b) - fine.at(a, b)) <= 1e-4);
    }
  }
}

TEST_CASE("serialization round-trips bit-exactly") {
  const GittinsTable table = compute_gittins_table(0.99, 8, 1e-5);
  const std::string path = "gittins_roundtrip_test.tbl";
  save_gittins_table(table, path);
  const GittinsTable loaded = load_gittins_table(path);
  CHECK(loaded.discount() == table.discount());
  CHECK(loaded.max_state() == table.max_state());
  CHECK(loaded.tol() == table.tol());
  REQUIRE(loaded.values().size() == table.values().size());
  for (std::size_t i = 0; i < table.values().size(); ++i) {
    CHECK(loaded.values()[i] == table.values()[i]);  // bitwise
  }
  CHECK(loaded.at(1, 1) == table.at(1, 1));
  std::filesystem::remove(path);
}

TEST_CASE("lookups outside the table are fatal") {
  const GittinsTable table = compute_gittins_table(0.9, 6, 1e-4);
  CHECK_THROWS_AS(table.at(0, 1), std::out_of_range);
  CHECK_THROWS_AS(table.at(3, 4), std::out_of_range);
  CHECK(table.contains(3, 3));
  CHECK_FALSE(table.contains(6, 1));
}

TEST_CASE("threaded and serial table construction agree bitwise") {
  const GittinsTable serial = compute_gittins_table(0.95, 14, 1e-5, 1);
  const GittinsTable threaded = compute_gittins_table(0.95, 14, 1e-5, 4);
  REQUIRE(serial.values().size() == threaded.values().size());
  for (std::size_t i = 0; i < serial.values().size(); ++i) {
    CHECK(serial.values()[i] == threaded.values()[i]);
  }
}
