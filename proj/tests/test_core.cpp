#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mfwf/config.hpp"
#include "mfwf/core.hpp"
#include "mfwf/csv.hpp"
#include "mfwf/ek_metric.hpp"
#include "mfwf/parallel.hpp"
#include "mfwf/random.hpp"
#include "mfwf/stats.hpp"

using namespace mfwf;

TEST(EmpiricalMean, Cases) {
  EXPECT_EQ(empirical_mean(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_EQ(empirical_mean(std::vector<double>{1, 1}), 1.0);
  EXPECT_NEAR(empirical_mean(std::vector<double>{0.2, 0.4, 0.6}), 0.4, 1e-15);
  EXPECT_THROW(empirical_mean(std::vector<double>{}), std::invalid_argument);
}

TEST(ModelParams, Validation) {
  ModelParams p{1, 1, 1, 1, 10};
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.mutation_per_site(), 0.1);
  p.c = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.c = 1;
  p.n_sites = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(DropletMeasure, Cases) {
  Configuration zero = Configuration::all_type1(3);
  std::vector<double> labels{0.1, 0.5, 0.9};
  EXPECT_TRUE(droplet_measure(zero, labels).empty());

  Configuration two{{0.0, 0.5}, 0.0};
  std::vector<double> l2{0.1, 0.9};
  AtomicMeasure m = droplet_measure(two, l2);
  ASSERT_EQ(m.atoms.size(), 1u);
  EXPECT_EQ(m.atoms[0], (Atom{0.9, 0.5}));

  Configuration any{{0.3, 0.0, 0.7, 0.2}, 1.0};
  std::vector<double> l4{0.0, 0.3, 0.6, 1.0};
  EXPECT_NEAR(droplet_measure(any, l4).total_mass(), total_mass(any), 1e-15);
  EXPECT_THROW(droplet_measure(any, l2), std::invalid_argument);
}

TEST(Palm, Cases) {
  auto a = palm_estimate(std::vector<double>{0.0, 1.0});
  ASSERT_EQ(a.values.size(), 1u);
  EXPECT_EQ(a.values[0], 1.0);
  EXPECT_EQ(a.weights[0], 1.0);

  auto b = palm_estimate(std::vector<double>{0.5, 0.5});
  ASSERT_EQ(b.values.size(), 1u);
  EXPECT_EQ(b.values[0], 0.5);

  auto c = palm_estimate(std::vector<double>{0.25, 0.75});
  ASSERT_EQ(c.values.size(), 2u);
  EXPECT_NEAR(c.weights[0], 0.25, 1e-15);
  EXPECT_NEAR(c.weights[1], 0.75, 1e-15);
  EXPECT_THROW(palm_estimate(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(EkMetric, IdentitySymmetryAndEmpty) {
  AtomicMeasure mu{{{0.1, 0.3}, {0.5, 0.2}, {0.8, 0.7}}};
  AtomicMeasure nu{{{0.15, 0.4}, {0.9, 0.1}}};
  EXPECT_EQ(ek_distance(mu, mu), 0.0);
  EXPECT_EQ(ek_distance(mu, nu), ek_distance(nu, mu));

  // Point mass 1 at 0.5 against the empty measure: Prohorov part is 1
  // (no mass can be matched), pair part is 1 * 1 * psi(0) = 1 for every eps.
  AtomicMeasure delta{{{0.5, 1.0}}};
  double d = ek_distance(delta, AtomicMeasure{});
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_NEAR(d, 2.0, 1e-12);
}

TEST(EkMetric, ProhorovShift) {
  // A unit atom moved by 0.1: the distance is the shift itself.
  AtomicMeasure a{{{0.2, 1.0}}}, b{{{0.3, 1.0}}};
  EXPECT_NEAR(prohorov_distance(a, b), 0.1, 1e-12);
  // Small mass moved far: bounded by the unmatched mass.
  AtomicMeasure c{{{0.0, 0.05}}}, e{{{1.0, 0.05}}};
  EXPECT_NEAR(prohorov_distance(c, e), 0.05, 1e-12);
}

TEST(EkMetric, RandomMeasuresSymmetricAndTriangle) {
  // Unequal total masses; breakpoints hit by floating differences used to break symmetry.
  Stream rng = derive_stream({9, 0, "ek"});
  auto draw = [&] {
    AtomicMeasure m;
    for (int i = 0; i < 6; ++i) m.atoms.push_back({uniform01(rng), 0.2 * uniform01(rng)});
    return m;
  };
  for (int trial = 0; trial < 200; ++trial) {
    AtomicMeasure a = draw(), b = draw(), c = draw();
    EXPECT_EQ(prohorov_distance(a, b), prohorov_distance(b, a));
    EXPECT_EQ(ek_distance(a, b), ek_distance(b, a));
    EXPECT_GT(ek_distance(a, b), 0.0);
    EXPECT_LE(ek_distance(a, c), ek_distance(a, b) + ek_distance(b, c) + 1e-12);
  }
}

TEST(EkMetric, KernelValidation) {
  EXPECT_THROW(validate_kernel([](double r) { return r; }), std::invalid_argument);
  EXPECT_NO_THROW(validate_kernel(default_kernel));
}

TEST(Seeds, Determinism) {
  SeedSpec s{42, 3, "forward"};
  Stream a = derive_stream(s), b = derive_stream(s);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  SeedSpec back = SeedSpec::parse(s.to_string());
  EXPECT_EQ(back, s);
  Stream c = derive_stream(back);
  Stream d = derive_stream(s);
  EXPECT_EQ(c(), d());
  EXPECT_EQ(SeedSpec::parse("7/1/a/b").stream_label, "a/b");
  EXPECT_THROW(SeedSpec::parse("7"), std::invalid_argument);
}

TEST(Seeds, ReplicasDiffer) {
  std::set<std::uint64_t> first;
  for (int i = 0; i < 10000; ++i) first.insert(derive_stream({1, i, "x"})());
  EXPECT_EQ(first.size(), 10000u);
  EXPECT_NE(derive_stream({1, 0, "a"})(), derive_stream({1, 0, "b"})());
}

TEST(Atoms, CsvRoundTrip) {
  AtomicMeasure m{{{0.125, 0.1}, {0.7, 1.0 / 3.0}}};
  std::stringstream ss;
  write_atoms_csv(ss, m);
  AtomicMeasure back = read_atoms_csv(ss);
  ASSERT_EQ(back.atoms.size(), 2u);
  EXPECT_EQ(back.atoms[1].mass, 1.0 / 3.0);
  std::stringstream bad("location,mass\n0.5;1\n");
  EXPECT_THROW(read_atoms_csv(bad), std::invalid_argument);
}

TEST(Config, ParsesSectionsAndRequiresRates) {
  Config cfg = Config::from_string("[model]\nc = 1\ns = 2\nd = 0.5\n\n[emergence]\nn_list = 64, 256\n");
  EXPECT_EQ(cfg.require_double("model", "s"), 2.0);
  EXPECT_EQ(cfg.get_list("emergence", "n_list", {}), (std::vector<double>{64, 256}));
  EXPECT_THROW(model_from_config(cfg, {"c", "s", "d", "m"}, false), ConfigError);
  ModelParams p = model_from_config(cfg, {"c", "s", "d"}, false);
  EXPECT_EQ(p.d, 0.5);
  EXPECT_THROW(model_from_config(cfg, {"c"}, true), ConfigError);
  EXPECT_THROW(Config::from_string("[model]\nc = abc\n").require_double("model", "c"), ConfigError);
  EXPECT_THROW(Config::from_string("[model\nc=1\n"), ConfigError);
  EXPECT_THROW(model_from_config(Config::from_string("[model]\nc=-1\ns=1\nd=1\n"), {"c", "s", "d"}, false), ConfigError);
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::nan("")), "");
  Table t{"t", {"a", "b"}, {}};
  t.add({1.0, 0.5});
  EXPECT_THROW(t.add({1.0}), std::logic_error);
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), "a,b\n1,0.5\n");
}

TEST(Stats, Basics) {
  std::vector<double> x{1, 2, 3, 4};
  Summary s = summarize(x);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(median(x), 2.5);
  std::vector<double> y{3, 5, 7, 9};
  LinearFit f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  std::vector<double> p{0.5, 0.5}, q{1.0};
  EXPECT_DOUBLE_EQ(total_variation(p, q), 0.5);
  EXPECT_DOUBLE_EQ(ks_statistic({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(ks_statistic({1, 2}, {3, 4}), 1.0);
}

TEST(Parallel, OrderIndependentOfWorkers) {
  auto f = [](std::size_t i) {
    Stream r = derive_stream({9, static_cast<std::int64_t>(i), "p"});
    return uniform01(r);
  };
  auto one = parallel_map(50, f, 1);
  auto four = parallel_map(50, f, 4);
  EXPECT_EQ(one, four);
  EXPECT_THROW(parallel_map(5, [](std::size_t i) -> int { if (i == 3) throw std::runtime_error("x"); return 0; }, 3), std::runtime_error);
}
