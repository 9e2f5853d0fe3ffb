#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nalu/metrics.hpp"

using namespace nalu;

namespace {

// Second moment of the add-task error: each of the 2d perturbed entries
// contributes eps^2 * E[x^2] independently.
double analytic_add_threshold(const DatasetSpec& spec, double eps) {
  const double lo = spec.extrap.lower();
  const double hi = spec.extrap.upper();
  const double ex2 = (hi * hi * hi - lo * lo * lo) / (3.0 * (hi - lo));
  return eps * eps * 2.0 * static_cast<double>(spec.input_size) * ex2;
}

// Independent brute-force simulation on a different generator.
double brute_force_add_threshold(const DatasetSpec& spec, double eps, int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> x_dist(spec.extrap.lower(), spec.extrap.upper());
  std::bernoulli_distribution coin(0.5);
  const auto layout = subset_indices(spec, 0.5 * spec.max_offset());
  double sse = 0;
  for (int k = 0; k < n; ++k) {
    double a = 0, b = 0, a_eps = 0, b_eps = 0;
    for (std::size_t i = 0; i < spec.input_size; ++i) {
      const double x = x_dist(gen);
      const double wa = (i >= layout.a.begin && i < layout.a.end) ? 1.0 : 0.0;
      const double wb = (i >= layout.b.begin && i < layout.b.end) ? 1.0 : 0.0;
      a += wa * x;
      b += wb * x;
      a_eps += (wa + (coin(gen) ? eps : -eps)) * x;
      b_eps += (wb + (coin(gen) ? eps : -eps)) * x;
    }
    const double r = (a_eps + b_eps) - (a + b);
    sse += r * r;
  }
  return sse / n;
}

Layer linear_layer(std::size_t rows, std::size_t cols, const std::vector<double>& w) {
  Layer l;
  l.kind = LayerKind::Linear;
  l.params = LinearParams{Matrix(rows, cols, w)};
  return l;
}

ModelParams linear_model(const std::vector<double>& w1, const std::vector<double>& w2) {
  ModelParams m;
  m.kind = ModelKind::Linear;
  m.hidden_size = 2;
  m.layer1 = linear_layer(2, w1.size() / 2, w1);
  m.layer2 = linear_layer(1, 2, w2);
  return m;
}

Checkpoint cp(std::uint64_t it, double extrap) {
  Checkpoint c;
  c.iteration = it;
  c.extrap_mse = extrap;
  return c;
}

}  // namespace

TEST(Threshold, ZeroEpsilonIsExactlyZero) {
  for (Operation op : {Operation::Add, Operation::Sub, Operation::Mul, Operation::Div}) {
    DatasetSpec spec;
    spec.op = op;
    EXPECT_EQ(simulate_threshold(spec, 0.0, 5000, 1).value, 0.0);
  }
}

TEST(Threshold, AddMatchesAnalyticSecondMoment) {
  const DatasetSpec spec;
  const double analytic = analytic_add_threshold(spec, 1e-5);
  EXPECT_NEAR(analytic, 1e-10 * 200 * (208.0 / 12.0), 1e-20);
  const double simulated = simulate_threshold(spec, 1e-5, 200'000, 3).value;
  EXPECT_NEAR(simulated / analytic, 1.0, 0.05);
}

TEST(Threshold, AddMatchesBruteForceSimulation) {
  const DatasetSpec spec;
  const double brute = brute_force_add_threshold(spec, 1e-5, 50'000, 17);
  const double simulated = simulate_threshold(spec, 1e-5, 200'000, 4).value;
  EXPECT_NEAR(simulated / brute, 1.0, 0.05);
  EXPECT_NEAR(brute / analytic_add_threshold(spec, 1e-5), 1.0, 0.05);
}

TEST(Threshold, DoublingEpsilonQuadruples) {
  const DatasetSpec spec;
  const double t1 = simulate_threshold(spec, 1e-5, 100'000, 5).value;
  const double t2 = simulate_threshold(spec, 2e-5, 100'000, 5).value;
  EXPECT_NEAR(t2 / t1, 4.0, 4.0 * 1e-6);  // same draws, exactly linear error model
  const double t3 = simulate_threshold(spec, 2e-5, 100'000, 6).value;
  EXPECT_NEAR(t3 / t1, 4.0, 0.2);
}

TEST(Threshold, MonotoneInEpsilon) {
  const DatasetSpec spec;
  double prev = 0.0;
  for (double eps : {1e-6, 1e-5, 1e-4}) {
    const double t = simulate_threshold(spec, eps, 20'000, 7).value;
    EXPECT_GE(t, prev);
    prev = t;
  }
}

TEST(Threshold, DeterministicAndWorkerIndependent) {
  const DatasetSpec spec;
  const auto a = simulate_threshold(spec, 1e-5, 30'000, 8, 1);
  const auto b = simulate_threshold(spec, 1e-5, 30'000, 8, 4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.spec_key, spec.key());
  EXPECT_NE(simulate_threshold(spec, 1e-5, 30'000, 9).value, a.value);
}

TEST(Threshold, PositiveAndFiniteForEveryOp) {
  for (Operation op : {Operation::Add, Operation::Sub, Operation::Mul, Operation::Div}) {
    DatasetSpec spec;
    spec.op = op;
    const double t = simulate_threshold(spec, 1e-5, 20'000, 10).value;
    EXPECT_GT(t, 0.0) << to_string(op);
    EXPECT_TRUE(std::isfinite(t)) << to_string(op);
  }
}

TEST(Threshold, RejectsInvalidArguments) {
  const DatasetSpec spec;
  EXPECT_THROW(simulate_threshold(spec, -1e-5, 100, 0), ConfigError);
  EXPECT_THROW(simulate_threshold(spec, 1e-5, 0, 0), ConfigError);
}

TEST(PerfectWeights, IndicatorRowsOfSubsetLength) {
  const DatasetSpec spec;
  const Matrix w = perfect_weights(spec);
  ASSERT_EQ(w.rows(), 2u);
  ASSERT_EQ(w.cols(), 100u);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0;
    for (double v : w.row(r)) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      sum += v;
    }
    EXPECT_EQ(sum, 25.0);
  }
}

TEST(IsSuccess, StrictInequality) {
  SuccessThreshold t;
  t.value = 1e-7;
  EXPECT_TRUE(is_success(0.0, t));
  EXPECT_FALSE(is_success(1e-7, t));
  EXPECT_TRUE(is_success(0.5e-7, t));
  EXPECT_FALSE(is_success(std::numeric_limits<double>::infinity(), t));
}

TEST(IsSuccess, Monotone) {
  SuccessThreshold t;
  t.value = 1.0;
  Rng rng = make_rng(11);
  for (int i = 0; i < 1000; ++i) {
    double m1 = uniform(rng, 0, 2), m2 = uniform(rng, 0, 2);
    if (m1 > m2) std::swap(m1, m2);
    if (is_success(m2, t)) {
      EXPECT_TRUE(is_success(m1, t));
    }
  }
}

TEST(SolvedAt, NeverSolves) {
  SuccessThreshold t;
  t.value = 1.0;
  EXPECT_FALSE(solved_at({cp(1000, 5), cp(2000, 2), cp(3000, 1)}, t).has_value());
}

TEST(SolvedAt, FirstCrossingNotSustained) {
  SuccessThreshold t;
  t.value = 1.0;
  const MetricTrace trace = {cp(1000, 5), cp(2000, 2), cp(3000, 0.5), cp(4000, 3), cp(5000, 0.1)};
  EXPECT_EQ(solved_at(trace, t), 3000u);
}

TEST(SolvedAt, Immediate) {
  SuccessThreshold t;
  t.value = 1.0;
  EXPECT_EQ(solved_at({cp(1000, 0.2), cp(2000, 0.1)}, t), 1000u);
}

TEST(Sparsity, ZeroOnSignedUnitWeights) {
  EXPECT_EQ(sparsity_error(linear_model({1, 0, -1, 0, 0, 1}, {1, -1})), 0.0);
}

TEST(Sparsity, HalfIsMaximal) {
  EXPECT_EQ(sparsity_error(linear_model({1, 0, -1, 0, 0.5, 1}, {1, -1})), 0.5);
  EXPECT_EQ(sparsity_error(linear_model({1, 0, -1, 0, 0, 1}, {-0.5, 1})), 0.5);
}

TEST(Sparsity, PointValues) {
  EXPECT_DOUBLE_EQ(sparsity_distance(0.2), 0.2);
  EXPECT_DOUBLE_EQ(sparsity_distance(-0.9), 0.1);
  EXPECT_DOUBLE_EQ(sparsity_distance(1.25), 0.25);
  EXPECT_DOUBLE_EQ(sparsity_distance(3.0), 0.5);
}

TEST(Sparsity, BoundedOnRandomModels) {
  Rng rng = make_rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const ModelKind kind = kAllModelKinds[trial % 4];
    ModelParams m = init_model(kind, 6, 2, rng);
    for_each_tensor(m, [&](int, std::string_view, Matrix& t) {
      for (double& v : t.values()) v = uniform(rng, -5, 5);
    });
    const double s = sparsity_error(m);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 0.5);
  }
}

TEST(Sparsity, InvariantUnderPermutationAndNegation) {
  Rng rng = make_rng(13);
  std::vector<double> w1(8), w2(2);
  for (double& v : w1) v = uniform(rng, -1.2, 1.2);
  for (double& v : w2) v = uniform(rng, -1.2, 1.2);
  const double base = sparsity_error(linear_model(w1, w2));
  std::vector<double> p1(w1.rbegin(), w1.rend());
  p1[3] = -p1[3];
  std::vector<double> p2 = {-w2[1], w2[0]};
  EXPECT_EQ(sparsity_error(linear_model(p1, p2)), base);
}

TEST(Sparsity, NacUsesEffectiveWeights) {
  Rng rng = make_rng(14);
  ModelParams m = init_model(ModelKind::NacAdd, 3, 2, rng);
  for_each_tensor(m, [](int, std::string_view, Matrix& t) {
    for (double& v : t.values()) v = 30.0;
  });
  EXPECT_NEAR(sparsity_error(m), 0.0, 1e-12);
  for_each_tensor(m, [](int, std::string_view name, Matrix& t) {
    for (double& v : t.values()) v = name == "w_hat" ? 30.0 : 0.0;
  });
  EXPECT_NEAR(sparsity_error(m), 0.5, 1e-12);
}

TEST(GateSparsity, OnlyForNalu) {
  Rng rng = make_rng(15);
  const Matrix x(4, 5, 1.5);
  const ModelParams nac = init_model(ModelKind::NacAdd, 5, 2, rng);
  EXPECT_FALSE(gate_sparsity(nac, forward(nac, x)).has_value());
  ModelParams nalu = init_model(ModelKind::Nalu, 5, 2, rng);
  const auto g = gate_sparsity(nalu, forward(nalu, x));
  ASSERT_TRUE(g.has_value());
  EXPECT_GE(*g, 0.0);
  EXPECT_LE(*g, 0.5);
  for_each_tensor(nalu, [](int, std::string_view name, Matrix& t) {
    if (name == "gate") for (double& v : t.values()) v = 0.0;
  });
  EXPECT_DOUBLE_EQ(*gate_sparsity(nalu, forward(nalu, x)), 0.5);
}
