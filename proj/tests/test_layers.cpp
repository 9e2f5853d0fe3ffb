#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nalu/gradcheck.hpp"
#include "nalu/layers.hpp"
#include "nalu/model.hpp"

using namespace nalu;

namespace {

// Saturated parameters whose effective weight is (numerically) the given
// {-1, 0, 1} pattern.
NacParams saturated(std::size_t rows, std::size_t cols, const std::vector<double>& pattern) {
  NacParams p{Matrix(rows, cols), Matrix(rows, cols)};
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    p.w_hat.values()[i] = 50.0 * pattern[i];
    p.m_hat.values()[i] = 50.0;
  }
  return p;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform(rng, lo, hi);
  return m;
}

NacParams random_nac(std::size_t rows, std::size_t cols, Rng& rng) {
  return {random_matrix(rows, cols, rng, -2, 2), random_matrix(rows, cols, rng, -2, 2)};
}

Matrix naive_xwt(const Matrix& x, const Matrix& w) {
  Matrix out(x.rows(), w.rows());
  for (std::size_t b = 0; b < x.rows(); ++b)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      long double acc = 0;
      for (std::size_t i = 0; i < x.cols(); ++i) acc += static_cast<long double>(x(b, i)) * w(o, i);
      out(b, o) = static_cast<double>(acc);
    }
  return out;
}

double scalar_weight(double w_hat, double m_hat) {
  return std::tanh(w_hat) / (1.0 + std::exp(-m_hat));
}

}  // namespace

TEST(EffectiveWeight, ZeroParametersGiveZero) {
  NacParams p{Matrix(1, 1), Matrix(1, 1)};
  EXPECT_EQ(effective_weight(p)(0, 0), 0.0);
}

TEST(EffectiveWeight, SaturatesToOne) {
  NacParams p{Matrix(1, 1, 50.0), Matrix(1, 1, 50.0)};
  EXPECT_NEAR(effective_weight(p)(0, 0), 1.0, 1e-9);
}

TEST(EffectiveWeight, MatchesScalarFormula) {
  NacParams p{Matrix(1, 1, -3.0), Matrix(1, 1, 2.0)};
  const double expected = std::tanh(-3.0) * (1.0 / (1.0 + std::exp(-2.0)));
  EXPECT_NEAR(effective_weight(p)(0, 0), expected, 1e-15);
}

TEST(EffectiveWeight, StaysInsideOpenUnitInterval) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const NacParams p{random_matrix(3, 4, rng, -8, 8), random_matrix(3, 4, rng, -8, 8)};
    const Matrix w_eff = effective_weight(p);
    for (double w : w_eff.values()) {
      EXPECT_GT(w, -1.0);
      EXPECT_LT(w, 1.0);
    }
  }
}

TEST(NacAdd, SubsetSum) {
  const auto p = saturated(1, 3, {1, 1, 0});
  const Matrix x(1, 3, {1.0, 2.0, 5.0});
  EXPECT_NEAR(forward_nac_add(p, x)(0, 0), 3.0, 1e-9);
}

TEST(NacAdd, ZeroWeightGivesZero) {
  const auto p = saturated(2, 3, {0, 0, 0, 0, 0, 0});
  const Matrix x(1, 3, {1.0, -2.0, 5.0});
  const Matrix out = forward_nac_add(p, x);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(NacAdd, MatchesNaiveMatmul) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const NacParams p = random_nac(5, 7, rng);
    const Matrix x = random_matrix(9, 7, rng, -3, 3);
    const Matrix got = forward_nac_add(p, x);
    const Matrix want = naive_xwt(x, effective_weight(p));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
  }
}

TEST(NacAdd, HomogeneousInInput) {
  Rng rng = make_rng(12);
  const NacParams p = random_nac(3, 4, rng);
  const Matrix x = random_matrix(6, 4, rng, -2, 2);
  Matrix scaled = x;
  for (double& v : scaled.values()) v *= -2.5;
  const Matrix a = forward_nac_add(p, x);
  const Matrix b = forward_nac_add(p, scaled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.values()[i], -2.5 * a.values()[i], 1e-12);
}

TEST(NacAdd, RejectsWrongInputWidth) {
  const auto p = saturated(1, 3, {1, 1, 0});
  EXPECT_THROW(forward_nac_add(p, Matrix(2, 4)), DimensionError);
}

TEST(NacMul, ProductOfTwo) {
  const auto p = saturated(1, 2, {1, 1});
  EXPECT_NEAR(forward_nac_mul(p, Matrix(1, 2, {2.0, 3.0}))(0, 0), 6.0, 1e-4);
}

TEST(NacMul, Division) {
  const auto p = saturated(1, 2, {1, -1});
  EXPECT_NEAR(forward_nac_mul(p, Matrix(1, 2, {6.0, 2.0}))(0, 0), 3.0, 1e-4);
}

TEST(NacMul, ZeroWeightIsEmptyProduct) {
  const auto p = saturated(1, 3, {0, 0, 0});
  EXPECT_EQ(forward_nac_mul(p, Matrix(1, 3, {6.0, 0.0, -2.0}))(0, 0), 1.0);
}

TEST(NacMul, SeesOnlyMagnitude) {
  Rng rng = make_rng(13);
  const NacParams p = random_nac(3, 4, rng);
  const Matrix pos = random_matrix(5, 4, rng, 0.1, 3);
  Matrix neg = pos;
  for (double& v : neg.values()) v = -v;
  EXPECT_EQ(forward_nac_mul(p, pos), forward_nac_mul(p, neg));
}

TEST(NacMul, RejectsWrongInputWidth) {
  const auto p = saturated(1, 2, {1, 1});
  EXPECT_THROW(forward_nac_mul(p, Matrix(1, 3)), DimensionError);
}

TEST(Nalu, OpenGateSelectsAdditivePath) {
  Rng rng = make_rng(14);
  NaluParams p{random_nac(2, 3, rng), random_nac(2, 3, rng), Matrix(2, 3, 40.0)};
  const Matrix x = random_matrix(4, 3, rng, 1, 2);
  const Matrix got = forward_nalu(p, x);
  const Matrix want = forward_nac_add(p.add_unit, x);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-6);
}

TEST(Nalu, ClosedGateSelectsMultiplicativePath) {
  Rng rng = make_rng(15);
  NaluParams p{random_nac(2, 3, rng), random_nac(2, 3, rng), Matrix(2, 3, -40.0)};
  const Matrix x = random_matrix(4, 3, rng, 1, 2);
  const Matrix got = forward_nalu(p, x);
  const Matrix want = forward_nac_mul(p.mul_unit, x);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-6);
}

TEST(Nalu, MatchesScalarRecomputation) {
  Rng rng = make_rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    NaluParams p{random_nac(3, 4, rng), random_nac(3, 4, rng), random_matrix(3, 4, rng, -1, 1)};
    const Matrix x = random_matrix(5, 4, rng, -2, 2);
    const Matrix got = forward_nalu(p, x);
    for (std::size_t b = 0; b < x.rows(); ++b)
      for (std::size_t o = 0; o < 3; ++o) {
        double add = 0, log_sum = 0, gate_pre = 0;
        for (std::size_t i = 0; i < 4; ++i) {
          add += scalar_weight(p.add_unit.w_hat(o, i), p.add_unit.m_hat(o, i)) * x(b, i);
          log_sum += scalar_weight(p.mul_unit.w_hat(o, i), p.mul_unit.m_hat(o, i)) *
                     std::log(std::abs(x(b, i)) + kLayerEpsilon);
          gate_pre += p.gate(o, i) * x(b, i);
        }
        const double g = 1.0 / (1.0 + std::exp(-gate_pre));
        const double want = g * add + (1.0 - g) * std::exp(log_sum);
        EXPECT_NEAR(got(b, o), want, 1e-12 * std::max(1.0, std::abs(want)));
      }
  }
}

TEST(Nalu, OutputIsConvexCombination) {
  Rng rng = make_rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    NaluParams p{random_nac(3, 4, rng), random_nac(3, 4, rng), random_matrix(3, 4, rng, -2, 2)};
    const Matrix x = random_matrix(5, 4, rng, -3, 3);
    const Matrix out = forward_nalu(p, x);
    const Matrix add = forward_nac_add(p.add_unit, x);
    const Matrix mul = forward_nac_mul(p.mul_unit, x);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double lo = std::min(add.values()[i], mul.values()[i]);
      const double hi = std::max(add.values()[i], mul.values()[i]);
      const double slack = 1e-12 * std::max(1.0, hi - lo);
      EXPECT_GE(out.values()[i], lo - slack);
      EXPECT_LE(out.values()[i], hi + slack);
    }
  }
}

TEST(Nalu, GateInsideOpenUnitInterval) {
  Rng rng = make_rng(18);
  Layer layer = init_params(LayerKind::Nalu, 4, 3, rng);
  LayerCache cache;
  forward_layer(layer, random_matrix(8, 4, rng, -2, 2), cache);
  for (double g : cache.gate_out.values()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
}

TEST(Layers, ForwardIsFiniteOnFiniteInput) {
  Rng rng = make_rng(19);
  Matrix x = random_matrix(6, 4, rng, -5, 5);
  x(0, 0) = 0.0;
  for (auto kind : {LayerKind::Linear, LayerKind::NacAdd, LayerKind::NacMul, LayerKind::Nalu}) {
    const Layer layer = init_params(kind, 4, 3, rng);
    LayerCache cache;
    EXPECT_TRUE(forward_layer(layer, x, cache).all_finite()) << to_string(kind);
  }
}

TEST(Backward, ZeroUpstreamGradientGivesZeroGradients) {
  Rng rng = make_rng(20);
  const Matrix x = random_matrix(5, 4, rng, 0.5, 2);
  for (auto kind : {LayerKind::Linear, LayerKind::NacAdd, LayerKind::NacMul, LayerKind::Nalu}) {
    const Layer layer = init_params(kind, 4, 3, rng);
    LayerCache cache;
    forward_layer(layer, x, cache);
    Layer grad;
    const Matrix dx = backward_layer(layer, x, cache, Matrix(5, 3), grad);
    for_each_tensor(grad, [&](std::string_view name, const Matrix& g) {
      for (double v : g.values()) EXPECT_EQ(v, 0.0) << to_string(kind) << " " << name;
    });
    for (double v : dx.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, NacMulInputGradientFiniteAtZero) {
  Rng rng = make_rng(21);
  const Layer layer = init_params(LayerKind::NacMul, 4, 3, rng);
  Matrix x = random_matrix(2, 4, rng, 0.5, 2);
  x(0, 1) = 0.0;
  LayerCache cache;
  forward_layer(layer, x, cache);
  Layer grad;
  const Matrix dx = backward_layer(layer, x, cache, Matrix(2, 3, 1.0), grad);
  EXPECT_TRUE(dx.all_finite());
  for_each_tensor(grad, [](std::string_view, const Matrix& g) { EXPECT_TRUE(g.all_finite()); });
  EXPECT_EQ(dx(0, 1), 0.0);
}

TEST(Backward, RejectsMismatchedUpstreamShape) {
  Rng rng = make_rng(22);
  const Layer layer = init_params(LayerKind::NacAdd, 4, 3, rng);
  const Matrix x = random_matrix(2, 4, rng, 0.5, 2);
  LayerCache cache;
  forward_layer(layer, x, cache);
  Layer grad;
  EXPECT_THROW(backward_layer(layer, x, cache, Matrix(2, 2), grad), DimensionError);
}

class LayerGradient : public ::testing::TestWithParam<LayerKind> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  for (const auto& r : gradient_check_layer(GetParam(), 20, 1234)) {
    EXPECT_LT(r.max_rel_error, 1e-5) << r.subject << " " << r.tensor;
    EXPECT_GT(r.entries, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradient,
                         ::testing::Values(LayerKind::Linear, LayerKind::NacAdd,
                                           LayerKind::NacMul, LayerKind::Nalu),
                         [](const auto& info) {
                           switch (info.param) {
                             case LayerKind::Linear: return std::string("Linear");
                             case LayerKind::NacAdd: return std::string("NacAdd");
                             case LayerKind::NacMul: return std::string("NacMul");
                             case LayerKind::Nalu: return std::string("Nalu");
                           }
                           return std::string("Unknown");
                         });

class ModelGradient : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradient, MatchesCentralDifferences) {
  for (const auto& r : gradient_check_model(GetParam(), 10, 99)) {
    EXPECT_LT(r.max_rel_error, 1e-4) << r.subject << " " << r.tensor;
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, ModelGradient, ::testing::ValuesIn(kAllModelKinds),
                         [](const auto& info) {
                           switch (info.param) {
                             case ModelKind::Linear: return std::string("Linear");
                             case ModelKind::NacAdd: return std::string("NacAdd");
                             case ModelKind::NacMul: return std::string("NacMul");
                             case ModelKind::Nalu: return std::string("Nalu");
                           }
                           return std::string("Unknown");
                         });

TEST(Init, DeterministicForSeed) {
  for (auto kind : {LayerKind::Linear, LayerKind::NacAdd, LayerKind::NacMul, LayerKind::Nalu}) {
    Rng a = make_rng(5);
    Rng b = make_rng(5);
    const Layer la = init_params(kind, 10, 3, a);
    const Layer lb = init_params(kind, 10, 3, b);
    std::vector<Matrix> ta, tb;
    for_each_tensor(la, [&](std::string_view, const Matrix& m) { ta.push_back(m); });
    for_each_tensor(lb, [&](std::string_view, const Matrix& m) { tb.push_back(m); });
    EXPECT_EQ(ta, tb);
  }
}

TEST(Init, WithinGlorotBound) {
  Rng rng = make_rng(6);
  const double bound = std::sqrt(6.0 / 101.0);
  EXPECT_DOUBLE_EQ(glorot_bound(100, 1), bound);
  for (auto kind : {LayerKind::Linear, LayerKind::NacAdd, LayerKind::Nalu}) {
    const Layer layer = init_params(kind, 100, 1, rng);
    for_each_tensor(layer, [&](std::string_view, const Matrix& m) {
      EXPECT_EQ(m.rows(), 1u);
      EXPECT_EQ(m.cols(), 100u);
      for (double v : m.values()) EXPECT_LE(std::abs(v), bound);
    });
  }
}

TEST(Init, MeanWithinThreeStandardErrors) {
  Rng rng = make_rng(7);
  const Layer layer = init_params(LayerKind::Linear, 1000, 100, rng);
  const auto w = std::get<LinearParams>(layer.params).weight.values();
  double sum = 0;
  for (double v : w) sum += v;
  const double bound = glorot_bound(1000, 100);
  const double se = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LT(std::abs(sum / static_cast<double>(w.size())), 3.0 * se);
}

TEST(Init, RejectsZeroDimensions) {
  Rng rng = make_rng(8);
  EXPECT_THROW(init_params(LayerKind::Linear, 0, 3, rng), ConfigError);
}

TEST(Model, LayerKindsFollowDefinitions) {
  EXPECT_EQ(layer_kinds(ModelKind::Linear), std::pair(LayerKind::Linear, LayerKind::Linear));
  EXPECT_EQ(layer_kinds(ModelKind::NacAdd), std::pair(LayerKind::NacAdd, LayerKind::NacAdd));
  EXPECT_EQ(layer_kinds(ModelKind::NacMul), std::pair(LayerKind::NacAdd, LayerKind::NacMul));
  EXPECT_EQ(layer_kinds(ModelKind::Nalu), std::pair(LayerKind::Nalu, LayerKind::Nalu));
}

TEST(Model, ShapesMapInputToScalar) {
  Rng rng = make_rng(9);
  for (ModelKind kind : kAllModelKinds) {
    const ModelParams m = init_model(kind, 100, 2, rng);
    EXPECT_EQ(m.layer1.in_dim(), 100u);
    EXPECT_EQ(m.layer1.out_dim(), 2u);
    EXPECT_EQ(m.layer2.in_dim(), 2u);
    EXPECT_EQ(m.layer2.out_dim(), 1u);
    EXPECT_EQ(predict(m, Matrix(3, 100, 1.5)).cols(), 1u);
  }
}

TEST(Model, ParsesNamesAndAliases) {
  EXPECT_EQ(parse_model_kind("NAC+"), ModelKind::NacAdd);
  EXPECT_EQ(parse_model_kind("nalu"), ModelKind::Nalu);
  EXPECT_EQ(parse_model_kind("linear"), ModelKind::Linear);
  EXPECT_FALSE(parse_model_kind("lstm").has_value());
  for (ModelKind k : kAllModelKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
}

TEST(Model, MseLossAndGradient) {
  const Matrix pred(2, 1, {1.0, 3.0});
  const std::vector<double> target = {0.0, 1.0};
  Matrix d;
  EXPECT_DOUBLE_EQ(mse_loss(pred, target, &d), (1.0 + 4.0) / 2.0);
  EXPECT_DOUBLE_EQ(d(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 2.0);
}
