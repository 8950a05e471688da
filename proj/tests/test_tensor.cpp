#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hoiprompt/gradcheck.hpp"
#include "hoiprompt/nn.hpp"
#include "hoiprompt/optim.hpp"

using namespace hoi;
using Md = Matrix<double>;
using Td = Tensor<double>;

namespace {

Md random_matrix(Rng& rng, Index r, Index c, double scale = 1.0) { return init::normal<double>(rng, r, c, scale); }

Td param(Rng& rng, Index r, Index c, double scale = 1.0) { return Td::leaf(random_matrix(rng, r, c, scale), true); }

// Loss that mixes every output entry with fixed random weights, so each output coordinate matters.
Td probe(const Td& out, const Md& weights) { return sum(mul(out, Td::constant(weights))); }

constexpr double kTol = 1e-4;
constexpr int kTrials = 100;

}  // namespace

TEST_CASE("matmul examples") {
  Md eye = Md::Identity(2, 2);
  Md a(2, 2), b(2, 2), expected(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  expected << 19, 22, 43, 50;
  CHECK(matmul(Td::constant(eye), Td::constant(a)).value() == a);
  CHECK(matmul(Td::constant(a), Td::constant(b)).value() == expected);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Td a = Td::constant(Md::Zero(2, 3));
  Td b = Td::constant(Md::Zero(2, 3));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x3]", msg.find("[2x3]") + 1) != std::string::npos);
  }
}

TEST_CASE("softmax examples and invariants") {
  Md zero = Md::Zero(1, 3);
  auto u = softmax_rows(Td::constant(zero)).value();
  for (int j = 0; j < 3; ++j) CHECK(u(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Md v(1, 3);
  v << 1, 2, 3;
  auto s = softmax_rows(Td::constant(v)).value();
  CHECK(std::abs(s(0, 0) - 0.09003) < 1e-5);
  CHECK(std::abs(s(0, 1) - 0.24473) < 1e-5);
  CHECK(std::abs(s(0, 2) - 0.66524) < 1e-5);

  Rng rng(7);
  for (int t = 0; t < kTrials; ++t) {
    Md x = random_matrix(rng, 3, 5, 10.0);
    const double c = rng.normal(0, 50);
    auto y = softmax_rows(Td::constant(x)).value();
    auto y2 = softmax_rows(Td::constant((x.array() + c).matrix())).value();
    CHECK((y - y2).cwiseAbs().maxCoeff() < 1e-12);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(y.row(i).sum() - 1.0) < 1e-6);
    CHECK((y.array() >= 0).all());
  }
  // large magnitudes stay finite thanks to max subtraction
  Md big(1, 2);
  big << 1000, 999;
  CHECK(softmax_rows(Td::constant(big)).value().allFinite());
}

TEST_CASE("backward examples") {
  Td x = Td::leaf(Md::Constant(1, 1, 3.0), true);
  square(x).backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));

  Td p = Td::leaf(Md::Constant(1, 1, 2.0), true);
  Td q = Td::leaf(Md::Constant(1, 1, 5.0), true);
  square(q).backward();
  CHECK_FALSE(p.has_grad());
  CHECK(q.grad()(0, 0) == doctest::Approx(10.0));

  Td frozen = Td::constant(Md::Constant(2, 2, 1.0));
  Td w = Td::leaf(Md::Constant(2, 2, 0.5), true);
  sum(matmul(frozen, w)).backward();
  CHECK_FALSE(frozen.has_grad());
  CHECK(w.has_grad());

  CHECK_THROWS_AS(matmul(frozen, w).backward(), ContractError);
}

TEST_CASE("backward visits shared subgraphs once and accumulates on leaves") {
  Td x = Td::leaf(Md::Constant(1, 1, 2.0), true);
  Td y = square(x);      // 4
  Td z = add(y, y);      // 2x^2, dz/dx = 4x = 8
  sum(add(z, x)).backward();  // + x -> 9
  CHECK(x.grad()(0, 0) == doctest::Approx(9.0));
}

TEST_CASE("finite differences: matmul") {
  Rng rng(11);
  for (int t = 0; t < kTrials; ++t) {
    Td a = param(rng, 3, 4), b = param(rng, 4, 2);
    Md w = random_matrix(rng, 3, 2);
    auto f = [&] { return probe(matmul(a, b), w); };
    CHECK(gradcheck<double>(f, a).rel_error < kTol);
    CHECK(gradcheck<double>(f, b).rel_error < kTol);
  }
}

TEST_CASE("finite differences: sum of A*B against A") {
  Rng rng(12);
  Td a = param(rng, 4, 3), b = param(rng, 3, 5);
  auto f = [&] { return sum(matmul(a, b)); };
  CHECK(gradcheck<double>(f, a).rel_error < kTol);
}

TEST_CASE("finite differences: elementwise and structural ops") {
  Rng rng(13);
  for (int t = 0; t < kTrials; ++t) {
    Td a = param(rng, 3, 4), b = param(rng, 3, 4), bias = param(rng, 1, 4), s = param(rng, 1, 1);
    Td pos = Td::leaf((random_matrix(rng, 3, 4).array().abs() + 0.5).matrix(), true);
    Md w = random_matrix(rng, 3, 4);
    Md w6 = random_matrix(rng, 6, 4);
    Md w8 = random_matrix(rng, 3, 8);
    RowVector<double> rw = random_matrix(rng, 1, 3);
    Md w3 = random_matrix(rng, 3, 3);

    CHECK(gradcheck<double>([&] { return probe(add(a, b), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(sub(a, b), w); }, b).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(mul(a, b), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(scale(a, 1.7), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(scale_by(a, s), w); }, s).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(scale_by(a, s), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(add_bias(a, bias), w); }, bias).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(scale_rows(a, rw), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(concat_rows<double>({a, b}), w6); }, b).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(concat_cols<double>({a, b}), w8); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(slice_rows(concat_rows<double>({a, b}), 2, 3), w); }, a)
              .rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(slice_cols(a, 1, 2), w.leftCols(2)); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(transpose(a), w.transpose()); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(matmul_nt(a, b), w3); }, b).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(gelu(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(sigmoid(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(exp(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(log(pos), w); }, pos).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(square(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return mean(mul(a, b)); }, a).rel_error < kTol);
  }
}

TEST_CASE("finite differences: normalization and softmax families") {
  Rng rng(14);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> off_diag(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) off_diag(i, j) = i != j;
  for (int t = 0; t < kTrials; ++t) {
    Td a = param(rng, 4, 4), gamma = param(rng, 1, 4), beta = param(rng, 1, 4);
    Md w = random_matrix(rng, 4, 4);
    CHECK(gradcheck<double>([&] { return probe(softmax_rows(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(log_softmax_rows(a), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(masked_log_softmax_rows(a, off_diag), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(layer_norm_rows(a, gamma, beta), w); }, a).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(layer_norm_rows(a, gamma, beta), w); }, gamma).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(layer_norm_rows(a, gamma, beta), w); }, beta).rel_error < kTol);
    CHECK(gradcheck<double>([&] { return probe(l2_normalize_rows(a), w); }, a).rel_error < kTol);
  }
}

TEST_CASE("masked log-softmax ignores dropped entries") {
  Md x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep(2, 3);
  keep << false, true, true, true, false, true;
  auto y = masked_log_softmax_rows(Td::constant(x), keep).value();
  CHECK(y(0, 0) == 0.0);
  CHECK(std::exp(y(0, 1)) + std::exp(y(0, 2)) == doctest::Approx(1.0));
  CHECK(std::exp(y(1, 0)) + std::exp(y(1, 2)) == doctest::Approx(1.0));
}

TEST_CASE("attention: single key, uniform keys, configuration errors") {
  Rng rng(21);
  ParamStore<double> store;
  MultiHeadAttention<double> attn(store, "mha", "test", 8, 2, rng, true);
  Md v_row = random_matrix(rng, 1, 8);
  Md expected = attn.out_proj(attn.v_proj(Td::constant(v_row))).value();
  for (int t = 0; t < 5; ++t) {
    Md q = random_matrix(rng, 3, 8, 3.0);
    Md out = attn(Td::constant(q), Td::constant(v_row)).value();
    for (Index i = 0; i < 3; ++i) CHECK((out.row(i) - expected.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  // identical keys: weights are uniform whatever the values
  Md k = random_matrix(rng, 1, 8).replicate(4, 1);
  Md v = random_matrix(rng, 4, 8);
  Md q = random_matrix(rng, 2, 8);
  Md core = attention_core(Td::constant(q), Td::constant(k), Td::constant(v), 2).value();
  Md mean_v = v.colwise().mean();
  for (Index i = 0; i < 2; ++i) CHECK((core.row(i) - mean_v).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(MultiHeadAttention<double>(store, "bad", "test", 9, 2, rng, true), ConfigError);
  CHECK_THROWS_AS(attention_core(Td::constant(q), Td::constant(k), Td::constant(v), 3), ConfigError);
}

TEST_CASE("finite differences: multi-head attention wrt Q, K, V on 3x8, 2 heads") {
  Rng rng(22);
  for (int t = 0; t < kTrials; ++t) {
    Td q = param(rng, 3, 8), k = param(rng, 5, 8), v = param(rng, 5, 8);
    Md w = random_matrix(rng, 3, 8);
    auto f = [&] { return probe(attention_core(q, k, v, 2), w); };
    CHECK(gradcheck<double>(f, q).rel_error < kTol);
    CHECK(gradcheck<double>(f, k).rel_error < kTol);
    CHECK(gradcheck<double>(f, v).rel_error < kTol);
  }
  ParamStore<double> store;
  MultiHeadAttention<double> attn(store, "mha", "test", 8, 2, rng, true);
  Td x = param(rng, 3, 8), ctx = param(rng, 4, 8);
  Md w = random_matrix(rng, 3, 8);
  auto f = [&] { return probe(attn(x, ctx), w); };
  for (auto& p : store.params()) CHECK(gradcheck<double>(f, p.tensor).rel_error < kTol);
  CHECK(gradcheck<double>(f, x).rel_error < kTol);
  CHECK(gradcheck<double>(f, ctx).rel_error < kTol);
}

TEST_CASE("finite differences: composite matmul -> softmax -> sum") {
  Rng rng(23);
  for (int t = 0; t < kTrials; ++t) {
    Td a = param(rng, 3, 4), b = param(rng, 4, 5);
    Md w = random_matrix(rng, 3, 5);
    auto f = [&] { return sum(mul(softmax_rows(matmul(a, b)), Td::constant(w))); };
    CHECK(gradcheck<double>(f, a).rel_error < kTol);
    CHECK(gradcheck<double>(f, b).rel_error < kTol);
  }
}

TEST_CASE("finite differences: transformer layer and guidance adapter") {
  Rng rng(24);
  ParamStore<double> store;
  TransformerLayer<double> layer(store, "layer", "test", 8, 2, 16, rng, true, 1.0);
  GuidanceAdapter<double> adapter(store, "guide", "test", 8, 4, 1, rng);
  // lift the zero-initialized up-projection so every path is live
  adapter.up.mutable_value() = random_matrix(rng, 4, 8, 0.5);
  Td x = param(rng, 5, 8), ctx = param(rng, 3, 8);
  Md w = random_matrix(rng, 5, 8);
  auto f = [&] { return probe(adapter(layer(x), ctx), w); };
  for (auto& p : store.params()) CHECK_MESSAGE(gradcheck<double>(f, p.tensor).rel_error < kTol, p.name);
  CHECK(gradcheck<double>(f, x).rel_error < kTol);
}

TEST_CASE("guidance adapter is the identity at zero init") {
  Rng rng(25);
  ParamStore<double> store;
  GuidanceAdapter<double> adapter(store, "g", "test", 8, 2, 1, rng);
  Md x = random_matrix(rng, 3, 8);
  Md ctx = random_matrix(rng, 6, 8);
  CHECK(adapter(Td::constant(x), Td::constant(ctx)).value() == x);
  CHECK(adapter.self_attend(Td::constant(x)).value() == x);
}

TEST_CASE("fault injection flips the armed rule only") {
  Rng rng(26);
  Td a = param(rng, 3, 4), b = param(rng, 4, 2);
  Md w = random_matrix(rng, 3, 2);
  auto f = [&] { return probe(matmul(a, b), w); };
  fault::arm("matmul");
  CHECK(gradcheck<double>(f, a).rel_error > 1.0);
  fault::arm("softmax");
  CHECK(gradcheck<double>(f, a).rel_error < kTol);
  fault::disarm();
}

TEST_CASE("adamw") {
  ParamStore<double> store;
  Td p = store.add("p", "test", Md::Constant(1, 1, 1.0), true);

  SUBCASE("default learning rate") { CHECK(AdamWConfig{}.lr == 1e-3); }

  SUBCASE("one step on p=1, g=1") {
    AdamW<double> opt(AdamWConfig{});
    sum(p).backward();
    opt.step(store);
    CHECK(p.value()(0, 0) == doctest::Approx(1.0 - 1e-3 * (1.0 / (1.0 + 1e-8))).epsilon(1e-12));
    CHECK(std::abs(p.value()(0, 0) - 0.999) < 1e-9);
    CHECK(opt.step_count() == 1);
  }

  SUBCASE("zero gradient, zero weight decay leaves parameters unchanged") {
    AdamW<double> opt(AdamWConfig{});
    sum(scale(p, 0.0)).backward();
    REQUIRE(p.has_grad());
    opt.step(store);
    CHECK(p.value()(0, 0) == 1.0);
  }

  SUBCASE("nonpositive learning rate rejected") { CHECK_THROWS_AS(AdamW<double>(AdamWConfig{0.0}), ConfigError); }

  SUBCASE("shape mismatch rejected") {
    AdamW<double> opt(AdamWConfig{});
    p.node()->grad = Md::Zero(2, 2);
    CHECK_THROWS_AS(opt.step(store), DimensionError);
  }
}

TEST_CASE("forward determinism") {
  Rng rng(31);
  ParamStore<float> store;
  TransformerLayer<float> layer(store, "l", "test", 16, 4, 32, rng, false, 1.0);
  Matrix<float> x = init::normal<float>(rng, 10, 16, 1.0);
  auto a = layer(Tensor<float>::constant(x)).value();
  auto b = layer(Tensor<float>::constant(x)).value();
  CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);
}
