#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cleegn/loss.hpp"
#include "cleegn/optim.hpp"
#include "test_helpers.hpp"

using cleegn::AdamState;
using cleegn::Tensor4;

TEST_CASE("mse_loss of identical tensors is zero") {
  auto a = helpers::random_tensor<float>(2, 3, 4, 1, 3);
  auto r = cleegn::mse_loss(a, a);
  CHECK(r.loss == 0.0);
  for (float v : r.grad.data) CHECK(v == 0.0f);
}

TEST_CASE("mse_loss of a unit offset is one") {
  auto a = helpers::random_tensor<float>(2, 3, 4, 1, 4);
  Tensor4<float> b = a;
  for (float& v : b.data) v += 1.0f;
  CHECK_THAT(cleegn::mse_loss(b, a).loss, Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("mse_loss hand-computed value and gradient") {
  Tensor4<float> pred(1, 1, 2, 1), target(1, 1, 2, 1);
  pred.at(0, 0, 0, 0) = 1.0f;
  pred.at(0, 0, 1, 0) = 2.0f;
  auto r = cleegn::mse_loss(pred, target);
  CHECK_THAT(r.loss, Catch::Matchers::WithinAbs(2.5, 1e-7));
  CHECK_THAT(r.grad.at(0, 0, 0, 0), Catch::Matchers::WithinAbs(1.0, 1e-6));
  CHECK_THAT(r.grad.at(0, 0, 1, 0), Catch::Matchers::WithinAbs(2.0, 1e-6));
}

TEST_CASE("mse_loss rejects mismatched shapes") {
  Tensor4<float> a(1, 2, 2, 1), b(1, 2, 3, 1);
  CHECK_THROWS_WITH(cleegn::mse_loss(a, b), Catch::Matchers::ContainsSubstring("mismatch"));
}

TEST_CASE("adam_step with zero gradient leaves parameters unchanged") {
  std::vector<float> p = {1.0f, -2.0f, 3.0f};
  std::vector<float> g = {0.0f, 0.0f, 0.0f};
  AdamState<float> st(3);
  cleegn::adam_step(p.data(), g.data(), 3, st, 1e-3f);
  CHECK(p == std::vector<float>{1.0f, -2.0f, 3.0f});
  CHECK(st.t == 1);
}

TEST_CASE("adam first step moves by about -lr * sign(g)") {
  std::vector<float> p = {0.0f, 0.0f};
  std::vector<float> g = {0.37f, -5.2f};
  AdamState<float> st(2);
  cleegn::adam_step(p.data(), g.data(), 2, st, 1e-3f);
  CHECK_THAT(p[0], Catch::Matchers::WithinAbs(-1e-3, 1e-6));
  CHECK_THAT(p[1], Catch::Matchers::WithinAbs(1e-3, 1e-6));
}

TEST_CASE("adam two identical steps stay within the lr bound") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    cleegn::Rng rng(seed);
    const float g0 = static_cast<float>(rng.uniform(-4, 4));
    std::vector<float> p = {1.0f};
    std::vector<float> g = {g0};
    AdamState<float> st(1);
    float prev = p[0];
    for (int step = 0; step < 2; ++step) {
      cleegn::adam_step(p.data(), g.data(), 1, st, 1e-3f);
      CHECK(std::abs(p[0] - prev) <= 1e-3 * (1.0 + 1e-3));
      prev = p[0];
    }
  }
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  std::vector<float> p = {1.0f, 1.0f};
  std::vector<float> g = {0.0f, std::numeric_limits<float>::quiet_NaN()};
  AdamState<float> st(2);
  CHECK_THROWS_WITH(cleegn::adam_step(p.data(), g.data(), 2, st, 1e-3f, "dec_out.weight"),
                    Catch::Matchers::ContainsSubstring("dec_out.weight") &&
                        Catch::Matchers::ContainsSubstring("index 1"));
}

TEST_CASE("adam rejects mis-sized state") {
  std::vector<float> p = {1.0f};
  std::vector<float> g = {1.0f};
  AdamState<float> st(2);
  CHECK_THROWS_AS(cleegn::adam_step(p.data(), g.data(), 1, st, 1e-3f), std::runtime_error);
}

TEST_CASE("lr_schedule follows the exponential decay") {
  CHECK(cleegn::lr_schedule(0, 1e-3, 0.8) == 1e-3);
  CHECK_THAT(cleegn::lr_schedule(1, 1e-3, 0.8), Catch::Matchers::WithinRel(8e-4, 1e-12));
  CHECK_THAT(cleegn::lr_schedule(2, 1e-3, 0.8), Catch::Matchers::WithinRel(6.4e-4, 1e-12));
}

TEST_CASE("lr_schedule validates its domain") {
  CHECK_THROWS_AS(cleegn::lr_schedule(-1, 1e-3, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(cleegn::lr_schedule(0, 1e-3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cleegn::lr_schedule(0, 1e-3, 1.5), std::invalid_argument);
}
