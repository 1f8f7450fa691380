#include <doctest.h>

#include "ludvae/nn.hpp"
#include "test_support.hpp"

using namespace ludvae;
using test_support::central_diff;
using test_support::close_rel;
using test_support::naive_conv;
using test_support::random_tensor;

TEST_CASE("conv forward matches direct convolution") {
  Rng rng(11);
  nn::ParamStore<double> store;
  const auto conv = nn::make_conv(store, "c", 3, 4, 3);
  for (auto& v : store.values()) v = rng.normal(0.0, 0.3);
  TensorD x = random_tensor<double>(3, 5, 6, rng);
  TensorD y = nn::conv_forward(conv, store.data(), x);
  TensorD want = naive_conv(x, store.data() + conv.w_off, store.data() + conv.b_off, 4, 3);
  REQUIRE(y.same_shape(want));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv1x1 forward matches direct convolution") {
  Rng rng(12);
  nn::ParamStore<double> store;
  const auto conv = nn::make_conv(store, "c", 2, 3, 1);
  for (auto& v : store.values()) v = rng.normal(0.0, 0.5);
  TensorD x = random_tensor<double>(2, 4, 4, rng);
  TensorD y = nn::conv_forward(conv, store.data(), x);
  TensorD want = naive_conv(x, store.data() + conv.w_off, store.data() + conv.b_off, 3, 1);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv wrong input channels") {
  nn::ParamStore<double> store;
  const auto conv = nn::make_conv(store, "c", 3, 4, 3);
  TensorD x(2, 4, 4);
  CHECK_THROWS_AS(nn::conv_forward(conv, store.data(), x), DimensionError);
}

namespace {

// Scalar loss: weighted sum of the tensor against a fixed random projection.
double projected(const TensorD& t, const TensorD& proj) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * proj[i];
  return s;
}

}  // namespace

TEST_CASE("conv backward agrees with finite differences") {
  for (int k : {1, 3}) {
    Rng rng(20 + k);
    nn::ParamStore<double> store;
    const auto conv = nn::make_conv(store, "c", 2, 3, k);
    for (auto& v : store.values()) v = rng.normal(0.0, 0.4);
    TensorD x = random_tensor<double>(2, 4, 5, rng);
    TensorD proj = random_tensor<double>(3, 4, 5, rng);

    auto eval = [&]() { return projected(nn::conv_forward(conv, store.data(), x), proj); };

    std::vector<double> grad(store.size(), 0.0);
    TensorD dx(2, 4, 5);
    nn::conv_backward(conv, store.data(), x, proj, &dx, grad.data());

    for (std::size_t i = 0; i < store.size(); ++i) {
      const double fd = central_diff(eval, store.values()[i], 1e-6);
      CHECK_MESSAGE(close_rel(grad[i], fd, 1e-6), "param ", i, " analytic ", grad[i], " fd ", fd);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fd = central_diff(eval, x[i], 1e-6);
      CHECK_MESSAGE(close_rel(dx[i], fd, 1e-6), "input ", i);
    }
  }
}

TEST_CASE("avgpool and upsample round-trip shapes and gradients") {
  Rng rng(31);
  TensorD x = random_tensor<double>(2, 4, 6, rng);
  TensorD p = nn::avgpool2(x);
  CHECK(p.height() == 2);
  CHECK(p.width() == 3);
  CHECK(p.at(0, 0, 0) ==
        doctest::Approx((x.at(0, 0, 0) + x.at(0, 0, 1) + x.at(0, 1, 0) + x.at(0, 1, 1)) / 4));

  TensorD proj = random_tensor<double>(2, 2, 3, rng);
  auto eval = [&]() { return projected(nn::avgpool2(x), proj); };
  TensorD dx(2, 4, 6);
  nn::avgpool2_backward(proj, dx);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(close_rel(dx[i], central_diff(eval, x[i], 1e-6), 1e-6));

  TensorD u = nn::upsample_nearest2(p);
  CHECK(u.height() == 4);
  CHECK(u.at(0, 1, 1) == p.at(0, 0, 0));
  TensorD proj_u = random_tensor<double>(2, 4, 6, rng);
  auto eval_u = [&]() { return projected(nn::upsample_nearest2(p), proj_u); };
  TensorD dp(2, 2, 3);
  nn::upsample_nearest2_backward(proj_u, dp);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(close_rel(dp[i], central_diff(eval_u, p[i], 1e-6), 1e-6));

  TensorD odd(1, 3, 4);
  CHECK_THROWS_AS(nn::avgpool2(odd), DimensionError);
}

TEST_CASE("concat and split") {
  Rng rng(41);
  TensorD a = random_tensor<double>(2, 3, 3, rng);
  TensorD b = random_tensor<double>(1, 3, 3, rng);
  TensorD c = nn::concat_channels(a, b);
  CHECK(c.channels() == 3);
  CHECK(c.at(2, 1, 1) == b.at(0, 1, 1));
  TensorD da(2, 3, 3), db(1, 3, 3);
  nn::split_channels_backward(c, da, db);
  CHECK(da.at(1, 2, 2) == a.at(1, 2, 2));
  CHECK(db.at(0, 0, 0) == b.at(0, 0, 0));
  TensorD mismatch(1, 4, 3);
  CHECK_THROWS_AS(nn::concat_channels(a, mismatch), DimensionError);
}

TEST_CASE("relu masks gradients at the cached output") {
  TensorD y(1, 1, 3);
  y[0] = 0.0;
  y[1] = 2.0;
  y[2] = 0.0;
  TensorD dy(1, 1, 3, 1.0);
  nn::relu_backward_inplace(y, dy);
  CHECK(dy[0] == 0.0);
  CHECK(dy[1] == 1.0);
  CHECK(dy[2] == 0.0);
}
