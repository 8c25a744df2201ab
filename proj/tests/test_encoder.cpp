#include <cmath>
#include <vector>

#include "doctest.h"
#include "fsmb/encoder.hpp"
#include "gradcheck.hpp"

using fsmb::Encoder;
using fsmb::EncoderDescriptor;
using fsmb::Tensor;

TEST_CASE("identity single-layer encoder reproduces its input") {
  Encoder enc;
  enc.dims = {3, 3};
  enc.weights.push_back(Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  enc.biases.push_back(Tensor::zeros({3}));
  Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, -4, 5, 0.5});
  CHECK(enc.forward(x).values() == x.values());
}

TEST_CASE("empty batch yields an empty embedding batch") {
  auto enc = fsmb::init_encoder<float>({4, {8}, 3}, 7);
  Tensor x = Tensor::zeros({0, 4});
  Tensor out = enc.forward(x);
  CHECK(out.shape() == fsmb::Shape{0, 3});
}

TEST_CASE("batch width mismatch is a dimension error") {
  auto enc = fsmb::init_encoder<float>({4, {}, 3}, 7);
  CHECK_THROWS_AS(enc.forward(Tensor::zeros({2, 5})), fsmb::DimensionError);
}

TEST_CASE("init is seed-deterministic with zero biases") {
  auto a = fsmb::init_encoder<float>({16, {32}, 8}, 123);
  auto b = fsmb::init_encoder<float>({16, {32}, 8}, 123);
  auto c = fsmb::init_encoder<float>({16, {32}, 8}, 124);
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    CHECK(a.weights[i].values() == b.weights[i].values());
    for (float v : a.biases[i].values()) CHECK(v == 0.0f);
  }
  CHECK(a.weights[0].values() != c.weights[0].values());
}

TEST_CASE("init weight spread matches the uniform(-s, s) moment") {
  // uniform(-s, s) has std s/sqrt(3)
  auto enc = fsmb::init_encoder<float>({64, {}, 64}, 99);
  const double s = std::sqrt(6.0 / (64 + 64));
  double sum = 0, sum2 = 0;
  const auto& w = enc.weights[0].values();
  for (float v : w) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
    CHECK(std::fabs(v) <= s);
  }
  const double mean = sum / w.size();
  const double stdev = std::sqrt(sum2 / w.size() - mean * mean);
  CHECK(stdev == doctest::Approx(s / std::sqrt(3.0)).epsilon(0.10));
}

TEST_CASE("forward is pure and row-local") {
  auto enc = fsmb::init_encoder<float>({6, {12}, 4}, 5);
  fsmb::Rng rng(17);
  std::vector<float> xv(3 * 6);
  for (auto& v : xv) v = static_cast<float>(rng.next_double() * 2 - 1);
  Tensor x = Tensor::from_values({3, 6}, xv);

  auto once = enc.forward(x).values();
  auto twice = enc.forward(x).values();
  CHECK(once == twice);

  // doubling the batch concatenates the embeddings row-wise
  std::vector<float> xx(xv);
  xx.insert(xx.end(), xv.begin(), xv.end());
  auto doubled = enc.forward(Tensor::from_values({6, 6}, xx)).values();
  std::vector<float> expect(once);
  expect.insert(expect.end(), once.begin(), once.end());
  CHECK(doubled == expect);
}

TEST_CASE("descriptor validation") {
  CHECK_THROWS_AS(fsmb::init_encoder<float>({0, {8}, 4}, 1), fsmb::ConfigError);
  CHECK_THROWS_AS(fsmb::init_encoder<float>({4, {8}, 1}, 1), fsmb::ConfigError);
}

TEST_CASE("gradcheck: two-layer encoder forward") {
  fsmb::Rng rng(301);
  for (int it = 0; it < 5; ++it) {
    auto enc = fsmb::init_encoder<double>({3, {4}, 2}, 1000 + it);
    std::vector<double> xv(2 * 3);
    for (auto& v : xv) v = rng.next_double() * 2 - 1;
    auto x = fsmb::test::DTensor::from_values({2, 3}, xv);
    // tensor handles share state, so the leaves alias the encoder parameters
    std::vector<fsmb::test::DTensor> leaves;
    for (auto* p : enc.parameters()) leaves.push_back(*p);
    auto res = fsmb::test::gradcheck(
        [&enc, &x](std::vector<fsmb::test::DTensor>&) { return fsmb::sum_all(enc.forward(x)); },
        leaves);
    CHECK_MESSAGE(res.ok, res.detail);
  }
}
