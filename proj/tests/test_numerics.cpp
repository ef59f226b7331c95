#include <cmath>
#include <numeric>

#include "doctest.h"
#include "slu/errors.hpp"
#include "slu/numerics.hpp"

using namespace slu;

TEST_CASE("affine") {
  CHECK(affine(Vector{1, 2}, Matrix::identity(2), Vector{0, 0}) == Vector{1, 2});
  CHECK(affine(Vector{0, 0}, Matrix(2, 2, {5, -1, 2, 9}), Vector{3, 4}) == Vector{3, 4});
  CHECK(affine(Vector{1, 1}, Matrix(2, 2, {1, 2, 3, 4}), Vector{0, 0}) == Vector{3, 7});
  CHECK_THROWS_AS(affine(Vector{1, 2, 3}, Matrix::identity(2), Vector{0, 0}), ShapeError);
  CHECK_THROWS_AS(affine(Vector{1, 2}, Matrix::identity(2), Vector{0}), ShapeError);
}

TEST_CASE("matrix rejects mismatched data") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("softmax") {
  auto half = softmax(Vector{0, 0});
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-15));

  auto big = softmax(Vector{1000, 1000, 1000});
  for (double p : big) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  auto p = softmax(Vector{std::log(1.0), std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));

  CHECK_THROWS_AS(softmax(Vector{}), DomainError);
}

TEST_CASE("softmax sums to one for large-magnitude inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    Vector v(rng.index(1, 12));
    for (double& x : v) x = rng.uniform(-1e3, 1e3);
    const Vector p = softmax(v);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (double x : p) CHECK(x >= 0.0);
  }
}

TEST_CASE("logsumexp") {
  CHECK(logsumexp(Vector{kNegInf, 0.0}) == 0.0);
  CHECK(logsumexp(Vector{2.5, 2.5}) == doctest::Approx(2.5 + std::log(2.0)).epsilon(1e-15));
  CHECK(logsumexp(Vector{std::log(2.0), std::log(3.0)}) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(logsumexp(Vector{kNegInf, kNegInf}) == kNegInf);
  CHECK(log_add(kNegInf, kNegInf) == kNegInf);
  CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("logsumexp is bracketed by max and max + ln n") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Vector v(rng.index(1, 10));
    for (double& x : v) x = rng.uniform(-50, 50);
    const double m = *std::max_element(v.begin(), v.end());
    const double l = logsumexp(v);
    CHECK(l >= m);
    CHECK(l <= m + std::log(static_cast<double>(v.size())) + 1e-12);
  }
}

TEST_CASE("sgd_step") {
  ParamStore store;
  store.add("a", Matrix(1, 1, 1.0));
  store.grad("a")(0, 0) = 2.0;
  sgd_step(store, 0.5);
  CHECK(store.value("a")(0, 0) == 0.0);
  CHECK(store.grad("a")(0, 0) == 0.0);

  sgd_step(store, 0.5);
  CHECK(store.value("a")(0, 0) == 0.0);

  ParamStore pair;
  pair.add("w", Matrix(1, 2, {1, 1}));
  pair.grad("w") = Matrix(1, 2, {1, -1});
  sgd_step(pair, 0.1);
  CHECK(pair.value("w")(0, 0) == doctest::Approx(0.9));
  CHECK(pair.value("w")(0, 1) == doctest::Approx(1.1));
}

TEST_CASE("sgd_step rejects non-finite gradients without partial updates") {
  ParamStore store;
  store.add("a", Matrix(1, 1, 1.0));
  store.add("b", Matrix(1, 1, 1.0));
  store.grad("a")(0, 0) = 1.0;
  store.grad("b")(0, 0) = std::nan("");
  CHECK_THROWS_AS(sgd_step(store, 0.1), DivergenceError);
  CHECK(store.value("a")(0, 0) == 1.0);
  CHECK_THROWS_AS(sgd_step(store, 0.0), DomainError);
}

TEST_CASE("param store names are unique") {
  ParamStore store;
  store.add("x", Matrix(2, 2));
  CHECK_THROWS_AS(store.add("x", Matrix(1, 1)), ShapeError);
  CHECK_THROWS_AS(store.value("missing"), NotFoundError);
  CHECK(store.parameter_count() == 4);
}

TEST_CASE("clip_grad_norm") {
  ParamStore store;
  store.add("w", Matrix(1, 2));
  store.grad("w") = Matrix(1, 2, {3, 4});
  CHECK(clip_grad_norm(store, 1.0) == doctest::Approx(5.0));
  CHECK(store.grad("w")(0, 0) == doctest::Approx(0.6));
  CHECK(store.grad("w")(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("init_uniform stays inside the fan-in bound") {
  Rng rng(3);
  const Matrix m = init_uniform(20, 9, 9, rng);
  for (double v : m.data()) CHECK(std::abs(v) <= 1.0 / 3.0);
  Rng again(3);
  CHECK(init_uniform(20, 9, 9, again) == m);
}

TEST_CASE("grad_check on a quadratic") {
  ParamStore store;
  store.add("w", Matrix(2, 3, {0.5, -1.0, 2.0, 0.1, 3.0, -0.7}));
  auto quadratic = [](ParamStore& s) {
    double loss = 0.0;
    auto& v = s.value("w").data();
    auto& g = s.grad("w").data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double k = static_cast<double>(i + 1);
      loss += k * v[i] * v[i] + v[i];
      g[i] += 2.0 * k * v[i] + 1.0;
    }
    return loss;
  };
  CHECK(grad_check(quadratic, store, {.eps = 1e-5}) < 1e-9);
}

TEST_CASE("grad_check on softmax cross-entropy") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store;
    Matrix logits(1, 6);
    for (double& x : logits.data()) x = rng.normal(0.0, 2.0);
    store.add("z", logits);
    const std::size_t target = rng.index(0, 5);
    auto xent = [target](ParamStore& s) {
      const auto& z = s.value("z").data();
      const Vector p = softmax(z);
      auto& g = s.grad("z").data();
      for (std::size_t k = 0; k < p.size(); ++k) g[k] += p[k] - (k == target ? 1.0 : 0.0);
      return -std::log(p[target]);
    };
    CHECK(grad_check(xent, store, {.eps = 1e-5}) < 1e-4);
  }
}
