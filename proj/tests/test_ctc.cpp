#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "slu/ctc.hpp"
#include "slu/errors.hpp"

using namespace slu;

namespace {

Matrix one_hot_log_probs(const std::vector<int>& path, std::size_t vocab) {
  Matrix m(path.size(), vocab, std::log(1e-6 / static_cast<double>(vocab - 1)));
  for (std::size_t t = 0; t < path.size(); ++t) {
    m(t, static_cast<std::size_t>(path[t])) = std::log(1.0 - 1e-6);
  }
  return m;
}

}  // namespace

TEST_CASE("single frame single label") {
  Rng rng(1);
  const Matrix lp = oracle::random_log_probs(1, 3, rng);
  const std::vector<int> target{2};
  CHECK(ctc_loss(lp, target).nll == doctest::Approx(-lp(0, 2)).epsilon(1e-12));
}

TEST_CASE("two frames, one label: three alignments") {
  Rng rng(2);
  const Matrix lp = oracle::random_log_probs(2, 3, rng);
  const std::vector<int> target{1};
  auto p = [&](std::size_t t, std::size_t k) { return std::exp(lp(t, k)); };
  const double expected = -std::log(p(0, 1) * p(1, 1) + p(0, 0) * p(1, 1) + p(0, 1) * p(1, 0));
  CHECK(ctc_loss(lp, target).nll == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward-backward matches path enumeration") {
  Rng rng(1234);
  int cases = 0;
  for (std::size_t vocab = 2; vocab <= 4; ++vocab) {
    for (std::size_t frames = 1; frames <= 5; ++frames) {
      for (std::size_t len = 0; len <= 3; ++len) {
        for (int rep = 0; rep < 3; ++rep) {
          std::vector<int> target(len);
          for (int& l : target) l = static_cast<int>(rng.index(1, vocab - 1));
          const Matrix lp = oracle::random_log_probs(frames, vocab, rng);
          if (ctc_min_frames(target) > frames) {
            CHECK_THROWS_AS(ctc_loss(lp, target), InfeasibleAlignmentError);
            continue;
          }
          const double got = ctc_loss(lp, target).nll;
          CHECK(std::abs(got - oracle::ctc_nll_brute_force(lp, target)) < 1e-8);
          CHECK(got >= 0.0);
          ++cases;
        }
      }
    }
  }
  CHECK(cases > 100);
}

TEST_CASE("gradient matches finite differences of the nll") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t frames = rng.index(2, 7);
    const std::size_t vocab = rng.index(2, 5);
    std::vector<int> target(rng.index(1, 3));
    for (int& l : target) l = static_cast<int>(rng.index(1, vocab - 1));
    if (ctc_min_frames(target) > frames) continue;

    ParamStore store;
    Matrix logits(frames, vocab);
    for (double& x : logits.data()) x = rng.normal(0.0, 1.0);
    store.add("logits", logits);
    auto loss = [&](ParamStore& s) {
      const CtcResult r = ctc_loss_from_logits(s.value("logits"), target);
      auto& g = s.grad("logits").data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += r.grad.data()[i];
      return r.nll;
    };
    CHECK(grad_check(loss, store, {.eps = 1e-5}) < 1e-4);
  }
}

TEST_CASE("one gradient step decreases the nll") {
  Rng rng(7);
  Matrix logits(5, 4);
  for (double& x : logits.data()) x = rng.normal(0.0, 1.0);
  const std::vector<int> target{1, 3, 3};
  const CtcResult before = ctc_loss_from_logits(logits, target);
  for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] -= 0.01 * before.grad.data()[i];
  CHECK(ctc_loss_from_logits(logits, target).nll < before.nll);
}

TEST_CASE("gradient rows sum to zero") {
  Rng rng(8);
  const Matrix lp = oracle::random_log_probs(6, 5, rng);
  const std::vector<int> target{2, 4};
  const CtcResult r = ctc_loss(lp, target);
  for (std::size_t t = 0; t < 6; ++t) {
    double total = 0.0;
    for (double g : r.grad.row(t)) total += g;
    CHECK(std::abs(total) < 1e-12);
  }
}

TEST_CASE("invalid instances are rejected") {
  Rng rng(3);
  const Matrix lp = oracle::random_log_probs(2, 3, rng);
  CHECK_THROWS_AS(ctc_loss(lp, std::vector<int>{1, 1}), InfeasibleAlignmentError);
  CHECK_THROWS_AS(ctc_loss(lp, std::vector<int>{1, 2, 1}), InfeasibleAlignmentError);
  CHECK_THROWS_AS(ctc_loss(lp, std::vector<int>{0}), DomainError);
  CHECK_THROWS_AS(ctc_loss(lp, std::vector<int>{3}), DomainError);
  Matrix unnormalized(2, 3, 0.0);
  CHECK_THROWS_AS(ctc_loss(unnormalized, std::vector<int>{1}), DomainError);
  CHECK(ctc_min_frames(std::vector<int>{1, 1, 2, 2}) == 6);
}

TEST_CASE("greedy decode collapse rule") {
  CHECK(ctc_greedy_decode(one_hot_log_probs({0, 0}, 3)).empty());
  CHECK(ctc_greedy_decode(one_hot_log_probs({1, 1, 0, 1}, 3)) == std::vector<int>{1, 1});
  CHECK(ctc_greedy_decode(one_hot_log_probs({1, 2, 2, 0}, 3)) == std::vector<int>{1, 2});
}

TEST_CASE("decoding a one-hot valid alignment recovers the target") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t vocab = rng.index(2, 6);
    std::vector<int> target(rng.index(0, 5));
    for (int& l : target) l = static_cast<int>(rng.index(1, vocab - 1));
    // Build an alignment: optional leading blanks, each label repeated, blanks where needed.
    std::vector<int> path;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (i > 0 && target[i] == target[i - 1]) path.push_back(0);
      for (std::size_t r = rng.index(1, 3); r > 0; --r) path.push_back(target[i]);
      if (rng.bernoulli(0.3)) path.push_back(0);
    }
    if (path.empty()) path.push_back(0);
    CHECK(ctc_greedy_decode(one_hot_log_probs(path, vocab)) == target);
  }
}
