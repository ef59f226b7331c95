#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "slu/errors.hpp"
#include "slu/metrics.hpp"

using namespace slu;

TEST_CASE("align examples") {
  const std::vector<int> abc{0, 1, 2};
  CHECK(align(abc, abc) == AlignmentCounts{0, 0, 0, 3});
  CHECK(align(abc, std::vector<int>{0, 2}) == AlignmentCounts{0, 1, 0, 3});
  CHECK(align(std::vector<int>{}, std::vector<int>{0}) == AlignmentCounts{0, 0, 1, 0});
  CHECK(align(std::vector<int>{0}, std::vector<int>{}) == AlignmentCounts{0, 1, 0, 1});
}

TEST_CASE("tie-break prefers substitution over an insertion/deletion pair") {
  // [a] vs [b]: one substitution (cost 1) beats D+I (cost 2) anyway; [a,b] vs [b,a]
  // ties between 2 substitutions and 1 deletion + 1 insertion.
  CHECK(align(std::vector<int>{0, 1}, std::vector<int>{1, 0}) == AlignmentCounts{2, 0, 0, 2});
}

TEST_CASE("align works on strings") {
  const std::vector<std::string> ref{"date", "hotel", "city"};
  const std::vector<std::string> hyp{"date", "city", "city", "room"};
  const auto c = align(ref, hyp);
  CHECK(c.errors() == 2);
  CHECK(c.ref_len == 3);
}

TEST_CASE("align of identical sequences is free") {
  for (const auto& seq : oracle::all_sequences(5, 3)) {
    const auto c = align(seq, seq);
    CHECK(c.errors() == 0);
    CHECK(c.ref_len == seq.size());
  }
}

TEST_CASE("align agrees with exhaustive recursion on short sequences") {
  const auto seqs = oracle::all_sequences(4, 3);
  for (const auto& ref : seqs) {
    for (const auto& hyp : seqs) {
      const auto got = align(ref, hyp);
      const auto expected = oracle::edit_outcomes(ref, hyp);
      REQUIRE(got.errors() == expected.cost);
      CHECK(expected.admits(got.substitutions, got.deletions, got.insertions));
      CHECK(got.substitutions + got.deletions <= got.ref_len);
    }
  }
}

TEST_CASE("counts are invariant under relabeling") {
  const auto seqs = oracle::all_sequences(4, 3);
  const std::vector<int> perm{2, 0, 1};
  for (std::size_t a = 0; a < seqs.size(); a += 7) {
    for (std::size_t b = 0; b < seqs.size(); b += 5) {
      auto ref = seqs[a];
      auto hyp = seqs[b];
      const auto before = align(ref, hyp);
      for (int& x : ref) x = perm[static_cast<std::size_t>(x)];
      for (int& x : hyp) x = perm[static_cast<std::size_t>(x)];
      CHECK(align(ref, hyp) == before);
    }
  }
}

TEST_CASE("error_rate") {
  CHECK(error_rate({0, 0, 0, 4}) == 0.0);
  CHECK(error_rate({1, 1, 1, 10}) == doctest::Approx(0.30));
  // Rates above 100% are reported as-is.
  CHECK(error_rate({2, 0, 7, 4}) == doctest::Approx(2.25));
  CHECK_THROWS_AS(error_rate({0, 0, 3, 0}), DomainError);

  AlignmentCounts total;
  total += AlignmentCounts{1, 0, 0, 2};
  total += AlignmentCounts{0, 1, 1, 8};
  CHECK(error_rate(total) == doctest::Approx(0.3));
}
