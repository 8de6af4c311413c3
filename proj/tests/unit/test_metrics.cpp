#include <doctest.h>

#include <vector>

#include "heattap/metrics.hpp"

using namespace heattap;

TEST_CASE("character error rate") {
  std::vector<KeyId> ref, hyp;
  for (int i = 0; i < 20; ++i) {
    ref.push_back(KeyId(i));
    hyp.push_back(KeyId(i == 4 ? 5 : i));
  }
  CHECK(cer(ref, hyp) == doctest::Approx(5.0));
  CHECK(cer(ref, ref) == 0.0);
  hyp.pop_back();
  CHECK_THROWS(cer(ref, hyp));
  CHECK_THROWS(cer(std::vector<KeyId>{}, std::vector<KeyId>{}));
}

TEST_CASE("word error rate") {
  CHECK(split_words("  my  watch fell ") == std::vector<std::string>{"my", "watch", "fell"});
  CHECK(wer("my watch fell in the water", "my watch fell in the water") == 0.0);
  CHECK(wer("my watch fell in the water", "my wstch fell in the water") == doctest::Approx(100.0 / 6));
  CHECK(wer("my watch fell", "my watch") == doctest::Approx(100.0 / 3));
  CHECK(wer("a b", "a x b y") == doctest::Approx(100.0));
  CHECK_THROWS(wer("", "x"));
}

TEST_CASE("words per minute") {
  const std::vector<TrialTiming> one{{25, 1000, 61000}};
  CHECK(wpm(one) == doctest::Approx(5.0));
  const std::vector<TrialTiming> two{{25, 0, 30000}, {25, 0, 30000}};
  CHECK(wpm(two) == doctest::Approx(10.0));
  CHECK_THROWS_AS(wpm(std::vector<TrialTiming>{{5, 10, 10}}), DataError);
}
