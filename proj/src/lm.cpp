#include "heattap/lm.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "heattap/layout.hpp"

namespace heattap {

std::string truncate_context(std::string_view context, int max_words) {
  const std::string folded = fold_to_key_text(context);
  int words = 0;
  bool in_word = false;
  for (std::size_t i = folded.size(); i-- > 0;) {
    const bool space = folded[i] == ' ';
    if (!space && !in_word) {
      in_word = true;
      ++words;
    } else if (space && in_word) {
      in_word = false;
      if (words == max_words) return folded.substr(i + 1);
    }
  }
  return folded;
}

NgramCharLM::NgramCharLM(int order, double add_k) : order_(order), add_k_(add_k) {
  if (order_ < 1) throw std::invalid_argument("n-gram order must be at least 1");
  if (!(add_k_ > 0.0)) throw std::invalid_argument("add-k constant must be positive");
}

void NgramCharLM::add_text(std::string_view folded) {
  for (std::size_t i = 0; i < folded.size(); ++i) {
    for (int n = 1; n <= order_ && static_cast<std::size_t>(n) <= i + 1; ++n) {
      const std::string_view gram = folded.substr(i + 1 - static_cast<std::size_t>(n),
                                                  static_cast<std::size_t>(n));
      ++ngrams_[std::string(gram)];
      ++histories_[std::string(gram.substr(0, gram.size() - 1))];
    }
  }
}

NgramCharLM NgramCharLM::train(std::string_view corpus, int order, double add_k) {
  NgramCharLM lm(order, add_k);
  const std::string folded = fold_to_key_text(corpus);
  lm.add_text(folded);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(folded)));
  lm.fingerprint_ = hex;
  return lm;
}

NgramCharLM NgramCharLM::train_file(const std::filesystem::path& corpus, int order,
                                    double add_k) {
  std::ifstream in(corpus, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + corpus.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return train(ss.str(), order, add_k);
}

std::uint64_t NgramCharLM::count(std::string_view ngram) const {
  auto it = ngrams_.find(std::string(ngram));
  return it == ngrams_.end() ? 0 : it->second;
}

KeyDistribution NgramCharLM::next_key_probs(std::string_view context) const {
  const std::string ctx = truncate_context(context);
  const std::size_t max_hist = static_cast<std::size_t>(order_ - 1);
  std::string history = ctx.size() > max_hist ? ctx.substr(ctx.size() - max_hist) : ctx;

  std::uint64_t history_count = 0;
  for (;;) {
    auto it = histories_.find(history);
    if (it != histories_.end() && it->second > 0) {
      history_count = it->second;
      break;
    }
    if (history.empty()) break;
    history.erase(0, 1);
  }

  KeyDistribution p;
  const double denom = static_cast<double>(history_count) + kNumKeys * add_k_;
  std::string gram = history;
  gram.push_back(' ');
  for (KeyId k : all_keys()) {
    gram.back() = k.to_char();
    p(k.index()) = (static_cast<double>(count(gram)) + add_k_) / denom;
  }
  return p;
}

namespace {
constexpr int kLmSchemaVersion = 1;
}

nlohmann::json NgramCharLM::to_json() const {
  // Sorted for byte-stable output.
  std::map<std::string, std::uint64_t> sorted(ngrams_.begin(), ngrams_.end());
  return {{"schema", kLmSchemaVersion},
          {"order", order_},
          {"add_k", add_k_},
          {"corpus_fingerprint", fingerprint_},
          {"counts", sorted}};
}

NgramCharLM NgramCharLM::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<int>() != kLmSchemaVersion) throw DataError("unsupported LM schema");
    NgramCharLM lm(j.at("order").get<int>(), j.at("add_k").get<double>());
    lm.fingerprint_ = j.value("corpus_fingerprint", std::string());
    for (const auto& [gram, c] : j.at("counts").items()) {
      if (gram.empty() || static_cast<int>(gram.size()) > lm.order_)
        throw DataError("n-gram '" + gram + "' has invalid length");
      for (char ch : gram)
        if (!KeyId::from_char(ch) || (ch >= 'A' && ch <= 'Z'))
          throw DataError("n-gram '" + gram + "' contains characters outside the key alphabet");
      const auto n = c.get<std::uint64_t>();
      lm.ngrams_[gram] = n;
      lm.histories_[gram.substr(0, gram.size() - 1)] += n;
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid LM JSON: ") + e.what());
  }
}

void NgramCharLM::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

NgramCharLM NgramCharLM::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace heattap
