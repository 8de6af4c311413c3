#include "heattap/prompts.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace heattap {

std::vector<std::string> PromptPool::words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '.') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t PromptPool::rare_word_count(std::string_view text) const {
  std::size_t n = 0;
  for (const auto& w : words(text))
    if (!common_words.count(w)) ++n;
  return n;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

PromptPool load_pool(const std::filesystem::path& corpus, const std::filesystem::path& added,
                     const std::filesystem::path& common_words) {
  PromptPool pool;
  for (auto& t : read_lines(corpus)) pool.prompts.push_back({std::move(t), PromptOrigin::Corpus});
  if (!added.empty())
    for (auto& t : read_lines(added)) pool.prompts.push_back({std::move(t), PromptOrigin::Added});
  for (auto& w : read_lines(common_words)) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    pool.common_words.insert(std::move(w));
  }
  if (pool.common_words.empty()) throw DataError("common-word list is empty");
  return pool;
}

bool well_formed_prompt(std::string_view text) {
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  if (text.empty() || text.front() == ' ' || text.back() == ' ') return false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ' ') {
      if (text[i - 1] == ' ') return false;
    } else if (!std::isalpha(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return true;
}

PromptPool filter_pool(const PromptPool& pool) {
  if (pool.common_words.empty()) throw DataError("common-word list is missing");
  PromptPool out;
  out.common_words = pool.common_words;
  for (const auto& p : pool.prompts) {
    if (!well_formed_prompt(p.text)) continue;
    const std::size_t words = PromptPool::words(p.text).size();
    const std::size_t rare = pool.rare_word_count(p.text);
    const bool keep =
        p.origin == PromptOrigin::Corpus ? words <= 6 && rare == 0 : words + rare <= 6;
    if (keep) out.prompts.push_back(p);
  }
  return out;
}

CharDistribution char_counts(std::string_view text) {
  CharDistribution c = CharDistribution::Zero();
  for (char ch : text)
    if (auto k = KeyId::from_char(ch)) c(k->index()) += 1.0;
  return c;
}

double char_entropy(const CharDistribution& counts) {
  const double total = counts.sum();
  if (!(total > 0.0)) throw std::invalid_argument("entropy of an empty distribution");
  double h = 0.0;
  for (int k = 0; k < kNumKeys; ++k) {
    if (counts(k) <= 0.0) continue;
    const double p = counts(k) / total;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<std::string> greedy_select(const PromptPool& pool, std::size_t n) {
  if (pool.prompts.size() < n)
    throw DataError("prompt pool has " + std::to_string(pool.prompts.size()) +
                    " prompts, fewer than the " + std::to_string(n) + " requested");
  std::vector<CharDistribution> counts;
  counts.reserve(pool.prompts.size());
  for (const auto& p : pool.prompts) counts.push_back(char_counts(p.text));

  std::vector<bool> used(pool.prompts.size(), false);
  CharDistribution selected = CharDistribution::Zero();
  std::vector<std::string> out;
  constexpr double kTie = 1e-12;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = pool.prompts.size();
    double best_h = -1.0;
    for (std::size_t i = 0; i < pool.prompts.size(); ++i) {
      if (used[i]) continue;
      const CharDistribution merged = selected + counts[i];
      const double h = merged.sum() > 0.0 ? char_entropy(merged) : 0.0;
      bool better = best == pool.prompts.size() || h > best_h + kTie;
      if (!better && std::abs(h - best_h) <= kTie) {
        const auto& a = pool.prompts[i].text;
        const auto& b = pool.prompts[best].text;
        better = a.size() < b.size() || (a.size() == b.size() && a < b);
      }
      if (better) {
        best = i;
        best_h = h;
      }
    }
    used[best] = true;
    selected += counts[best];
    out.push_back(pool.prompts[best].text);
  }
  return out;
}

}  // namespace heattap
