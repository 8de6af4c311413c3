#include "heattap/keys.hpp"

namespace heattap {

std::string to_key_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    auto k = KeyId::from_char(c);
    if (!k) throw DataError("character '" + std::string(1, c) + "' is outside the key alphabet");
    out.push_back(k->to_char());
  }
  return out;
}

std::string fold_to_key_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    auto k = KeyId::from_char(c);
    char mapped = k ? k->to_char() : ' ';
    if (mapped == ' ' && !out.empty() && out.back() == ' ') continue;
    out.push_back(mapped);
  }
  return out;
}

}  // namespace heattap
