#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "bns/random.hpp"
#include "bns/text_pipeline.hpp"

namespace fixtures {

using bns::PosTag;

inline std::vector<bns::Token> tokens(const std::vector<std::tuple<std::string, PosTag, double>>& spec) {
  std::vector<bns::Token> out;
  for (const auto& [w, tag, s] : spec) out.push_back({w, w, tag, s, out.size()});
  return out;
}

/// "I love to be ignored !" with love +0.82 and ignored -0.55.
inline std::vector<bns::Token> love_ignored_sentence() {
  return tokens({{"I", PosTag::PRON, 0.0},
                 {"love", PosTag::VERB, 0.82},
                 {"to", PosTag::PART, 0.0},
                 {"be", PosTag::AUX, 0.0},
                 {"ignored", PosTag::VERB, -0.55},
                 {"!", PosTag::PUNCT, 0.0}});
}

/// Random tagged sentence of length up to `max_len`. Sentiment values come
/// from a small grid so intensity ties occur often.
inline std::vector<bns::Token> random_sentence(bns::Rng& rng, std::size_t max_len) {
  static const PosTag tags[] = {PosTag::NOUN, PosTag::VERB, PosTag::AUX, PosTag::ADJ, PosTag::PRON, PosTag::PUNCT};
  static const double values[] = {0.0, 0.0, 0.25, -0.25, 0.5, -0.75, 1.0};
  const std::size_t len = rng.index(max_len + 1);
  std::vector<bns::Token> out;
  for (std::size_t i = 0; i < len; ++i) {
    const std::string w = "w" + std::to_string(i);
    out.push_back({w, w, tags[rng.index(6)], values[rng.index(7)], i});
  }
  return out;
}

}  // namespace fixtures
