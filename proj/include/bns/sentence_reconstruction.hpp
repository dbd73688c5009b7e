#pragma once

// Splits a sentence into its explicit part (tokens carrying the dominant
// surface sentiment) and implicit part (everything else).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bns/text_pipeline.hpp"

namespace bns {

enum class Polarity : unsigned char { Negative = 0, Positive = 1 };

inline Polarity opposite(Polarity p) { return p == Polarity::Positive ? Polarity::Negative : Polarity::Positive; }
inline int label_of(Polarity p) { return p == Polarity::Positive ? 1 : 0; }
inline std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }

struct SurfacePolarity {
  Polarity polarity = Polarity::Positive;
  bool degenerate = false;  // no sentiment-bearing tokens
  double positive_mass = 0.0;
  double negative_mass = 0.0;
};

struct SentenceSplit {
  Polarity surface_polarity = Polarity::Positive;
  std::vector<std::size_t> explicit_ids;
  std::vector<std::size_t> implicit_ids;
  bool degenerate = false;
};

struct SubtaskLabels {
  Polarity explicit_label = Polarity::Positive;
  Polarity implicit_label = Polarity::Positive;
};

/// Positive when the summed positive intensity is at least the summed
/// negative intensity. Ties, including all-neutral input, resolve positive.
inline SurfacePolarity surface_polarity(std::span<const Token> tokens) {
  SurfacePolarity s;
  for (const auto& t : tokens) {
    if (t.sentiment > 0.0) s.positive_mass += t.sentiment;
    if (t.sentiment < 0.0) s.negative_mass += -t.sentiment;
  }
  s.polarity = s.positive_mass >= s.negative_mass ? Polarity::Positive : Polarity::Negative;
  s.degenerate = s.positive_mass == 0.0 && s.negative_mass == 0.0;
  return s;
}

inline bool matches(double sentiment, Polarity p) {
  return p == Polarity::Positive ? sentiment > 0.0 : sentiment < 0.0;
}

inline SentenceSplit split(std::span<const Token> tokens) {
  const auto surface = surface_polarity(tokens);
  SentenceSplit out;
  out.surface_polarity = surface.polarity;
  out.degenerate = surface.degenerate;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!surface.degenerate && matches(tokens[i].sentiment, surface.polarity)) {
      out.explicit_ids.push_back(i);
    } else {
      out.implicit_ids.push_back(i);
    }
  }
  return out;
}

/// Explicit label is the surface polarity; the implicit label flips it for
/// sarcastic text.
inline SubtaskLabels derive_labels(const SentenceSplit& s, bool sarcastic) {
  return {s.surface_polarity, sarcastic ? opposite(s.surface_polarity) : s.surface_polarity};
}

/// True when the implicit part holds no token whose sign opposes the
/// surface polarity (the text shows no apparent sentiment conflict).
inline bool conflict_free(std::span<const Token> tokens, const SentenceSplit& s) {
  if (s.degenerate) return true;
  const Polarity other = opposite(s.surface_polarity);
  for (std::size_t i : s.implicit_ids) {
    if (matches(tokens[i].sentiment, other)) return false;
  }
  return true;
}

}  // namespace bns
