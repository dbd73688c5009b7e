#pragma once

// Reference implementations used only by tests. They are written
// independently of the library code (plain loops, no shared helpers).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "bns/text_pipeline.hpp"

namespace oracle {

struct Span {
  std::size_t start, end;
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

inline bool is_core(bns::PosTag t) { return t == bns::PosTag::VERB || t == bns::PosTag::AUX; }

/// Enumerates all windows, keeps those with a core, dedups, picks
/// ceil(w/2) per core by intensity (ties: smaller start), unions and sorts
/// by (start, smallest credited core).
inline std::vector<Span> chunks(const std::vector<bns::Token>& toks, std::size_t w) {
  const std::size_t len = toks.size();
  std::vector<std::size_t> cores;
  for (std::size_t i = 0; i < len; ++i)
    if (is_core(toks[i].pos)) cores.push_back(i);
  if (len == 0) return {};
  if (cores.empty()) return {{0, len}};

  std::set<Span> cand;
  const std::size_t width = std::min(w, len);
  for (std::size_t s = 0; s + width <= len; ++s) {
    for (std::size_t c : cores)
      if (c >= s && c < s + width) cand.insert({s, s + width});
  }
  auto intensity = [&](const Span& sp) {
    double v = 0;
    for (std::size_t i = sp.start; i < sp.end; ++i) v += std::fabs(toks[i].sentiment);
    return v;
  };
  const std::size_t n = w / 2 + (w % 2);
  std::vector<std::pair<Span, std::size_t>> picked;  // span, core
  for (std::size_t c : cores) {
    std::vector<Span> pool;
    for (const auto& sp : cand)
      if (sp.start <= c && c < sp.end) pool.push_back(sp);
    std::sort(pool.begin(), pool.end(), [&](const Span& a, const Span& b) {
      const double ia = intensity(a), ib = intensity(b);
      return ia != ib ? ia > ib : a.start < b.start;
    });
    for (std::size_t k = 0; k < pool.size() && k < n; ++k) picked.push_back({pool[k], c});
  }
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> keyed;
  for (const auto& [sp, c] : picked) {
    bool dup = false;
    for (auto& [s, e, cc] : keyed) {
      if (s == sp.start && e == sp.end) {
        cc = std::min(cc, c);
        dup = true;
      }
    }
    if (!dup) keyed.emplace_back(sp.start, sp.end, c);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<Span> out;
  for (const auto& [s, e, c] : keyed) out.push_back({s, e});
  return out;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Macro precision/recall/F1 and accuracy computed from scratch.
struct Scores {
  double precision, recall, f1, accuracy;
};

inline Scores scores(const std::vector<int>& pred, const std::vector<int>& gold) {
  double per_p[2], per_r[2], per_f[2];
  std::size_t correct = 0;
  for (int cls = 0; cls < 2; ++cls) {
    std::size_t hit = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      hit += (pred[i] == cls && gold[i] == cls);
      predicted += pred[i] == cls;
      actual += gold[i] == cls;
    }
    per_p[cls] = predicted ? double(hit) / double(predicted) : 0.0;
    per_r[cls] = actual ? double(hit) / double(actual) : 0.0;
    per_f[cls] = per_p[cls] + per_r[cls] > 0 ? 2 * per_p[cls] * per_r[cls] / (per_p[cls] + per_r[cls]) : 0.0;
  }
  for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] == gold[i];
  return {(per_p[0] + per_p[1]) / 2, (per_r[0] + per_r[1]) / 2, (per_f[0] + per_f[1]) / 2,
          double(correct) / double(gold.size())};
}

}  // namespace oracle
