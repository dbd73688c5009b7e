#pragma once

// Behavior chunking: sliding windows that contain a verb or auxiliary,
// deduplicated, with the ceil(w/2) most sentiment-intense windows kept per
// core word.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bns/error.hpp"
#include "bns/ops.hpp"
#include "bns/text_pipeline.hpp"

namespace bns {

struct SegmentationConfig {
  std::size_t window_size = 4;

  void validate() const {
    if (window_size < 1) throw ConfigError("window_size must be >= 1");
  }
};

struct BehaviorChunk {
  std::size_t start = 0;  // half-open [start, end)
  std::size_t end = 0;
  std::size_t core_index = 0;
  double intensity = 0.0;  // sum of |sentiment| over the span
  std::vector<std::size_t> token_ids;

  std::size_t length() const noexcept { return end - start; }
  bool same_span(const BehaviorChunk& o) const noexcept { return start == o.start && end == o.end; }
  friend bool operator==(const BehaviorChunk&, const BehaviorChunk&) = default;
};

struct Segmentation {
  std::vector<BehaviorChunk> chunks;
  bool fallback = false;  // no verb/auxiliary: one whole-sentence chunk
};

inline bool is_core(PosTag tag) { return tag == PosTag::VERB || tag == PosTag::AUX; }

inline std::vector<std::size_t> find_cores(std::span<const Token> tokens) {
  std::vector<std::size_t> cores;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_core(tokens[i].pos)) cores.push_back(i);
  }
  return cores;
}

/// n = ceil(window_size / 2).
inline std::size_t top_n(const SegmentationConfig& config) {
  config.validate();
  return (config.window_size + 1) / 2;
}

inline double span_intensity(std::span<const Token> tokens, std::size_t start, std::size_t end) {
  double total = 0.0;
  for (std::size_t i = start; i < end; ++i) total += std::abs(tokens[i].sentiment);
  return total;
}

namespace detail {

inline BehaviorChunk make_chunk(std::span<const Token> tokens, std::size_t start, std::size_t end,
                                std::size_t core, std::span<const std::size_t> token_ids) {
  BehaviorChunk c;
  c.start = start;
  c.end = end;
  c.core_index = core;
  c.intensity = span_intensity(tokens, start, end);
  if (!token_ids.empty()) c.token_ids.assign(token_ids.begin() + static_cast<std::ptrdiff_t>(start),
                                             token_ids.begin() + static_cast<std::ptrdiff_t>(end));
  return c;
}

}  // namespace detail

/// Every window of `window_size` consecutive tokens that contains a core,
/// by start index. A sentence shorter than the window is one chunk. The
/// candidate's core_index is the first core inside it.
inline std::vector<BehaviorChunk> slide_windows(std::span<const Token> tokens, std::span<const std::size_t> cores,
                                                const SegmentationConfig& config,
                                                std::span<const std::size_t> token_ids = {}) {
  config.validate();
  std::vector<BehaviorChunk> out;
  if (cores.empty() || tokens.empty()) return out;
  const std::size_t w = std::min(config.window_size, tokens.size());
  for (std::size_t start = 0; start + w <= tokens.size(); ++start) {
    const std::size_t end = start + w;
    auto it = std::lower_bound(cores.begin(), cores.end(), start);
    if (it != cores.end() && *it < end) out.push_back(detail::make_chunk(tokens, start, end, *it, token_ids));
  }
  return out;
}

/// Dedup, per-core top-n by intensity (ties: smaller start), then the
/// deduplicated union ordered by (start, core_index).
inline std::vector<BehaviorChunk> select_chunks(std::span<const BehaviorChunk> candidates, std::span<const Token> tokens,
                                                const SegmentationConfig& config) {
  const std::size_t n = top_n(config);
  std::vector<BehaviorChunk> unique;
  for (const auto& c : candidates) {
    if (std::none_of(unique.begin(), unique.end(), [&](const BehaviorChunk& u) { return u.same_span(c); })) {
      unique.push_back(c);
    }
  }

  std::vector<BehaviorChunk> chosen;
  for (std::size_t core : find_cores(tokens)) {
    std::vector<const BehaviorChunk*> pool;
    for (const auto& c : unique) {
      if (c.start <= core && core < c.end) pool.push_back(&c);
    }
    std::stable_sort(pool.begin(), pool.end(), [](const BehaviorChunk* a, const BehaviorChunk* b) {
      if (a->intensity != b->intensity) return a->intensity > b->intensity;
      return a->start < b->start;
    });
    for (std::size_t k = 0; k < std::min(n, pool.size()); ++k) {
      BehaviorChunk c = *pool[k];
      c.core_index = core;
      chosen.push_back(std::move(c));
    }
  }

  std::stable_sort(chosen.begin(), chosen.end(), [](const BehaviorChunk& a, const BehaviorChunk& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.core_index < b.core_index;
  });
  std::vector<BehaviorChunk> out;
  for (auto& c : chosen) {
    if (out.empty() || !out.back().same_span(c)) out.push_back(std::move(c));
  }
  return out;
}

/// Full chunking of one sentence. Verb-free sentences fall back to a single
/// whole-sentence chunk with core_index 0 and `fallback` set; an empty
/// sentence yields no chunks.
inline Segmentation segment(std::span<const Token> tokens, const SegmentationConfig& config,
                            std::span<const std::size_t> token_ids = {}) {
  Segmentation seg;
  const auto cores = find_cores(tokens);
  if (cores.empty()) {
    if (!tokens.empty()) {
      seg.chunks.push_back(detail::make_chunk(tokens, 0, tokens.size(), 0, token_ids));
      seg.fallback = true;
    }
    return seg;
  }
  const auto candidates = slide_windows(tokens, cores, config, token_ids);
  seg.chunks = select_chunks(candidates, tokens, config);
  return seg;
}

/// Elementwise sum of the chunk's token embeddings.
inline Tensor behavior_embed(const BehaviorChunk& chunk, const Tensor& table) {
  if (table.rank() != 2) throw ShapeError("behavior_embed: embedding table must be a matrix");
  Tensor out(Shape{table.cols()});
  for (std::size_t id : chunk.token_ids) {
    if (id >= table.rows()) {
      throw ShapeError("behavior_embed: token id " + std::to_string(id) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    for (std::size_t j = 0; j < table.cols(); ++j) out[j] += table.at(id, j);
  }
  return out;
}

/// Differentiable form over a whole chunk sequence: (chunks x dim).
inline Var behavior_embeddings(std::span<const BehaviorChunk> chunks, const Var& table, std::size_t pad_id = 0) {
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(chunks.size());
  for (const auto& c : chunks) groups.push_back(c.token_ids);
  return gather_sum(table, groups, pad_id);
}

}  // namespace bns
