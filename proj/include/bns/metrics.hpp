#pragma once

#include <cstddef>
#include <span>

#include "bns/error.hpp"

namespace bns {

/// Binary confusion counts; class 1 (sarcastic) is "positive".
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricsReport {
  double precision = 0.0;  // macro over both classes
  double recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionCounts counts;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw Error("confusion: predictions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p && !y) ++c.fp;
    else if (!p && y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace detail {

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

/// Precision, recall and F1 per class (a zero denominator counts as 0),
/// averaged over the two classes; accuracy from the same counts.
inline MetricsReport metrics_from_counts(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error("metrics: empty split");
  using detail::ratio;
  const double p1 = ratio(c.tp, c.tp + c.fp), r1 = ratio(c.tp, c.tp + c.fn);
  const double p0 = ratio(c.tn, c.tn + c.fn), r0 = ratio(c.tn, c.tn + c.fp);
  MetricsReport m;
  m.counts = c;
  m.precision = (p1 + p0) / 2.0;
  m.recall = (r1 + r0) / 2.0;
  m.macro_f1 = (detail::f1(p1, r1) + detail::f1(p0, r0)) / 2.0;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  return m;
}

inline MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  return metrics_from_counts(confusion(predictions, labels));
}

}  // namespace bns
