#include "augnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "augnet/error.hpp"

namespace augnet {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_distance: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const bool za = std::sqrt(na) < 1e-12, zb = std::sqrt(nb) < 1e-12;
  if (za && zb) return 0.0;
  if (za || zb) return 1.0;
  // sqrt(na * nb) rather than sqrt(na) * sqrt(nb) so that d(v, v) is exactly 0.
  return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

std::vector<int> argmax_rows(const Tensor& outputs) {
  if (outputs.rank() != 2) throw ShapeError("argmax_rows: expects (B, K) outputs");
  const std::size_t B = outputs.dim(0), K = outputs.dim(1);
  std::vector<int> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = outputs.data().subspan(b * K, K);
    out[b] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
  if (labels.empty()) throw ConfigError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double accuracy(const Tensor& outputs, std::span<const int> labels) { return accuracy(argmax_rows(outputs), labels); }

double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("balanced_accuracy: length mismatch");
  if (labels.empty()) throw ConfigError("balanced_accuracy: empty input");
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& c = per_class[labels[i]];
    c.first += predictions[i] == labels[i];
    ++c.second;
  }
  double s = 0.0;
  for (const auto& [label, c] : per_class) s += static_cast<double>(c.first) / static_cast<double>(c.second);
  return s / static_cast<double>(per_class.size());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile: q must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  // Sattolo's algorithm: a uniformly random n-cycle.
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i - 1)]);
  return p;
}

InvarianceReport invariance(const OutputFn& f, const Tensor& x, const InputTransform& transform, Rng& rng) {
  const std::size_t n = x.rank() ? x.dim(0) : 0;
  if (n < 2) throw ConfigError("invariance: needs at least 2 examples");
  // Both evaluations share the model's random stream (common random numbers).
  const Rng model_rng = rng.split(1);
  Rng transform_rng = rng.split(2), perm_rng = rng.split(3);
  Rng r1 = model_rng, r2 = model_rng;
  const Tensor fx = f(x, r1);
  const Tensor ftx = f(transform(x, transform_rng), r2);
  if (fx.rank() != 2 || fx.dim(0) != n || ftx.shape() != fx.shape()) throw ShapeError("invariance: bad output shape");
  const std::size_t K = fx.dim(1);
  auto row = [K](const Tensor& t, std::size_t i) { return t.data().subspan(i * K, K); };

  const auto pi = derangement(n, perm_rng);
  double b = 0.0;
  for (std::size_t i = 0; i < n; ++i) b += cosine_distance(row(fx, i), row(fx, pi[i]));
  b /= static_cast<double>(n);
  if (b < 1e-9) throw DegenerateMetricError("invariance: baseline distance " + std::to_string(b) + " (collapsed outputs)");

  InvarianceReport r;
  r.baseline = b;
  r.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.scores[i] = (b - cosine_distance(row(fx, i), row(ftx, i))) / b;
  r.median = percentile(r.scores, 50.0);
  r.lower = percentile(r.scores, 12.5);
  r.upper = percentile(r.scores, 87.5);
  return r;
}

}  // namespace augnet
