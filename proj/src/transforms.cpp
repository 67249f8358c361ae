#include "augnet/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "augnet/error.hpp"
#include "augnet/fft.hpp"

namespace augnet {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct KindInfo {
  TransformKind kind;
  std::string_view name;
  double range;
  bool image;
  bool signal;
};

constexpr std::array<KindInfo, 12> kKinds{{
    {TransformKind::translate_x, "translate_x", 1.0, true, false},
    {TransformKind::translate_y, "translate_y", 1.0, true, false},
    {TransformKind::rotate, "rotate", std::numbers::pi, true, false},
    {TransformKind::shear_x, "shear_x", 0.3, true, false},
    {TransformKind::shear_y, "shear_y", 0.3, true, false},
    {TransformKind::hflip, "hflip", 1.0, true, false},
    {TransformKind::sample_pairing, "sample_pairing", 1.0, true, true},
    {TransformKind::brightness, "brightness", 0.5, true, true},
    {TransformKind::contrast, "contrast", 0.9, true, true},
    {TransformKind::frequency_shift, "frequency_shift", 2.0, false, true},
    {TransformKind::ft_surrogate, "ft_surrogate", 1.0, false, true},
    {TransformKind::gaussian_noise, "gaussian_noise", 1.0, true, true},
}};

const KindInfo& info(TransformKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k;
  }
  throw ConfigError("unknown transform kind");
}

double scalar_mu(const Tensor& mu, std::string_view op) {
  if (mu.size() != 1) throw ShapeError(std::string(op) + ": magnitude must be a single element");
  return mu[0];
}

void require_rank(const Tensor& x, std::size_t rank, std::string_view op) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(x.shape()));
  }
}

void require_count(std::size_t got, std::size_t want, std::string_view op, std::string_view what) {
  if (got != want) {
    throw ShapeError(std::string(op) + ": " + std::string(what) + " has " + std::to_string(got) + " entries, expected " +
                     std::to_string(want));
  }
}

// Affine map in normalized coordinates: source = [a b c; d e f] * (x, y, 1),
// together with its derivative wrt the scalar parameter theta.
struct Affine {
  double a, b, c, d, e, f;
  double da, db, dc, dd, de, df;
};

Affine affine_for(TransformKind kind, double theta) {
  switch (kind) {
    case TransformKind::translate_x:
      return {1, 0, theta, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    case TransformKind::translate_y:
      return {1, 0, 0, 0, 1, theta, 0, 0, 0, 0, 0, 1};
    case TransformKind::rotate: {
      const double cs = std::cos(theta), sn = std::sin(theta);
      return {cs, -sn, 0, sn, cs, 0, -sn, -cs, 0, cs, -sn, 0};
    }
    case TransformKind::shear_x:
      return {1, theta, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0};
    case TransformKind::shear_y:
      return {1, 0, 0, theta, 1, 0, 0, 0, 0, 1, 0, 0};
    default:
      throw ConfigError("affine_warp: " + std::string(to_string(kind)) + " is not a geometric transform");
  }
}

}  // namespace

std::string_view to_string(TransformKind kind) { return info(kind).name; }

TransformKind transform_kind_from_string(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  throw ConfigError("unknown transform '" + std::string(name) + "'");
}

const std::vector<TransformKind>& all_transform_kinds() {
  static const std::vector<TransformKind> kinds = [] {
    std::vector<TransformKind> v;
    for (const auto& k : kKinds) v.push_back(k.kind);
    return v;
  }();
  return kinds;
}

bool accepts(TransformKind kind, Modality modality) {
  const auto& k = info(kind);
  return modality == Modality::image ? k.image : k.signal;
}

Modality modality_of(const Tensor& x) {
  if (x.rank() == 4) return Modality::image;
  if (x.rank() == 3) return Modality::signal;
  throw ShapeError("cannot infer modality of a batch shaped " + to_string(x.shape()));
}

TransformSpec TransformSpec::defaults(TransformKind kind) {
  TransformSpec spec;
  spec.kind = kind;
  spec.range = info(kind).range;
  spec.estimator = kind == TransformKind::hflip ? Estimator::straight_through : Estimator::reparam;
  return spec;
}

void TransformSpec::validate() const {
  if (!(range > 0.0) || !std::isfinite(range)) throw ConfigError(std::string(to_string(kind)) + ": range must be positive");
  if (kind == TransformKind::frequency_shift && !(sample_rate > 0.0)) {
    throw ConfigError("frequency_shift: sample_rate must be positive");
  }
  const bool st = kind == TransformKind::hflip;
  if ((estimator == Estimator::straight_through) != st) {
    throw ConfigError(std::string(to_string(kind)) + ": unsupported gradient estimator");
  }
}

NoiseDraw sample_draw(const TransformSpec& spec, const Shape& batch_shape, Rng& rng) {
  if (batch_shape.empty()) throw ShapeError("sample_draw: empty batch shape");
  const std::size_t batch = batch_shape[0];
  const std::size_t per_example = batch ? numel(batch_shape) / batch : 0;
  NoiseDraw draw;
  draw.epsilon.resize(batch);
  switch (spec.kind) {
    case TransformKind::hflip:
    case TransformKind::sample_pairing:
      for (auto& e : draw.epsilon) e = rng.uniform();
      if (spec.kind == TransformKind::sample_pairing) {
        draw.partner.resize(batch);
        for (std::size_t i = 0; i < batch; ++i) {
          // Uniform over the other examples; a batch of one pairs with itself.
          if (batch == 1) {
            draw.partner[i] = 0;
          } else {
            const std::size_t j = rng.index(batch - 1);
            draw.partner[i] = j >= i ? j + 1 : j;
          }
        }
      }
      break;
    case TransformKind::ft_surrogate: {
      const std::size_t n = batch_shape.back();
      const std::size_t bins = n / 2 > 0 ? n / 2 - 1 : 0;
      draw.aux.resize(batch * bins);
      for (auto& u : draw.aux) u = rng.uniform();
      break;
    }
    case TransformKind::gaussian_noise:
      draw.aux.resize(batch * per_example);
      for (auto& z : draw.aux) z = rng.normal();
      break;
    default:
      for (auto& e : draw.epsilon) e = rng.uniform(-1.0, 1.0);
  }
  return draw;
}

Tensor apply_transform(const TransformSpec& spec, const Tensor& x, const Tensor& mu, const NoiseDraw& draw) {
  if (!accepts(spec.kind, modality_of(x))) {
    throw ConfigError(std::string(to_string(spec.kind)) + " does not accept " +
                      (modality_of(x) == Modality::image ? "images" : "signals"));
  }
  switch (spec.kind) {
    case TransformKind::translate_x:
    case TransformKind::translate_y:
    case TransformKind::rotate:
    case TransformKind::shear_x:
    case TransformKind::shear_y:
      return affine_warp(x, spec.kind, mu, draw.epsilon, spec.range);
    case TransformKind::hflip:
      return hflip(x, mu, draw.epsilon);
    case TransformKind::sample_pairing:
    case TransformKind::brightness:
    case TransformKind::contrast:
      return blend(spec.kind, x, mu, draw.epsilon, draw.partner, spec.range);
    case TransformKind::frequency_shift:
      return frequency_shift(x, mu, draw.epsilon, spec.sample_rate, spec.range);
    case TransformKind::ft_surrogate:
      return ft_surrogate(x, mu, draw.aux, spec.range);
    case TransformKind::gaussian_noise:
      return gaussian_noise(x, mu, draw.aux, spec.range);
  }
  throw ConfigError("unknown transform kind");
}

Tensor affine_warp(const Tensor& images, TransformKind kind, const Tensor& mu, std::span<const double> epsilon,
                   double range) {
  require_rank(images, 4, "affine_warp");
  const double m = scalar_mu(mu, "affine_warp");
  const std::size_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  require_count(epsilon.size(), B, "affine_warp", "epsilon");
  const auto in = images.data();

  // Pixel-centred coordinates keep the identity map exact: u = j - (W-1)/2, and
  // the normalized coordinate 2u/W maps back to column (W/2) x_s + (W-1)/2.
  const double cx = (static_cast<double>(W) - 1.0) / 2.0, cy = (static_cast<double>(H) - 1.0) / 2.0;
  const double hw = static_cast<double>(W) / 2.0, hh = static_cast<double>(H) / 2.0;
  const double aspect_yx = static_cast<double>(H) / static_cast<double>(W);

  struct Tap {
    std::ptrdiff_t x0, y0;
    double fx, fy;
    double dpx, dpy;  // d(source pixel)/d(theta)
  };
  std::vector<Tap> taps(B * H * W);
  std::vector<double> dtheta(B);
  for (std::size_t b = 0; b < B; ++b) {
    dtheta[b] = epsilon[b] * range;
    const Affine A = affine_for(kind, m * dtheta[b]);
    for (std::size_t i = 0; i < H; ++i) {
      const double v = static_cast<double>(i) - cy;
      for (std::size_t j = 0; j < W; ++j) {
        const double u = static_cast<double>(j) - cx;
        const double px = A.a * u + A.b * v / aspect_yx + A.c * hw + cx;
        const double py = A.d * u * aspect_yx + A.e * v + A.f * hh + cy;
        Tap t;
        const double fx0 = std::floor(px), fy0 = std::floor(py);
        t.x0 = static_cast<std::ptrdiff_t>(fx0);
        t.y0 = static_cast<std::ptrdiff_t>(fy0);
        t.fx = px - fx0;
        t.fy = py - fy0;
        t.dpx = A.da * u + A.db * v / aspect_yx + A.dc * hw;
        t.dpy = A.dd * u * aspect_yx + A.de * v + A.df * hh;
        taps[(b * H + i) * W + j] = t;
      }
    }
  }

  auto pixel = [H, W](const double* plane, std::ptrdiff_t y, std::ptrdiff_t x) {
    if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(W) || y >= static_cast<std::ptrdiff_t>(H)) return 0.0;
    return plane[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
  };

  std::vector<double> out(images.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* plane = in.data() + (b * C + c) * H * W;
      double* dst = out.data() + (b * C + c) * H * W;
      for (std::size_t p = 0; p < H * W; ++p) {
        const Tap& t = taps[b * H * W + p];
        const double i00 = pixel(plane, t.y0, t.x0), i01 = pixel(plane, t.y0, t.x0 + 1);
        const double i10 = pixel(plane, t.y0 + 1, t.x0), i11 = pixel(plane, t.y0 + 1, t.x0 + 1);
        dst[p] = (1.0 - t.fx) * (1.0 - t.fy) * i00 + t.fx * (1.0 - t.fy) * i01 + (1.0 - t.fx) * t.fy * i10 +
                 t.fx * t.fy * i11;
      }
    }
  }

  return Tape::record(
      "affine_warp", images.shape(), std::move(out), {&images, &mu},
      [images, taps = std::move(taps), dtheta = std::move(dtheta), B, C, H, W, pixel](auto g, auto gin) {
        const auto src = images.data();
        for (std::size_t b = 0; b < B; ++b) {
          double dmu = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            const double* plane = src.data() + (b * C + c) * H * W;
            const double* gp = g.data() + (b * C + c) * H * W;
            for (std::size_t p = 0; p < H * W; ++p) {
              const Tap& t = taps[b * H * W + p];
              const double go = gp[p];
              if (go == 0.0) continue;
              if (!gin[1].empty()) {
                const double i00 = pixel(plane, t.y0, t.x0), i01 = pixel(plane, t.y0, t.x0 + 1);
                const double i10 = pixel(plane, t.y0 + 1, t.x0), i11 = pixel(plane, t.y0 + 1, t.x0 + 1);
                const double dx = (1.0 - t.fy) * (i01 - i00) + t.fy * (i11 - i10);
                const double dy = (1.0 - t.fx) * (i10 - i00) + t.fx * (i11 - i01);
                dmu += go * (dx * t.dpx + dy * t.dpy);
              }
              if (!gin[0].empty()) {
                double* gplane = gin[0].data() + (b * C + c) * H * W;
                const std::array<std::ptrdiff_t, 4> ys{t.y0, t.y0, t.y0 + 1, t.y0 + 1};
                const std::array<std::ptrdiff_t, 4> xs{t.x0, t.x0 + 1, t.x0, t.x0 + 1};
                const std::array<double, 4> ws{(1.0 - t.fx) * (1.0 - t.fy), t.fx * (1.0 - t.fy), (1.0 - t.fx) * t.fy,
                                               t.fx * t.fy};
                for (int k = 0; k < 4; ++k) {
                  if (xs[k] < 0 || ys[k] < 0 || xs[k] >= static_cast<std::ptrdiff_t>(W) ||
                      ys[k] >= static_cast<std::ptrdiff_t>(H)) {
                    continue;
                  }
                  gplane[static_cast<std::size_t>(ys[k]) * W + static_cast<std::size_t>(xs[k])] += ws[k] * go;
                }
              }
            }
          }
          if (!gin[1].empty()) gin[1][0] += dmu * dtheta[b];
        }
      });
}

Tensor hflip(const Tensor& images, const Tensor& mu, std::span<const double> uniform) {
  require_rank(images, 4, "hflip");
  const double m = scalar_mu(mu, "hflip");
  const std::size_t B = images.dim(0), rows = images.dim(1) * images.dim(2), W = images.dim(3);
  require_count(uniform.size(), B, "hflip", "draw");
  std::vector<char> flip(B);
  for (std::size_t b = 0; b < B; ++b) flip[b] = uniform[b] < m;
  const auto in = images.data();
  std::vector<double> out(images.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = in.data() + (b * rows + r) * W;
      double* dst = out.data() + (b * rows + r) * W;
      for (std::size_t j = 0; j < W; ++j) dst[j] = flip[b] ? src[W - 1 - j] : src[j];
    }
  }
  // Straight-through: d(out)/d(mu) is taken as flip(x) - x.
  return Tape::record("hflip", images.shape(), std::move(out), {&images, &mu},
                      [images, flip = std::move(flip), B, rows, W](auto g, auto gin) {
                        const auto src = images.data();
                        for (std::size_t b = 0; b < B; ++b) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const std::size_t base = (b * rows + r) * W;
                            for (std::size_t j = 0; j < W; ++j) {
                              const double go = g[base + j];
                              if (!gin[0].empty()) gin[0][base + (flip[b] ? W - 1 - j : j)] += go;
                              if (!gin[1].empty()) gin[1][0] += go * (src[base + W - 1 - j] - src[base + j]);
                            }
                          }
                        }
                      });
}

Tensor blend(TransformKind kind, const Tensor& x, const Tensor& mu, std::span<const double> epsilon,
             std::span<const std::size_t> partner, double range) {
  if (x.rank() < 2) throw ShapeError("blend: expected a batch");
  const double m = scalar_mu(mu, "blend");
  const std::size_t B = x.dim(0), N = x.size() / std::max<std::size_t>(B, 1);
  require_count(epsilon.size(), B, "blend", "epsilon");
  const auto in = x.data();
  std::vector<double> out(x.size());
  std::vector<double> means(B, 0.0);

  switch (kind) {
    case TransformKind::sample_pairing: {
      if (partner.size() != B) throw ConfigError("sample_pairing: partner indices required for every example");
      for (auto p : partner) {
        if (p >= B) throw ShapeError("sample_pairing: partner index out of range");
      }
      for (std::size_t b = 0; b < B; ++b) {
        const double c = m * epsilon[b] * range;
        for (std::size_t k = 0; k < N; ++k) {
          out[b * N + k] = in[b * N + k] + c * (in[partner[b] * N + k] - in[b * N + k]);
        }
      }
      std::vector<std::size_t> pt(partner.begin(), partner.end());
      std::vector<double> eps(epsilon.begin(), epsilon.end());
      return Tape::record("sample_pairing", x.shape(), std::move(out), {&x, &mu},
                          [x, m, range, pt = std::move(pt), eps = std::move(eps), B, N](auto g, auto gin) {
                            const auto src = x.data();
                            for (std::size_t b = 0; b < B; ++b) {
                              const double c = m * eps[b] * range;
                              for (std::size_t k = 0; k < N; ++k) {
                                const double go = g[b * N + k];
                                if (!gin[0].empty()) {
                                  gin[0][b * N + k] += (1.0 - c) * go;
                                  gin[0][pt[b] * N + k] += c * go;
                                }
                                if (!gin[1].empty()) {
                                  gin[1][0] += go * eps[b] * range * (src[pt[b] * N + k] - src[b * N + k]);
                                }
                              }
                            }
                          });
    }
    case TransformKind::brightness: {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t k = 0; k < N; ++k) out[b * N + k] = in[b * N + k] + range * m * epsilon[b];
      }
      std::vector<double> eps(epsilon.begin(), epsilon.end());
      return Tape::record("brightness", x.shape(), std::move(out), {&x, &mu},
                          [range, eps = std::move(eps), B, N](auto g, auto gin) {
                            for (std::size_t b = 0; b < B; ++b) {
                              for (std::size_t k = 0; k < N; ++k) {
                                if (!gin[0].empty()) gin[0][b * N + k] += g[b * N + k];
                                if (!gin[1].empty()) gin[1][0] += g[b * N + k] * range * eps[b];
                              }
                            }
                          });
    }
    case TransformKind::contrast: {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t k = 0; k < N; ++k) means[b] += in[b * N + k];
        means[b] /= static_cast<double>(N);
        // m + f (x - m) written as x + (f - 1)(x - m) so that f = 1 is exact.
        const double c = range * m * epsilon[b];
        for (std::size_t k = 0; k < N; ++k) out[b * N + k] = in[b * N + k] + c * (in[b * N + k] - means[b]);
      }
      std::vector<double> eps(epsilon.begin(), epsilon.end());
      return Tape::record(
          "contrast", x.shape(), std::move(out), {&x, &mu},
          [x, m, range, eps = std::move(eps), means = std::move(means), B, N](auto g, auto gin) {
            const auto src = x.data();
            for (std::size_t b = 0; b < B; ++b) {
              const double f = 1.0 + range * m * eps[b];
              double gsum = 0.0, dmu = 0.0;
              for (std::size_t k = 0; k < N; ++k) {
                gsum += g[b * N + k];
                dmu += g[b * N + k] * (src[b * N + k] - means[b]);
              }
              if (!gin[0].empty()) {
                const double shared = (1.0 - f) * gsum / static_cast<double>(N);
                for (std::size_t k = 0; k < N; ++k) gin[0][b * N + k] += f * g[b * N + k] + shared;
              }
              if (!gin[1].empty()) gin[1][0] += dmu * range * eps[b];
            }
          });
    }
    default:
      throw ConfigError("blend: " + std::string(to_string(kind)) + " is not a blend");
  }
}

Tensor frequency_shift(const Tensor& signals, const Tensor& mu, std::span<const double> epsilon, double sample_rate,
                       double max_shift_hz) {
  require_rank(signals, 3, "frequency_shift");
  if (!(sample_rate > 0.0)) throw ConfigError("frequency_shift: sample_rate must be positive");
  const double m = scalar_mu(mu, "frequency_shift");
  const std::size_t B = signals.dim(0), C = signals.dim(1), n = signals.dim(2);
  require_count(epsilon.size(), B, "frequency_shift", "epsilon");
  const auto in = signals.data();

  // Re((x + iHx) e^{i phi}) = x cos(phi) - Hx sin(phi), phi_t = 2 pi df t / sr.
  std::vector<double> hil(signals.size()), cosv(B * n), sinv(B * n);
  for (std::size_t b = 0; b < B; ++b) {
    const double df = m * epsilon[b] * max_shift_hz;
    if (!std::isfinite(df)) throw NumericError("frequency_shift: non-finite shift");
    for (std::size_t t = 0; t < n; ++t) {
      const double phi = kTwoPi * df * static_cast<double>(t) / sample_rate;
      cosv[b * n + t] = std::cos(phi);
      sinv[b * n + t] = std::sin(phi);
    }
    for (std::size_t c = 0; c < C; ++c) {
      const auto h = fft::hilbert(in.subspan((b * C + c) * n, n));
      std::copy(h.begin(), h.end(), hil.begin() + static_cast<std::ptrdiff_t>((b * C + c) * n));
    }
  }
  std::vector<double> out(signals.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * n;
      for (std::size_t t = 0; t < n; ++t) out[base + t] = in[base + t] * cosv[b * n + t] - hil[base + t] * sinv[b * n + t];
    }
  }
  std::vector<double> eps(epsilon.begin(), epsilon.end());
  return Tape::record(
      "frequency_shift", signals.shape(), std::move(out), {&signals, &mu},
      [signals, hil = std::move(hil), cosv = std::move(cosv), sinv = std::move(sinv), eps = std::move(eps), B, C, n,
       sample_rate, max_shift_hz](auto g, auto gin) {
        const auto src = signals.data();
        std::vector<double> gs(n);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (b * C + c) * n;
            if (!gin[1].empty()) {
              double dfreq = 0.0;
              for (std::size_t t = 0; t < n; ++t) {
                const double dphi = kTwoPi * static_cast<double>(t) / sample_rate;
                dfreq -= g[base + t] * dphi * (src[base + t] * sinv[b * n + t] + hil[base + t] * cosv[b * n + t]);
              }
              gin[1][0] += dfreq * eps[b] * max_shift_hz;
            }
            if (!gin[0].empty()) {
              // The Hilbert operator is skew-adjoint, so d/dx of -H(x) s is +H(g s).
              for (std::size_t t = 0; t < n; ++t) gs[t] = g[base + t] * sinv[b * n + t];
              const auto hg = fft::hilbert(gs);
              for (std::size_t t = 0; t < n; ++t) gin[0][base + t] += g[base + t] * cosv[b * n + t] + hg[t];
            }
          }
        }
      });
}

namespace {

// Rotates bins 1..n/2-1 of spectra (B, C, m, 2) by 2 pi mu range (u_{b,k} - 1/2); DC and Nyquist are
// left alone. Centring the phase keeps the expected deviation increasing in mu up to the full circle.
Tensor phase_rotate(const Tensor& spec, const Tensor& mu, std::span<const double> phases, double range) {
  const double m = scalar_mu(mu, "ft_surrogate");
  const std::size_t B = spec.dim(0), C = spec.dim(1), bins = spec.dim(2);
  const std::size_t inner = bins >= 2 ? bins - 2 : 0;
  require_count(phases.size(), B * inner, "ft_surrogate", "phase draw");
  const auto in = spec.data();
  std::vector<double> out(in.begin(), in.end());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 1; k + 1 < bins; ++k) {
        const double theta = kTwoPi * m * range * (phases[b * inner + k - 1] - 0.5);
        const std::size_t i = ((b * C + c) * bins + k) * 2;
        const double re = in[i], im = in[i + 1];
        out[i] = re * std::cos(theta) - im * std::sin(theta);
        out[i + 1] = re * std::sin(theta) + im * std::cos(theta);
      }
    }
  }
  std::vector<double> u(phases.begin(), phases.end());
  auto result = std::make_shared<std::vector<double>>(out);
  return Tape::record(
      "ft_phase", spec.shape(), std::move(out), {&spec, &mu},
      [u = std::move(u), result, m, range, B, C, bins, inner](auto g, auto gin) {
        const auto& y = *result;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t k = 0; k < bins; ++k) {
              const std::size_t i = ((b * C + c) * bins + k) * 2;
              if (k == 0 || k + 1 == bins) {
                if (!gin[0].empty()) {
                  gin[0][i] += g[i];
                  gin[0][i + 1] += g[i + 1];
                }
                continue;
              }
              const double rate = kTwoPi * range * (u[b * inner + k - 1] - 0.5);
              const double theta = rate * m;
              const double cs = std::cos(theta), sn = std::sin(theta);
              if (!gin[0].empty()) {
                gin[0][i] += g[i] * cs + g[i + 1] * sn;
                gin[0][i + 1] += -g[i] * sn + g[i + 1] * cs;
              }
              if (!gin[1].empty()) gin[1][0] += rate * (-g[i] * y[i + 1] + g[i + 1] * y[i]);
            }
          }
        }
      });
}

}  // namespace

Tensor ft_surrogate(const Tensor& signals, const Tensor& mu, std::span<const double> phases, double range) {
  require_rank(signals, 3, "ft_surrogate");
  const std::size_t n = signals.dim(2);
  return fft::irfft(phase_rotate(fft::rfft(signals), mu, phases, range), n);
}

Tensor gaussian_noise(const Tensor& x, const Tensor& mu, std::span<const double> z, double sigma_max) {
  const double m = scalar_mu(mu, "gaussian_noise");
  require_count(z.size(), x.size(), "gaussian_noise", "noise draw");
  const auto in = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] + m * sigma_max * z[i];
  std::vector<double> noise(z.begin(), z.end());
  return Tape::record("gaussian_noise", x.shape(), std::move(out), {&x, &mu},
                      [noise = std::move(noise), sigma_max](auto g, auto gin) {
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          if (!gin[0].empty()) gin[0][i] += g[i];
                          if (!gin[1].empty()) gin[1][0] += g[i] * sigma_max * noise[i];
                        }
                      });
}

namespace {

Tensor permute_pixels(const Tensor& images, std::vector<std::size_t> source, std::string_view op) {
  const auto in = images.data();
  std::vector<double> out(images.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[source[i]];
  return Tape::record(op, images.shape(), std::move(out), {&images}, [source = std::move(source)](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][source[i]] += g[i];
  });
}

}  // namespace

Tensor flip_horizontal(const Tensor& images) {
  require_rank(images, 4, "flip_horizontal");
  const std::size_t W = images.dim(3), rows = images.size() / W;
  std::vector<std::size_t> source(images.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < W; ++j) source[r * W + j] = r * W + (W - 1 - j);
  }
  return permute_pixels(images, std::move(source), "flip_horizontal");
}

Tensor rotate90(const Tensor& images, int quarter_turns) {
  require_rank(images, 4, "rotate90");
  const std::size_t H = images.dim(2), W = images.dim(3);
  if (H != W) throw ShapeError("rotate90: image must be square");
  const int k = ((quarter_turns % 4) + 4) % 4;
  const std::size_t planes = images.dim(0) * images.dim(1);
  std::vector<std::size_t> source(images.size());
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        std::size_t si = i, sj = j;
        // One counter-clockwise turn reads out[i][j] = in[j][W-1-i].
        for (int t = 0; t < k; ++t) {
          const std::size_t ni = sj, nj = W - 1 - si;
          si = ni;
          sj = nj;
        }
        source[(p * H + i) * W + j] = (p * H + si) * W + sj;
      }
    }
  }
  return permute_pixels(images, std::move(source), "rotate90");
}

}  // namespace augnet
