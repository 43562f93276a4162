#pragma once

// ECG standardization: resampling, wavelet baseline removal, zero-phase FIR
// band-pass, scalar Kalman smoothing and [0,1]-rescale-then-center.

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ecgtda/errors.hpp"
#include "ecgtda/signal.hpp"

namespace ecgtda::dsp {

struct PreprocessConfig {
  double target_rate_hz = 200.0;
  double fir_low_hz = 0.05;
  double fir_high_hz = 50.0;
  int fir_taps = 1001;
  std::string wavelet_name = "db8";
  int wavelet_levels = 8;
  bool kalman_enabled = false;
  double kalman_q = 1e-5;
  double kalman_r = 1e-2;

  void validate() const {
    if (!(target_rate_hz > 0)) throw InvalidInput("target_rate_hz must be positive");
    if (!(fir_low_hz > 0 && fir_low_hz < fir_high_hz && fir_high_hz < target_rate_hz / 2))
      throw InvalidInput("require 0 < fir_low_hz < fir_high_hz < target_rate_hz/2");
    if (fir_taps < 1 || fir_taps % 2 == 0) throw InvalidInput("fir_taps must be odd");
    if (wavelet_name != "db8") throw InvalidInput("unsupported wavelet '" + wavelet_name + "'");
    if (wavelet_levels < 1) throw InvalidInput("wavelet_levels must be >= 1");
    if (!(kalman_q > 0 && kalman_r > 0)) throw InvalidInput("kalman_q and kalman_r must be positive");
  }
};

/// Whole-sample symmetric reflection: -1 -> 1, n -> n-2, repeated as needed.
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  Eigen::Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

// --- resampling ----------------------------------------------------------

inline Eigen::Index resampled_length(Eigen::Index n, double source_hz, double target_hz) {
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(double(n) * target_hz / source_hz)));
}

/// Linear interpolation onto the target rate's time grid starting at t = 0.
template <typename Scalar>
BasicSignal<Scalar> resample_linear(const BasicSignal<Scalar>& s, double target_rate_hz) {
  validate(s, "resample_linear");
  if (!(target_rate_hz > 0) || !std::isfinite(target_rate_hz))
    throw InvalidInput("resample_linear: target rate must be positive");
  if (target_rate_hz == s.sample_rate_hz) return s;

  const Eigen::Index n = s.size();
  const Eigen::Index m = resampled_length(n, s.sample_rate_hz, target_rate_hz);
  const double step = s.sample_rate_hz / target_rate_hz;
  VectorX<Scalar> out(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double pos = std::min(double(j) * step, double(n - 1));
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index i1 = std::min(i0 + 1, n - 1);
    const Scalar frac = Scalar(pos - double(i0));
    out[j] = s.samples[i0] + frac * (s.samples[i1] - s.samples[i0]);
  }
  return {std::move(out), target_rate_hz};
}

/// Maps sample indices to the resampled grid: round(i * target/source), clamped.
inline std::vector<long> remap_indices(const std::vector<long>& indices, double source_hz, double target_hz,
                                       Eigen::Index source_length) {
  const Eigen::Index m = resampled_length(source_length, source_hz, target_hz);
  std::vector<long> out;
  out.reserve(indices.size());
  for (const long i : indices) {
    const long r = std::llround(double(i) * target_hz / source_hz);
    out.push_back(std::clamp<long>(r, 0, static_cast<long>(m - 1)));
  }
  return out;
}

// --- wavelets ------------------------------------------------------------

/// Daubechies-8 orthonormal scaling filter (16 taps, reconstruction order).
inline const std::array<double, 16>& db8_scaling_filter() {
  static const std::array<double, 16> h = {
      0.05441584224310401,    0.31287159091429995,   0.6756307362972898,    0.5853546836542067,
      -0.015829105256349306,  -0.2840155429615469,   0.0004724845739132828, 0.12874742662047847,
      -0.017369301001807547,  -0.044088253930794755, 0.013981027917398282,  0.008746094047405777,
      -0.004870352993451574,  -0.00039174037337694705, 0.0006754494064505693, -0.00011747678412476953};
  return h;
}

/// Quadrature-mirror wavelet filter: g[j] = (-1)^j h[L-1-j].
inline std::array<double, 16> db8_wavelet_filter() {
  const auto& h = db8_scaling_filter();
  std::array<double, 16> g{};
  for (std::size_t j = 0; j < 16; ++j) g[j] = (j % 2 ? -1.0 : 1.0) * h[15 - j];
  return g;
}

/// One level of the periodized (circular) orthogonal DWT; `x.size()` must be even.
template <typename Scalar>
void dwt_step(const VectorX<Scalar>& x, VectorX<Scalar>& approx, VectorX<Scalar>& detail) {
  const auto& h = db8_scaling_filter();
  const auto g = db8_wavelet_filter();
  const Eigen::Index n = x.size(), half = n / 2;
  approx.setZero(half);
  detail.setZero(half);
  for (Eigen::Index k = 0; k < half; ++k) {
    Scalar a(0), d(0);
    for (std::size_t j = 0; j < h.size(); ++j) {
      const Scalar v = x[(2 * k + static_cast<Eigen::Index>(j)) % n];
      a += Scalar(h[j]) * v;
      d += Scalar(g[j]) * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

/// Transpose (= inverse) of dwt_step.
template <typename Scalar>
VectorX<Scalar> idwt_step(const VectorX<Scalar>& approx, const VectorX<Scalar>& detail) {
  const auto& h = db8_scaling_filter();
  const auto g = db8_wavelet_filter();
  const Eigen::Index half = approx.size(), n = 2 * half;
  VectorX<Scalar> x = VectorX<Scalar>::Zero(n);
  for (Eigen::Index k = 0; k < half; ++k)
    for (std::size_t j = 0; j < h.size(); ++j)
      x[(2 * k + static_cast<Eigen::Index>(j)) % n] += Scalar(h[j]) * approx[k] + Scalar(g[j]) * detail[k];
  return x;
}

/// Deepest useful level for a length-n signal: floor(log2(n / (taps - 1))).
inline int max_wavelet_level(Eigen::Index n) {
  const Eigen::Index taps = 16;
  if (n < taps - 1) return 0;
  return static_cast<int>(std::floor(std::log2(double(n) / double(taps - 1))));
}

template <typename Scalar>
struct BaselineResult {
  BasicSignal<Scalar> signal;
  int levels_used = 0;
  bool degraded = false;  // fewer levels than configured
};

/// Zeroes the deepest approximation band of a multi-level db8 decomposition.
/// With `levels` L the removed band is [0, fs / 2^(L+1)]. The input is
/// reflection-padded by its own length on both sides before transforming.
template <typename Scalar>
BaselineResult<Scalar> remove_baseline(const BasicSignal<Scalar>& s, const PreprocessConfig& cfg = {}) {
  validate(s, "remove_baseline");
  if (cfg.wavelet_levels < 1) throw InvalidInput("wavelet_levels must be >= 1");
  const Eigen::Index n = s.size();
  BaselineResult<Scalar> out;
  out.levels_used = std::min(cfg.wavelet_levels, max_wavelet_level(n));
  out.degraded = out.levels_used < cfg.wavelet_levels;
  if (out.levels_used == 0) {
    out.signal = {(s.samples.array() - s.samples.mean()).matrix(), s.sample_rate_hz};
    return out;
  }

  const Eigen::Index block = Eigen::Index(1) << out.levels_used;
  const Eigen::Index padded = ((3 * n + block - 1) / block) * block;
  VectorX<Scalar> x(padded);
  for (Eigen::Index i = 0; i < padded; ++i) x[i] = s.samples[reflect_index(i - n, n)];

  std::vector<VectorX<Scalar>> details;
  VectorX<Scalar> approx, detail;
  for (int level = 0; level < out.levels_used; ++level) {
    dwt_step(x, approx, detail);
    details.push_back(std::move(detail));
    x = std::move(approx);
  }
  x.setZero();
  for (int level = out.levels_used - 1; level >= 0; --level) x = idwt_step(x, details[static_cast<std::size_t>(level)]);

  out.signal = {x.segment(n, n), s.sample_rate_hz};
  return out;
}

// --- FIR band-pass -------------------------------------------------------

/// Hamming-windowed sinc band-pass built as the difference of two unit-DC-gain
/// low-pass kernels. Kernels are symmetric (linear phase).
template <typename Scalar>
VectorX<Scalar> design_bandpass(double rate_hz, double low_hz, double high_hz, int taps) {
  if (taps < 1 || taps % 2 == 0) throw InvalidInput("FIR taps must be odd");
  if (!(low_hz > 0 && low_hz < high_hz && high_hz < rate_hz / 2))
    throw InvalidInput("require 0 < low < high < rate/2");
  const int half = (taps - 1) / 2;
  auto lowpass = [&](double fc) {
    Eigen::VectorXd k(taps);
    const double wc = 2.0 * fc / rate_hz;
    for (int i = 0; i <= half; ++i) {
      const double m = i - half;
      const double sinc = m == 0 ? wc : std::sin(std::numbers::pi * wc * m) / (std::numbers::pi * m);
      const double window = taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (taps - 1));
      k[i] = k[taps - 1 - i] = sinc * window;
    }
    return Eigen::VectorXd(k / k.sum());
  };
  return (lowpass(high_hz) - lowpass(low_hz)).template cast<Scalar>();
}

/// Magnitude of the kernel's frequency response at `freq_hz`, about its centre tap.
template <typename Scalar>
double kernel_gain(const VectorX<Scalar>& kernel, double rate_hz, double freq_hz) {
  const Eigen::Index half = (kernel.size() - 1) / 2;
  double re = 0, im = 0;
  for (Eigen::Index i = 0; i < kernel.size(); ++i) {
    const double phase = 2.0 * std::numbers::pi * freq_hz / rate_hz * double(i - half);
    re += double(kernel[i]) * std::cos(phase);
    im -= double(kernel[i]) * std::sin(phase);
  }
  return std::hypot(re, im);
}

/// Precomputed zero-phase band-pass; immutable once built.
template <typename Scalar>
class BandpassFir {
 public:
  BandpassFir(double rate_hz, double low_hz, double high_hz, int taps)
      : rate_hz_(rate_hz), kernel_(design_bandpass<Scalar>(rate_hz, low_hz, high_hz, taps)) {}

  BandpassFir(const PreprocessConfig& cfg, double rate_hz)
      : BandpassFir(rate_hz, cfg.fir_low_hz, cfg.fir_high_hz, cfg.fir_taps) {}

  const VectorX<Scalar>& kernel() const noexcept { return kernel_; }
  double rate_hz() const noexcept { return rate_hz_; }
  double gain(double freq_hz) const { return kernel_gain(kernel_, rate_hz_, freq_hz); }

  /// Centred convolution (the (taps-1)/2 group delay is compensated) over a
  /// reflection-padded copy of the input.
  template <typename Derived>
  VectorX<Scalar> apply(const Eigen::MatrixBase<Derived>& x) const {
    const Eigen::Index n = x.size(), taps = kernel_.size(), half = (taps - 1) / 2;
    VectorX<Scalar> padded(n + 2 * half);
    for (Eigen::Index i = 0; i < padded.size(); ++i) padded[i] = x[reflect_index(i - half, n)];
    VectorX<Scalar> y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = padded.segment(i, taps).dot(kernel_);
    return y;
  }

  BasicSignal<Scalar> apply(const BasicSignal<Scalar>& s) const {
    validate(s, "fir_bandpass");
    return {apply(s.samples), s.sample_rate_hz};
  }

 private:
  double rate_hz_;
  VectorX<Scalar> kernel_;
};

template <typename Scalar>
BasicSignal<Scalar> fir_bandpass(const BasicSignal<Scalar>& s, const PreprocessConfig& cfg = {}) {
  validate(s, "fir_bandpass");
  return BandpassFir<Scalar>(cfg, s.sample_rate_hz).apply(s);
}

// --- Kalman --------------------------------------------------------------

/// Forward scalar Kalman filter for a random-walk state observed in noise.
template <typename Scalar>
BasicSignal<Scalar> kalman_smooth(const BasicSignal<Scalar>& s, double q, double r) {
  validate(s, "kalman_smooth");
  if (!(q > 0 && r > 0)) throw InvalidInput("kalman_smooth: q and r must be positive");
  VectorX<Scalar> out(s.size());
  double x = double(s.samples[0]);
  double p = r;
  out[0] = Scalar(x);
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    p += q;
    const double k = p / (p + r);
    x += k * (double(s.samples[i]) - x);
    p *= 1.0 - k;
    out[i] = Scalar(x);
  }
  return {std::move(out), s.sample_rate_hz};
}

template <typename Scalar>
BasicSignal<Scalar> kalman_smooth(const BasicSignal<Scalar>& s, const PreprocessConfig& cfg = {}) {
  return kalman_smooth(s, cfg.kalman_q, cfg.kalman_r);
}

// --- normalization -------------------------------------------------------

template <typename Scalar>
struct NormalizeResult {
  BasicSignal<Scalar> signal;
  bool degenerate = false;  // constant input; output is all zeros
};

/// Affine map onto [0, 1] followed by mean removal.
template <typename Scalar>
NormalizeResult<Scalar> normalize(const BasicSignal<Scalar>& s) {
  validate(s, "normalize");
  const Scalar lo = s.samples.minCoeff(), hi = s.samples.maxCoeff();
  NormalizeResult<Scalar> out;
  if (!(hi > lo)) {
    out.signal = {VectorX<Scalar>::Zero(s.size()), s.sample_rate_hz};
    out.degenerate = true;
    return out;
  }
  VectorX<Scalar> unit = (s.samples.array() - lo) / (hi - lo);
  unit.array() -= unit.mean();
  out.signal = {std::move(unit), s.sample_rate_hz};
  return out;
}

// --- full chain ----------------------------------------------------------

struct StageReport {
  std::string stage;
  double mean_square = 0.0;
  Eigen::Index length = 0;
  double rate_hz = 0.0;
  std::vector<std::string> flags;
};

template <typename Scalar>
struct PreprocessResult {
  BasicSignal<Scalar> signal;
  std::vector<StageReport> stages;
};

/// resample -> baseline removal -> FIR band-pass -> [Kalman] -> normalize.
template <typename Scalar>
PreprocessResult<Scalar> preprocess(const BasicSignal<Scalar>& s, const PreprocessConfig& cfg = {}) {
  cfg.validate();
  validate(s, "preprocess");
  PreprocessResult<Scalar> out;
  auto record = [&out](const char* name, const BasicSignal<Scalar>& sig, std::vector<std::string> flags = {}) {
    out.stages.push_back({name, double(sig.samples.squaredNorm()) / double(sig.size()), sig.size(),
                          sig.sample_rate_hz, std::move(flags)});
  };
  record("input", s);
  auto x = resample_linear(s, cfg.target_rate_hz);
  record("resample", x);
  auto base = remove_baseline(x, cfg);
  record("baseline", base.signal,
         base.degraded ? std::vector<std::string>{"levels_reduced_to_" + std::to_string(base.levels_used)}
                       : std::vector<std::string>{});
  x = fir_bandpass(base.signal, cfg);
  record("fir", x);
  if (cfg.kalman_enabled) {
    x = kalman_smooth(x, cfg);
    record("kalman", x);
  }
  auto norm = normalize(x);
  record("normalize", norm.signal,
         norm.degenerate ? std::vector<std::string>{"constant_signal"} : std::vector<std::string>{});
  out.signal = std::move(norm.signal);
  return out;
}

}  // namespace ecgtda::dsp
