#pragma once

#include <Eigen/Core>
#include <cmath>
#include <utility>

#include "ecgtda/errors.hpp"

namespace ecgtda {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Uniformly sampled real series, read as its piecewise-linear interpolation.
template <typename Scalar>
struct BasicSignal {
  using scalar_type = Scalar;

  VectorX<Scalar> samples;
  double sample_rate_hz = 1.0;

  BasicSignal() = default;
  BasicSignal(VectorX<Scalar> s, double rate) : samples(std::move(s)), sample_rate_hz(rate) {}

  Eigen::Index size() const noexcept { return samples.size(); }
  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

using Signal = BasicSignal<double>;

/// Throws InvalidInput unless `samples` is non-empty and finite.
template <typename Derived>
void require_finite_nonempty(const Eigen::MatrixBase<Derived>& samples, const char* what) {
  if (samples.size() == 0) throw InvalidInput(std::string(what) + ": empty signal");
  if (!samples.allFinite()) throw InvalidInput(std::string(what) + ": non-finite sample");
}

template <typename Scalar>
void validate(const BasicSignal<Scalar>& s, const char* what = "signal") {
  require_finite_nonempty(s.samples, what);
  if (!(s.sample_rate_hz > 0.0) || !std::isfinite(s.sample_rate_hz))
    throw InvalidInput(std::string(what) + ": sample rate must be positive");
}

}  // namespace ecgtda
