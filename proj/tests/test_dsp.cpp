#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ecgtda/dsp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ecgtda;
using std::numbers::pi;

namespace {

Signal sine(double freq, double fs, Eigen::Index n, double amp = 1.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = amp * std::sin(2 * pi * freq * double(i) / fs);
  return {x, fs};
}

double central_amplitude(const Eigen::VectorXd& y) {
  // Ignores the outer quarter on each side.
  const auto q = y.size() / 4;
  return y.segment(q, y.size() - 2 * q).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("config validation") {
  dsp::PreprocessConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.fir_taps = 1000;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.fir_high_hz = 120;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.wavelet_name = "haar";
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.wavelet_levels = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("reflect index") {
  CHECK(dsp::reflect_index(-1, 5) == 1);
  CHECK(dsp::reflect_index(-4, 5) == 4);
  CHECK(dsp::reflect_index(5, 5) == 3);
  CHECK(dsp::reflect_index(9, 5) == 1);
  CHECK(dsp::reflect_index(3, 5) == 3);
  CHECK(dsp::reflect_index(-3, 1) == 0);
}

TEST_CASE("linear resampling") {
  const Signal one_second{Eigen::VectorXd::LinSpaced(360, 0, 1), 360.0};
  CHECK(dsp::resample_linear(one_second, 200.0).size() == 200);
  CHECK(dsp::resample_linear(one_second, 360.0).samples == one_second.samples);

  const auto s = sine(5.0, 360.0, 720);
  const auto r = dsp::resample_linear(s, 200.0);
  REQUIRE(r.size() == 400);
  CHECK(r.sample_rate_hz == 200.0);
  double err = 0;
  for (Eigen::Index j = 0; j < r.size(); ++j) err = std::max(err, std::abs(r.samples[j] - std::sin(2 * pi * 5.0 * j / 200.0)));
  CHECK(err < 0.01);

  CHECK(dsp::remap_indices({0, 359, 180, 719}, 360.0, 200.0, 720) == std::vector<long>{0, 199, 100, 399});
  CHECK_THROWS_AS(dsp::resample_linear(s, 0.0), InvalidInput);
}

TEST_CASE("db8 filter properties") {
  const auto& h = dsp::db8_scaling_filter();
  const auto g = dsp::db8_wavelet_filter();
  double sum = 0, gsum = 0;
  for (int i = 0; i < 16; ++i) sum += h[i], gsum += g[i];
  CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(gsum) < 1e-12);
  for (int m = 0; m < 8; ++m) {
    double hh = 0;
    for (int k = 0; k + 2 * m < 16; ++k) hh += h[k] * h[k + 2 * m];
    CHECK(std::abs(hh - (m == 0 ? 1.0 : 0.0)) < 1e-10);
  }
  // The wavelet filter annihilates constants and ramps.
  double m1 = 0;
  for (int i = 0; i < 16; ++i) m1 += i * g[i];
  CHECK(std::abs(m1) < 1e-10);
}

TEST_CASE("dwt perfect reconstruction") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  for (const Eigen::Index len : {16, 64, 256, 1000}) {
    Eigen::VectorXd x(len);
    for (auto& v : x) v = n(rng);
    Eigen::VectorXd a, d;
    dsp::dwt_step(x, a, d);
    CHECK((dsp::idwt_step(a, d) - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.squaredNorm() + d.squaredNorm() == doctest::Approx(x.squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("baseline removal") {
  SUBCASE("drift band suppressed") {
    const auto d = fixture::drift_fixture(5);
    const auto out = dsp::remove_baseline(d.drifted);
    CHECK(out.levels_used == 8);
    CHECK_FALSE(out.degraded);
    const double before = oracle::low_band_power(d.drifted.samples, 200.0, 0.5);
    const double after = oracle::low_band_power(out.signal.samples, 200.0, 0.5);
    CHECK(after <= 0.1 * before);
  }
  SUBCASE("constant and zero") {
    const Signal c{Eigen::VectorXd::Constant(4000, 2.5), 200.0};
    CHECK(dsp::remove_baseline(c).signal.samples.cwiseAbs().maxCoeff() < 1e-9);
    const Signal z{Eigen::VectorXd::Zero(4000), 200.0};
    CHECK(dsp::remove_baseline(z).signal.samples.isZero(0.0));
  }
  SUBCASE("idempotent within one percent") {
    const auto d = fixture::drift_fixture(6);
    const auto once = dsp::remove_baseline(d.drifted).signal;
    const auto twice = dsp::remove_baseline(once).signal;
    CHECK((twice.samples - once.samples).squaredNorm() <= 0.01 * once.samples.squaredNorm());
  }
  SUBCASE("short signals degrade") {
    const Signal s{Eigen::VectorXd::LinSpaced(100, 0, 1), 200.0};
    const auto out = dsp::remove_baseline(s);
    CHECK(out.levels_used == 2);
    CHECK(out.degraded);
    const Signal tiny{Eigen::VectorXd::LinSpaced(10, 0, 1), 200.0};
    const auto t = dsp::remove_baseline(tiny);
    CHECK(t.levels_used == 0);
    CHECK(std::abs(t.signal.samples.mean()) < 1e-12);
  }
}

TEST_CASE("FIR band-pass response") {
  const dsp::BandpassFir<double> fir(dsp::PreprocessConfig{}, 200.0);
  CHECK(fir.kernel().size() == 1001);
  CHECK(fir.gain(1.0) >= 0.9);
  CHECK(fir.gain(1.0) <= 1.1);
  CHECK(fir.gain(90.0) <= 0.1);
  CHECK(fir.gain(0.0) <= 0.1);
  for (Eigen::Index i = 0; i < 500; ++i) CHECK(fir.kernel()[i] == fir.kernel()[1000 - i]);

  const auto one_hz = fir.apply(sine(1.0, 200.0, 8000));
  CHECK(central_amplitude(one_hz.samples) >= 0.9);
  CHECK(central_amplitude(one_hz.samples) <= 1.1);
  CHECK(central_amplitude(fir.apply(sine(90.0, 200.0, 8000)).samples) <= 0.1);

  // A DC offset leaves the output (almost) unchanged.
  auto s = sine(7.0, 200.0, 6000);
  const auto base = fir.apply(s);
  s.samples.array() += 1.0;
  CHECK((fir.apply(s).samples - base.samples).cwiseAbs().maxCoeff() <= 0.1);

  CHECK_THROWS_AS(dsp::design_bandpass<double>(200, 0.05, 50, 1000), InvalidInput);
}

TEST_CASE("FIR is linear and zero-phase") {
  const dsp::BandpassFir<double> fir(200.0, 0.5, 40.0, 201);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd x(3000), y(3000);
  for (auto& v : x) v = n(rng);
  for (auto& v : y) v = n(rng);
  const Eigen::VectorXd lhs = fir.apply(Eigen::VectorXd(2.0 * x - 3.0 * y));
  const Eigen::VectorXd rhs = 2.0 * fir.apply(x) - 3.0 * fir.apply(y);
  CHECK((lhs - rhs).norm() <= 1e-9 * rhs.norm());

  const auto s = sine(5.0, 200.0, 4000);
  const auto out = fir.apply(s);
  CHECK((out.samples - s.samples).segment(1000, 2000).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("Kalman smoothing") {
  const Signal c{Eigen::VectorXd::Constant(300, 3.0), 200.0};
  const auto kc = dsp::kalman_smooth(c, 1e-5, 1e-2);
  CHECK((kc.samples.tail(200).array() - 3.0).abs().maxCoeff() < 1e-6);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  Signal noise{Eigen::VectorXd(5000), 200.0};
  for (auto& v : noise.samples) v = n(rng);
  const auto kn = dsp::kalman_smooth(noise, 1e-5, 1e-2);
  auto var = [](const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().mean(); };
  CHECK(var(kn.samples) < var(noise.samples));

  const auto trusting = dsp::kalman_smooth(noise, 1e6, 1e-2);
  CHECK((trusting.samples - noise.samples).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(dsp::kalman_smooth(noise, 0.0, 1.0), InvalidInput);
}

TEST_CASE("normalize") {
  Eigen::VectorXd x(3);
  x << 0, 5, 10;
  const auto r = dsp::normalize(Signal{x, 1.0});
  CHECK(r.signal.samples == Eigen::Vector3d(-0.5, 0, 0.5));
  CHECK_FALSE(r.degenerate);

  const auto c = dsp::normalize(Signal{Eigen::VectorXd::Constant(5, 2.0), 1.0});
  CHECK(c.degenerate);
  CHECK(c.signal.samples.isZero(0.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd v(2 + rng() % 200);
    for (auto& e : v) e = u(rng);
    const auto out = dsp::normalize(Signal{v, 1.0}).signal.samples;
    CHECK(std::abs(out.maxCoeff() - out.minCoeff() - 1.0) < 1e-12);
    CHECK(std::abs(out.mean()) < 1e-9);
  }
}

TEST_CASE("full chain") {
  ecgtda::synth::RecordConfig rc;
  rc.duration_s = 30;
  rc.drift_amplitude = 0.3;
  const auto rec = ecgtda::synth::synth_record(ecgtda::synth::patient_profile(2, 7), rc, 3);
  const auto a = dsp::preprocess(rec.signal);
  const auto b = dsp::preprocess(rec.signal);
  CHECK(a.signal.samples == b.signal.samples);
  CHECK(a.signal.sample_rate_hz == 200.0);
  CHECK(a.signal.size() == 6000);
  REQUIRE(a.stages.size() == 5);
  CHECK(a.stages.back().stage == "normalize");

  dsp::PreprocessConfig with_kalman;
  with_kalman.kalman_enabled = true;
  CHECK(dsp::preprocess(rec.signal, with_kalman).stages.size() == 6);

  // Remapped R peaks stay on the local maximum.
  const auto p = ecgtda::cli::process_record(rec, {});
  const auto& y = p.record.signal.samples;
  for (const auto& beat : p.record.beat_annotations) {
    const long lo = std::max(0L, beat.sample - 10), hi = std::min<long>(y.size() - 1, beat.sample + 10);
    Eigen::Index arg;
    y.segment(lo, hi - lo + 1).maxCoeff(&arg);
    CHECK(std::abs(lo + arg - beat.sample) <= 3);
  }
}
