#pragma once

// Synthetic data shared by unit, integration and acceptance tests.

#include <cmath>
#include <numbers>
#include <vector>

#include "commands.hpp"
#include "ecgtda/synth.hpp"

namespace fixture {

struct Drift {
  ecgtda::Signal clean;
  ecgtda::Signal drifted;
};

/// Noise-free normal beat train at 200 Hz, and the same train plus a
/// 0.3 Hz sinusoid of amplitude 0.5 mV.
inline Drift drift_fixture(std::uint64_t seed, double duration_s = 60.0, double phase = 0.7) {
  ecgtda::synth::RecordConfig rc;
  rc.sample_rate_hz = 200.0;
  rc.duration_s = duration_s;
  rc.abnormal_mix = {};
  auto profile = ecgtda::synth::patient_profile(0, seed);
  profile.noise = 0.0;
  const auto rec = ecgtda::synth::synth_record(profile, rc, seed);
  Drift d{rec.signal, rec.signal};
  for (Eigen::Index i = 0; i < d.drifted.size(); ++i)
    d.drifted.samples[i] += 0.5 * std::sin(2 * std::numbers::pi * 0.3 * double(i) / 200.0 + phase);
  return d;
}

/// Windows from a synthetic cohort run through the production preprocessing
/// and slicing path.
inline std::vector<ecgtda::seg::BeatWindow> cohort_windows(int patients, double duration_s, std::uint64_t seed,
                                                           std::vector<std::pair<char, double>> mix,
                                                           const ecgtda::config::RunConfig& cfg = {}) {
  ecgtda::synth::RecordConfig rc;
  rc.duration_s = duration_s;
  rc.abnormal_mix = std::move(mix);
  std::vector<ecgtda::seg::BeatWindow> out;
  for (const auto& rec : ecgtda::synth::synth_cohort(patients, rc, seed)) {
    const auto p = ecgtda::cli::process_record(rec, cfg);
    out.insert(out.end(), p.windows.begin(), p.windows.end());
  }
  return out;
}

}  // namespace fixture
