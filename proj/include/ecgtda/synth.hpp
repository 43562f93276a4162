#pragma once

// Synthetic ECG records built from Gaussian P/Q/R/S/T waves. Used as test
// fixtures and by the CLI `synth` helper; not a physiological model.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ecgtda/wfdb.hpp"

namespace ecgtda::synth {

struct Wave {
  double offset_s;  // relative to the R peak
  double amplitude;
  double width_s;
};

/// Five waves in P, Q, R, S, T order.
using Morphology = std::vector<Wave>;

/// Beat shape for a label: 'N' normal, 'V' wide inverted-T ventricular,
/// 'A' premature with a flattened P wave, 'L' widened notched QRS.
Morphology morphology(char label);

struct PatientProfile {
  std::string id;
  double rr_s = 0.8;
  double rr_jitter = 0.03;
  double amplitude = 1.0;
  double width_scale = 1.0;
  double noise = 0.01;
};

/// Deterministic per-patient variation drawn from `seed` and `index`.
PatientProfile patient_profile(int index, std::uint64_t seed);

struct RecordConfig {
  double sample_rate_hz = 360.0;
  double duration_s = 60.0;
  std::vector<std::pair<char, double>> abnormal_mix = {{'V', 0.15}};  // label, probability per beat
  double drift_amplitude = 0.0;
  double drift_hz = 0.3;
};

wfdb::AnnotatedRecord synth_record(const PatientProfile& p, const RecordConfig& cfg, std::uint64_t seed);

/// One record per patient, ids "p000", "p001", ...
std::vector<wfdb::AnnotatedRecord> synth_cohort(int patients, const RecordConfig& cfg, std::uint64_t seed);

/// Writes `<dir>/<name>.hea`, `.dat` (format 212, gain 200, zero 1024) and
/// `.atr`. Returns the record base path.
std::filesystem::path write_wfdb(const wfdb::AnnotatedRecord& rec, const std::filesystem::path& dir,
                                 const std::string& name);

}  // namespace ecgtda::synth
