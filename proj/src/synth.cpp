#include "ecgtda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "ecgtda/errors.hpp"

namespace ecgtda::synth {

Morphology morphology(char label) {
  switch (label) {
    case 'N':
      return {{-0.20, 0.15, 0.025}, {-0.035, -0.12, 0.010}, {0.0, 1.0, 0.012}, {0.035, -0.25, 0.010}, {0.28, 0.30, 0.040}};
    case 'V':
      return {{-0.20, 0.0, 0.025}, {-0.06, -0.30, 0.025}, {0.0, 1.3, 0.035}, {0.08, -0.45, 0.030}, {0.34, -0.40, 0.060}};
    case 'A':
      return {{-0.16, 0.04, 0.020}, {-0.035, -0.12, 0.010}, {0.0, 0.95, 0.012}, {0.035, -0.25, 0.010}, {0.27, 0.28, 0.040}};
    case 'L':
      return {{-0.20, 0.12, 0.025}, {-0.05, 0.55, 0.018}, {0.0, 0.8, 0.020}, {0.06, -0.15, 0.020}, {0.32, -0.20, 0.050}};
    default:
      throw InvalidInput(std::string("no synthetic morphology for label '") + label + "'");
  }
}

PatientProfile patient_profile(int index, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index) + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PatientProfile p;
  char id[16];
  std::snprintf(id, sizeof id, "p%03d", index);
  p.id = id;
  p.rr_s = 0.65 + 0.35 * u(rng);
  p.rr_jitter = 0.02 + 0.03 * u(rng);
  p.amplitude = 0.8 + 0.5 * u(rng);
  p.width_scale = 0.9 + 0.2 * u(rng);
  p.noise = 0.005 + 0.02 * u(rng);
  return p;
}

wfdb::AnnotatedRecord synth_record(const PatientProfile& p, const RecordConfig& cfg, std::uint64_t seed) {
  if (!(cfg.sample_rate_hz > 0 && cfg.duration_s > 2)) throw InvalidInput("synth_record: bad rate or duration");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double fs = cfg.sample_rate_hz;
  const auto n = static_cast<Eigen::Index>(std::llround(cfg.duration_s * fs));
  wfdb::AnnotatedRecord rec;
  rec.patient_id = p.id;
  rec.source_rate_hz = fs;
  rec.adc_gain = 200.0;
  rec.adc_zero = 1024;
  rec.signal.sample_rate_hz = fs;
  rec.signal.samples = Eigen::VectorXd::Zero(n);

  double t = 0.6;
  while (t < cfg.duration_s - 0.8) {
    char label = 'N';
    double r = u(rng);
    for (const auto& [sym, prob] : cfg.abnormal_mix) {
      if (r < prob) {
        label = sym;
        break;
      }
      r -= prob;
    }
    const double rr = p.rr_s * (1.0 + p.rr_jitter * gauss(rng));
    // Premature beats arrive early and are followed by a compensatory pause.
    const double beat_t = (label == 'V' || label == 'A') ? t - 0.25 * rr : t;
    const auto center = static_cast<long>(std::llround(beat_t * fs));
    rec.beat_annotations.push_back({center, std::string(1, label)});
    for (const auto& w : morphology(label)) {
      const double mu = beat_t + w.offset_s * p.width_scale;
      const double sd = w.width_s * p.width_scale;
      const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>((mu - 5 * sd) * fs));
      const auto hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>((mu + 5 * sd) * fs) + 1);
      for (Eigen::Index i = lo; i <= hi; ++i) {
        const double z = (double(i) / fs - mu) / sd;
        rec.signal.samples[i] += p.amplitude * w.amplitude * std::exp(-0.5 * z * z);
      }
    }
    t += (label == 'V' || label == 'A') ? 1.25 * rr : rr;
  }
  const double phase = 2 * std::numbers::pi * u(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    rec.signal.samples[i] += p.noise * gauss(rng);
    if (cfg.drift_amplitude != 0)
      rec.signal.samples[i] += cfg.drift_amplitude * std::sin(2 * std::numbers::pi * cfg.drift_hz * double(i) / fs + phase);
  }
  return rec;
}

std::vector<wfdb::AnnotatedRecord> synth_cohort(int patients, const RecordConfig& cfg, std::uint64_t seed) {
  if (patients < 0) throw InvalidInput("synth_cohort: negative patient count");
  std::vector<wfdb::AnnotatedRecord> out;
  for (int i = 0; i < patients; ++i)
    out.push_back(synth_record(patient_profile(i, seed), cfg, seed ^ (0xD1B54A32D192ED03ull * (i + 1))));
  return out;
}

std::filesystem::path write_wfdb(const wfdb::AnnotatedRecord& rec, const std::filesystem::path& dir,
                                 const std::string& name) {
  std::filesystem::create_directories(dir);
  const double gain = rec.adc_gain > 0 ? rec.adc_gain : 200.0;
  const int zero = rec.adc_zero;
  std::vector<int> raw(static_cast<std::size_t>(rec.signal.size()));
  int checksum = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = std::clamp(static_cast<int>(std::lround(rec.signal.samples[static_cast<Eigen::Index>(i)] * gain)) + zero,
                        -2048, 2047);
    checksum += raw[i];
  }
  checksum = static_cast<std::int16_t>(static_cast<std::uint16_t>(checksum & 0xFFFF));

  const auto base = dir / name;
  {
    std::ofstream hea(base.string() + ".hea");
    hea << name << " 1 " << rec.signal.sample_rate_hz << ' ' << raw.size() << '\n';
    hea << name << ".dat 212 " << gain << '(' << zero << ")/mV 12 " << zero << ' ' << (raw.empty() ? 0 : raw[0])
        << ' ' << checksum << " 0 MLII\n";
    if (!hea) throw InvalidInput("cannot write " + base.string() + ".hea");
  }
  const auto bytes = wfdb::encode_212(raw);
  std::ofstream dat(base.string() + ".dat", std::ios::binary);
  dat.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

  std::vector<wfdb::Annotation> anns;
  for (const auto& b : rec.beat_annotations) {
    const auto code = wfdb::code_for_symbol(b.symbol);
    if (!code) throw InvalidInput("write_wfdb: unknown beat symbol '" + b.symbol + "'");
    anns.push_back({b.sample, *code, 0, 0, 0, {}});
  }
  const auto ann_bytes = wfdb::encode_annotations(anns);
  std::ofstream atr(base.string() + ".atr", std::ios::binary);
  atr.write(reinterpret_cast<const char*>(ann_bytes.data()), static_cast<std::streamsize>(ann_bytes.size()));
  if (!dat || !atr) throw InvalidInput("cannot write record files for " + base.string());
  return base;
}

}  // namespace ecgtda::synth
