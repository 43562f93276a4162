#include "ecgtda/segmentation.hpp"

namespace ecgtda::seg {

Eigen::VectorXd standardize_length(const Eigen::Ref<const Eigen::VectorXd>& raw, int length) {
  if (raw.size() < 2) throw InvalidInput("standardize_length: need at least 2 samples");
  if (length < 2) throw InvalidInput("standardize_length: target length must be >= 2");
  const Eigen::Index n = raw.size();
  if (n == length) return raw;
  Eigen::VectorXd out(length);
  const double step = double(n - 1) / double(length - 1);
  for (int j = 0; j < length; ++j) {
    const double pos = j * step;
    const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), n - 2);
    const double frac = pos - double(i0);
    out[j] = raw[i0] + frac * (raw[i0 + 1] - raw[i0]);
  }
  out[0] = raw[0];
  out[length - 1] = raw[n - 1];
  return out;
}

std::vector<BeatWindow> slice_windows(const wfdb::AnnotatedRecord& record, const SliceConfig& cfg) {
  const int k = cfg.beats_per_window;
  if (k < 1) throw InvalidInput("slice_windows: beats_per_window must be >= 1");
  if (cfg.window_length < 8) throw InvalidInput("slice_windows: window_length must be >= 8");
  if (cfg.stride_beats < 1) throw InvalidInput("slice_windows: stride must be >= 1");

  const auto& beats = record.beat_annotations;
  const auto& x = record.signal.samples;
  std::vector<BeatWindow> out;
  const long nb = static_cast<long>(beats.size());
  for (long i = 1; i + k < nb; i += cfg.stride_beats) {
    const long start = (beats[i - 1].sample + beats[i].sample) / 2;
    const long end = (beats[i + k - 1].sample + beats[i + k].sample) / 2;
    if (end - start < 1 || end >= x.size()) continue;
    const long center = i + k / 2;

    BeatWindow w;
    w.patient_id = record.patient_id;
    w.samples = standardize_length(x.segment(start, end - start + 1), cfg.window_length);
    w.label = beats[static_cast<std::size_t>(center)].symbol.empty() ? '?' : beats[static_cast<std::size_t>(center)].symbol[0];
    w.beat_count = k;
    w.center_beat_index = center;
    w.raw_start = start;
    w.raw_end = end;
    w.center_position = double(beats[static_cast<std::size_t>(center)].sample - start) /
                        double(end - start) * double(cfg.window_length - 1);
    w.sample_rate_hz = record.signal.sample_rate_hz;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace ecgtda::seg
