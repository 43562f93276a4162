#pragma once

#include <string>
#include <vector>

#include "ecgtda/signal.hpp"
#include "ecgtda/wfdb.hpp"

namespace ecgtda::seg {

inline constexpr int kDefaultBeatsPerWindow = 3;
inline constexpr int kDefaultWindowLength = 400;

struct SliceConfig {
  int beats_per_window = kDefaultBeatsPerWindow;
  int window_length = kDefaultWindowLength;
  int stride_beats = 1;
};

/// k consecutive beats resampled to a fixed length, labelled by the central beat.
struct BeatWindow {
  std::string patient_id;
  Eigen::VectorXd samples;
  char label = '?';
  int beat_count = 0;
  long center_beat_index = 0;  // index into the record's beat list
  long raw_start = 0;          // inclusive sample span in the source signal
  long raw_end = 0;
  double center_position = 0;  // central R peak, in window sample coordinates
  double sample_rate_hz = 0;   // of the source signal

  /// Duration represented by one window sample, in milliseconds.
  double ms_per_sample() const {
    return double(raw_end - raw_start) / double(samples.size() - 1) / sample_rate_hz * 1000.0;
  }
};

/// Linear interpolation onto `length` evenly spaced positions; endpoints kept exactly.
Eigen::VectorXd standardize_length(const Eigen::Ref<const Eigen::VectorXd>& raw, int length);

/// Beats are `record.beat_annotations`; groups without a neighbour beat on
/// either side are skipped. Window i spans from the midpoint between beats
/// i-1 and i to the midpoint between beats i+k-1 and i+k.
std::vector<BeatWindow> slice_windows(const wfdb::AnnotatedRecord& record, const SliceConfig& cfg = {});

}  // namespace ecgtda::seg
