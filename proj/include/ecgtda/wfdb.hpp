#pragma once

// Physionet WFDB records: `.hea` text headers, format 212/16 signal files and
// MIT-format annotation files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ecgtda/signal.hpp"

namespace ecgtda::wfdb {

struct ChannelSpec {
  std::string file_name;
  int format = 0;
  int samples_per_frame = 1;
  int skew = 0;
  long byte_offset = 0;
  double adc_gain = 200.0;  // ADC units per physical unit; WFDB default when 0 or absent
  int baseline = 0;
  std::string units = "mV";
  int adc_resolution = 12;
  int adc_zero = 0;
  int initial_value = 0;
  int checksum = 0;
  int block_size = 0;
  std::string description;
};

struct RecordHeader {
  std::string record_name;
  int channel_count = 0;
  double sampling_frequency = 250.0;
  double counter_frequency = 0.0;
  double base_counter = 0.0;
  long samples_per_channel = 0;  // 0: unknown, derived from the signal file size
  std::string base_time;
  std::string base_date;
  std::vector<ChannelSpec> channels;
  std::vector<std::string> comments;
};

RecordHeader parse_header(std::istream& in);
RecordHeader read_header(const std::filesystem::path& path);

/// Two 12-bit two's-complement samples packed per 3 bytes.
std::vector<int> decode_212(std::span<const std::uint8_t> bytes, std::size_t total_samples);
/// Inverse of decode_212; samples must lie in [-2048, 2047].
std::vector<std::uint8_t> encode_212(std::span<const int> samples);

std::vector<int> decode_16(std::span<const std::uint8_t> bytes, std::size_t total_samples);
std::vector<std::uint8_t> encode_16(std::span<const int> samples);

/// De-interleaved samples of one channel from a multiplexed format-212 file.
/// `n_samples == 0` reads every complete frame in the file.
std::vector<int> read_signal_212(const std::filesystem::path& path, int channel_count, long n_samples,
                                 int channel_index, long byte_offset = 0);
std::vector<int> read_signal_16(const std::filesystem::path& path, int channel_count, long n_samples,
                                int channel_index, long byte_offset = 0);

/// sample_mV = (raw - adc_zero) / adc_gain
Eigen::VectorXd to_physical(std::span<const int> raw, double adc_gain, int adc_zero);

// --- annotations ---------------------------------------------------------

namespace code {
inline constexpr int kNotQrs = 0;
inline constexpr int kNormal = 1;
inline constexpr int kPvc = 5;
inline constexpr int kAcMax = 49;
inline constexpr int kSkip = 59;
inline constexpr int kNum = 60;
inline constexpr int kSub = 61;
inline constexpr int kChn = 62;
inline constexpr int kAux = 63;
}  // namespace code

struct Annotation {
  long sample = 0;
  int code = 0;
  int subtype = 0;
  int channel = 0;
  int num = 0;
  std::string aux;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Standard WFDB mnemonic for an annotation code ("N", "V", "+", ...).
std::string symbol_for_code(int code);
/// Inverse of symbol_for_code; nullopt for unknown mnemonics.
std::optional<int> code_for_symbol(const std::string& symbol);

std::vector<Annotation> decode_annotations(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_annotations(std::span<const Annotation> annotations);
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

/// Annotation symbols that denote a heartbeat.
class BeatCodeSet {
 public:
  /// The standard WFDB beat set: N L R B A a J S V r F e j n E / f Q ?
  static BeatCodeSet standard();
  /// One symbol per whitespace-separated token; '#' starts a comment.
  static BeatCodeSet load(const std::filesystem::path& path);
  static BeatCodeSet parse(std::istream& in);

  bool is_beat(const std::string& symbol) const { return symbols_.count(symbol) > 0; }
  const std::set<std::string>& symbols() const noexcept { return symbols_; }

 private:
  std::set<std::string> symbols_;
};

// --- records -------------------------------------------------------------

struct BeatAnnotation {
  long sample = 0;
  std::string symbol;

  friend bool operator==(const BeatAnnotation&, const BeatAnnotation&) = default;
};

struct AnnotatedRecord {
  std::string patient_id;
  Signal signal;  // one channel, in physical units
  std::vector<BeatAnnotation> beat_annotations;
  double source_rate_hz = 0.0;
  double adc_gain = 0.0;
  int adc_zero = 0;
};

struct ReadOptions {
  int channel = 0;
  std::string annotator = "atr";
  BeatCodeSet beats = BeatCodeSet::standard();
};

/// `record` is the record path without extension (e.g. "mitdb/100") or the `.hea` path.
AnnotatedRecord read_record(const std::filesystem::path& record, const ReadOptions& opts = {});

/// Keeps beat annotations inside [0, signal_length); throws ParseError unless
/// the kept sample indices are strictly increasing.
std::vector<BeatAnnotation> select_beats(std::span<const Annotation> annotations, const BeatCodeSet& beats,
                                         long signal_length);

// --- manifest ------------------------------------------------------------

struct ManifestEntry {
  std::string record_path;
  std::string database;
  std::string patient_id;
  std::size_t beat_count = 0;
  double duration_hours = 0.0;
  std::map<std::string, std::size_t> labels;
};

struct DatabaseSummary {
  std::size_t patients = 0;
  std::size_t labels = 0;
  double duration_hours = 0.0;
  std::map<std::string, std::size_t> histogram;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> failures;  // "path: reason"

  /// Throws InvalidInput if the patient id already exists in that database.
  void add(ManifestEntry entry);
  std::map<std::string, DatabaseSummary> summarize() const;
  std::string to_json() const;
};

ManifestEntry manifest_entry(const AnnotatedRecord& rec, const std::string& record_path,
                             const std::string& database);

}  // namespace ecgtda::wfdb
