#pragma once

// Key=value run configuration. Keys are "<section>.<field>" and mirror the
// module config structs; `snapshot` writes every key so a rerun from the
// snapshot is fully determined.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ecgtda/dsp.hpp"
#include "ecgtda/eval.hpp"
#include "ecgtda/segmentation.hpp"

namespace ecgtda::config {

struct RunConfig {
  dsp::PreprocessConfig preprocess;
  seg::SliceConfig slice;
  int channel = 0;
  std::string annotator = "atr";
  std::string beat_codes;  // path to a symbol list; empty for the standard set
  int test_size = 5;
  double train_ratio = 0.7;
  eval::ExperimentConfig experiment;
};

/// All recognised keys, in snapshot order.
const std::vector<std::string>& keys();

/// Throws InvalidInput naming the key on an unknown key or bad value.
void set(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get(const RunConfig& cfg, const std::string& key);

/// Blank lines and '#' comments are ignored; other lines are `key = value`.
void parse(std::istream& in, RunConfig& cfg);
void load(const std::filesystem::path& path, RunConfig& cfg);

std::string snapshot(const RunConfig& cfg);

/// Range checks across all sections.
void validate(const RunConfig& cfg);

}  // namespace ecgtda::config
