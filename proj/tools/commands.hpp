#pragma once

// Subcommand bodies shared by the `ecgtda` executable and the integration tests.
// Every command writes into `Context::out`.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ecgtda/autoencoder.hpp"
#include "ecgtda/config.hpp"
#include "ecgtda/dsp.hpp"
#include "ecgtda/eval.hpp"
#include "ecgtda/segmentation.hpp"
#include "ecgtda/wfdb.hpp"

namespace ecgtda::cli {

struct Context {
  config::RunConfig cfg;
  std::filesystem::path out = "out";
  int verbosity = 0;
  std::ostream* log = nullptr;  // warnings and progress; nullptr discards

  void warn(const std::string& msg) const;
  void info(const std::string& msg) const;
};

void write_text(const std::filesystem::path& path, const std::string& text);

/// Directories expand to their `.hea` files, sorted; files are taken as given.
std::vector<std::filesystem::path> expand_records(const std::vector<std::string>& inputs);

wfdb::ReadOptions read_options(const config::RunConfig& cfg);

struct IngestResult {
  wfdb::DatasetManifest manifest;
  std::size_t inputs = 0;
};

/// Writes manifest.json and labels.csv. Unreadable records are listed as
/// failures; throws ParseError only when every input failed.
IngestResult cmd_ingest(const Context& ctx, const std::vector<std::string>& inputs, const std::string& database);

struct ProcessedRecord {
  wfdb::AnnotatedRecord record;  // preprocessed signal, remapped beats
  std::vector<dsp::StageReport> stages;
  std::vector<seg::BeatWindow> windows;
  std::vector<std::string> warnings;
};

/// Preprocess, remap beat positions to the target rate, then slice.
ProcessedRecord process_record(const wfdb::AnnotatedRecord& raw, const config::RunConfig& cfg);

/// Writes signal.csv and stages.json for one record.
void cmd_preprocess(const Context& ctx, const std::string& record);

/// Writes windows.bin, features.csv, betti.csv, pca.json, stages.json.
std::vector<seg::BeatWindow> cmd_pipeline(const Context& ctx, const std::vector<std::string>& records);

/// Writes sublevel.csv, superlevel.csv, betti.csv and barcode.svg.
void cmd_tda(const Context& ctx, const Eigen::VectorXd& values, const std::string& title);

/// Comma-separated numbers, or a file with one number per line / comma-separated.
Eigen::VectorXd parse_values(const std::string& text);

void cmd_features(const Context& ctx, const std::filesystem::path& windows, const std::filesystem::path& pca);

ae::TrainResult cmd_train_ae(const Context& ctx, const std::filesystem::path& windows);

void cmd_score(const Context& ctx, const std::filesystem::path& model, const std::filesystem::path& windows);

struct CrossvalOptions {
  std::filesystem::path windows;  // window table; empty when synthetic
  int synthetic_patients = 0;
  double synthetic_duration_s = 60.0;
  bool plan_only = false;
  bool ablation = false;
};

struct CrossvalResult {
  eval::SplitPlan plan;
  eval::ExperimentReport report;  // empty when plan_only
  bool leakage_free = true;
};

/// Writes plan.json and, unless plan_only, report.json, folds.csv and
/// optionally ablation.csv.
CrossvalResult cmd_crossval(const Context& ctx, const CrossvalOptions& opt);

/// Renders the numeric columns of a CSV file as plot.svg.
void cmd_plot(const Context& ctx, const std::filesystem::path& csv, const std::string& title);

/// Writes synthetic WFDB records (p000, p001, ...) into the output directory.
std::vector<std::filesystem::path> cmd_synth(const Context& ctx, int patients, double duration_s, double drift);

}  // namespace ecgtda::cli
