// ecgtda command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ecgtda/errors.hpp"
#include "ecgtda/tables.hpp"

namespace fs = std::filesystem;
using namespace ecgtda;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG beat analysis with persistence barcodes, Betti curves and an autoencoder"};
  app.require_subcommand(1);
  app.footer(
      "Every global option can also be set through the environment variable shown\n"
      "next to it. Precedence: built-in defaults < --config file < environment < flags.\n"
      "Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.");

  std::string config_path, out_dir = "out", channels;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int jobs = 1, bins = 0, beats_per_window = 0, test_size = 0, verbose = 0;
  auto* o_config = app.add_option("--config", config_path, "key = value config file")->envname("ECGTDA_CONFIG");
  auto* o_seed = app.add_option("--seed", seed, "global seed")->envname("ECGTDA_SEED");
  app.add_option("--out", out_dir, "output directory")->envname("ECGTDA_OUT")->capture_default_str();
  auto* o_jobs = app.add_option("--jobs", jobs, "worker threads for records and folds")->envname("ECGTDA_JOBS");
  auto* o_bins = app.add_option("--bins", bins, "Betti curve grid size")->envname("ECGTDA_BINS");
  auto* o_bpw =
      app.add_option("--beats-per-window", beats_per_window, "beats per window")->envname("ECGTDA_BEATS_PER_WINDOW");
  auto* o_ts = app.add_option("--test-size", test_size, "test patients per fold")->envname("ECGTDA_TEST_SIZE");
  auto* o_ch = app.add_option("--channels", channels, "subset of betti,features,latent,residual")
                   ->envname("ECGTDA_CHANNELS");
  app.add_option("--set", overrides, "extra key=value config entries (repeatable)");
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");
  app.fallthrough();

  auto* ingest = app.add_subcommand("ingest", "read WFDB records and write a manifest with label counts");
  std::vector<std::string> ingest_inputs;
  std::string database;
  ingest->add_option("records", ingest_inputs, "record paths (.hea or base name) or directories");
  ingest->add_option("--database", database, "database name (default: parent directory name)");

  auto* preprocess = app.add_subcommand("preprocess", "preprocess one record and report each stage");
  std::string pre_record;
  preprocess->add_option("record", pre_record, "record path")->required();

  auto* pipeline = app.add_subcommand("pipeline", "preprocess, slice and tabulate windows, Betti curves and features");
  std::vector<std::string> pipe_records;
  pipeline->add_option("records", pipe_records, "record paths or directories")->required();

  auto* tda = app.add_subcommand("tda", "barcodes and Betti curves of one signal or window");
  std::string values, tda_windows;
  std::size_t tda_index = 0;
  tda->add_option("--values", values, "comma-separated samples or a file of samples");
  tda->add_option("--windows", tda_windows, "window table");
  tda->add_option("--index", tda_index, "window index in --windows");

  auto* feats = app.add_subcommand("features", "feature table for a window table");
  std::string feat_windows, feat_pca;
  feats->add_option("--windows", feat_windows, "window table")->required();
  feats->add_option("--pca", feat_pca, "reuse a fitted PCA (pca.json)");

  auto* train = app.add_subcommand("train-ae", "train the autoencoder on normal windows");
  std::string train_windows;
  train->add_option("--windows", train_windows, "window table")->required();

  auto* score = app.add_subcommand("score", "reconstruction score and latent code per window");
  std::string score_model, score_windows;
  score->add_option("--model", score_model, "model stem, .json or .bin")->required();
  score->add_option("--windows", score_windows, "window table")->required();

  auto* crossval = app.add_subcommand("crossval", "patient-based cross-validation");
  cli::CrossvalOptions cv;
  std::string cv_windows;
  crossval->add_option("--windows", cv_windows, "window table");
  crossval->add_option("--synthetic", cv.synthetic_patients, "use N synthetic patients instead of --windows");
  crossval->add_option("--synthetic-duration", cv.synthetic_duration_s, "seconds per synthetic record");
  crossval->add_flag("--plan-only", cv.plan_only, "write the split plan and stop");
  crossval->add_flag("--ablation", cv.ablation, "also run the channel ablation grid");

  auto* plot = app.add_subcommand("plot", "render numeric CSV columns, or a barcode.json, as SVG");
  std::string plot_csv, plot_title;
  plot->add_option("csv", plot_csv, "input CSV or barcode JSON")->required();
  plot->add_option("--title", plot_title, "chart title");

  auto* synth = app.add_subcommand("synth", "write synthetic WFDB records for testing");
  int synth_patients = 4;
  double synth_duration = 60.0, synth_drift = 0.0;
  synth->add_option("--patients", synth_patients, "number of records");
  synth->add_option("--duration", synth_duration, "seconds per record");
  synth->add_option("--drift", synth_drift, "baseline drift amplitude (mV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  cli::Context ctx;
  ctx.out = out_dir;
  ctx.verbosity = verbose;
  ctx.log = &std::cerr;
  try {
    if (o_config->count()) config::load(config_path, ctx.cfg);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
      config::set(ctx.cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o_seed->count()) ctx.cfg.experiment.seed = seed;
    if (o_jobs->count()) ctx.cfg.experiment.jobs = jobs;
    if (o_bins->count()) ctx.cfg.experiment.bins = bins;
    if (o_bpw->count()) ctx.cfg.slice.beats_per_window = beats_per_window;
    if (o_ts->count()) ctx.cfg.test_size = test_size;
    if (o_ch->count()) config::set(ctx.cfg, "eval.channels", channels);
    config::validate(ctx.cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    cli::write_text(ctx.out / "config.effective", config::snapshot(ctx.cfg));
    if (ingest->parsed()) {
      const auto res = cli::cmd_ingest(ctx, ingest_inputs, database);
      std::size_t labels = 0;
      for (const auto& e : res.manifest.entries) labels += e.beat_count;
      std::cout << "patients " << res.manifest.entries.size() << " labels " << labels << " failures "
                << res.manifest.failures.size() << '\n';
    } else if (preprocess->parsed()) {
      cli::cmd_preprocess(ctx, pre_record);
    } else if (pipeline->parsed()) {
      const auto windows = cli::cmd_pipeline(ctx, pipe_records);
      std::cout << "windows " << windows.size() << '\n';
    } else if (tda->parsed()) {
      if (values.empty() == tda_windows.empty()) throw CLI::ValidationError("tda", "give exactly one of --values or --windows");
      if (!values.empty()) {
        cli::cmd_tda(ctx, cli::parse_values(values), "signal");
      } else {
        const auto windows = io::read_windows(tda_windows);
        if (tda_index >= windows.size()) throw InvalidInput("window index out of range");
        const auto& w = windows[tda_index];
        cli::cmd_tda(ctx, w.samples, w.patient_id + " window " + std::to_string(tda_index) + " (" + w.label + ")");
      }
    } else if (feats->parsed()) {
      cli::cmd_features(ctx, feat_windows, feat_pca);
    } else if (train->parsed()) {
      const auto res = cli::cmd_train_ae(ctx, train_windows);
      std::cout << "final loss " << io::format_number(res.epoch_loss.back()) << '\n';
    } else if (score->parsed()) {
      cli::cmd_score(ctx, score_model, score_windows);
    } else if (crossval->parsed()) {
      cv.windows = cv_windows;
      const auto res = cli::cmd_crossval(ctx, cv);
      std::cout << "folds " << res.plan.folds.size();
      if (!cv.plan_only)
        std::cout << " test_weighted_accuracy " << io::format_number(res.report.test_weighted_accuracy.mean) << " +- "
                  << io::format_number(res.report.test_weighted_accuracy.stddev);
      std::cout << '\n';
    } else if (plot->parsed()) {
      cli::cmd_plot(ctx, plot_csv, plot_title);
    } else if (synth->parsed()) {
      for (const auto& p : cli::cmd_synth(ctx, synth_patients, synth_duration, synth_drift)) std::cout << p.string() << '\n';
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
