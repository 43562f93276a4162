#include "commands.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "ecgtda/errors.hpp"
#include "ecgtda/features.hpp"
#include "ecgtda/synth.hpp"
#include "ecgtda/tables.hpp"
#include "ecgtda/tda.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ecgtda::cli {

void Context::warn(const std::string& msg) const {
  if (log) *log << "warning: " << msg << '\n';
}

void Context::info(const std::string& msg) const {
  if (log && verbosity > 0) *log << msg << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InvalidInput("cannot write " + path.string());
}

namespace {

// Runs body(i) for i in [0, n) on up to `jobs` threads; the first exception
// (by index) is rethrown after all workers finish.
template <typename Body>
void parallel_for(std::size_t n, int jobs, Body body) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, n); ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += workers) run(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ordered_json stages_json(const std::vector<dsp::StageReport>& stages) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : stages)
    arr.push_back({{"stage", s.stage},
                   {"mean_square", s.mean_square},
                   {"length", s.length},
                   {"rate_hz", s.rate_hz},
                   {"flags", s.flags}});
  return arr;
}

std::string betti_table(const std::vector<seg::BeatWindow>& windows, int bins) {
  std::vector<std::string> cols;
  for (int i = 0; i < bins; ++i) cols.push_back("sub_" + std::to_string(i));
  for (int i = 0; i < bins; ++i) cols.push_back("super_" + std::to_string(i));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(windows.size()), 2 * bins);
  for (std::size_t r = 0; r < windows.size(); ++r) {
    const auto pair = tda::betti_pair(windows[r].samples, bins);
    m.row(static_cast<Eigen::Index>(r)) << pair.sublevel.counts.cast<double>().transpose(),
        pair.superlevel.counts.cast<double>().transpose();
  }
  std::ostringstream out;
  io::write_window_table(out, cols, windows, m);
  return out.str();
}

void write_features(const Context& ctx, const std::vector<seg::BeatWindow>& windows,
                    const features::PcaModel& pca) {
  const auto layout = features::FeatureLayout::standard(features::kDftBins, pca.components());
  const auto values = features::feature_matrix(windows, pca);
  std::ostringstream out;
  io::write_window_table(out, layout.column_names(), windows, values);
  write_text(ctx.out / "features.csv", out.str());
  io::write_matrix(ctx.out / "features.bin", values);
}

std::string window_csv(const std::vector<seg::BeatWindow>& windows) {
  const auto samples = features::window_matrix(windows);
  std::vector<std::string> cols;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) cols.push_back("s" + std::to_string(i));
  std::ostringstream out;
  io::write_window_table(out, cols, windows, samples);
  return out.str();
}

std::vector<seg::BeatWindow> cohort_windows(const Context& ctx, const std::vector<wfdb::AnnotatedRecord>& records) {
  std::vector<ProcessedRecord> done(records.size());
  parallel_for(records.size(), ctx.cfg.experiment.jobs,
               [&](std::size_t i) { done[i] = process_record(records[i], ctx.cfg); });
  std::vector<seg::BeatWindow> windows;
  for (const auto& p : done) {
    for (const auto& w : p.warnings) ctx.warn(p.record.patient_id + ": " + w);
    windows.insert(windows.end(), p.windows.begin(), p.windows.end());
  }
  return windows;
}

}  // namespace

std::vector<fs::path> expand_records(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".hea") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

wfdb::ReadOptions read_options(const config::RunConfig& cfg) {
  wfdb::ReadOptions opts;
  opts.channel = cfg.channel;
  opts.annotator = cfg.annotator;
  if (!cfg.beat_codes.empty()) opts.beats = wfdb::BeatCodeSet::load(cfg.beat_codes);
  return opts;
}

IngestResult cmd_ingest(const Context& ctx, const std::vector<std::string>& inputs, const std::string& database) {
  IngestResult res;
  const auto records = expand_records(inputs);
  res.inputs = records.size();
  const auto opts = read_options(ctx.cfg);
  for (const auto& path : records) {
    try {
      const auto rec = wfdb::read_record(path, opts);
      const std::string db = database.empty() ? fs::absolute(path).parent_path().filename().string() : database;
      res.manifest.add(wfdb::manifest_entry(rec, path.string(), db));
      ctx.info("ingested " + path.string());
    } catch (const std::exception& e) {
      res.manifest.failures.push_back(path.string() + ": " + e.what());
      ctx.warn("skipping " + path.string() + ": " + e.what());
    }
  }
  write_text(ctx.out / "manifest.json", res.manifest.to_json());
  std::string csv = "database,label,count\n";
  for (const auto& [db, summary] : res.manifest.summarize())
    for (const auto& [label, count] : summary.histogram) csv += db + ',' + label + ',' + std::to_string(count) + '\n';
  write_text(ctx.out / "labels.csv", csv);
  if (res.inputs > 0 && res.manifest.entries.empty()) throw ParseError("no record could be read");
  return res;
}

ProcessedRecord process_record(const wfdb::AnnotatedRecord& raw, const config::RunConfig& cfg) {
  ProcessedRecord out;
  auto pre = dsp::preprocess(raw.signal, cfg.preprocess);
  out.stages = std::move(pre.stages);
  out.record = raw;
  out.record.signal = std::move(pre.signal);
  std::vector<long> samples;
  for (const auto& b : raw.beat_annotations) samples.push_back(b.sample);
  const auto mapped = dsp::remap_indices(samples, raw.signal.sample_rate_hz, cfg.preprocess.target_rate_hz,
                                         raw.signal.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) out.record.beat_annotations[i].sample = mapped[i];
  // Beats closer than one target sample collapse onto the same index.
  auto& beats = out.record.beat_annotations;
  beats.erase(std::unique(beats.begin(), beats.end(),
                          [](const auto& a, const auto& b) { return a.sample == b.sample; }),
              beats.end());
  out.windows = seg::slice_windows(out.record, cfg.slice);
  if (out.windows.empty())
    out.warnings.push_back("no windows (" + std::to_string(beats.size()) + " beats, need at least " +
                           std::to_string(cfg.slice.beats_per_window + 2) + ")");
  return out;
}

void cmd_preprocess(const Context& ctx, const std::string& record) {
  const auto raw = wfdb::read_record(record, read_options(ctx.cfg));
  const auto p = process_record(raw, ctx.cfg);
  std::string csv = "sample,value\n";
  for (Eigen::Index i = 0; i < p.record.signal.size(); ++i)
    csv += std::to_string(i) + ',' + io::format_number(p.record.signal.samples[i]) + '\n';
  write_text(ctx.out / "signal.csv", csv);
  io::write_matrix(ctx.out / "signal.bin", p.record.signal.samples);
  ordered_json j;
  j["record"] = raw.patient_id;
  j["stages"] = stages_json(p.stages);
  write_text(ctx.out / "stages.json", j.dump(2) + '\n');
}

std::vector<seg::BeatWindow> cmd_pipeline(const Context& ctx, const std::vector<std::string>& records) {
  const auto paths = expand_records(records);
  const auto opts = read_options(ctx.cfg);
  std::vector<ProcessedRecord> done(paths.size());
  parallel_for(paths.size(), ctx.cfg.experiment.jobs, [&](std::size_t i) {
    try {
      done[i] = process_record(wfdb::read_record(paths[i], opts), ctx.cfg);
    } catch (const std::exception& e) {
      throw ParseError(paths[i].string() + ": " + e.what());
    }
  });

  std::vector<seg::BeatWindow> windows;
  ordered_json stages;
  for (std::size_t i = 0; i < done.size(); ++i) {
    for (const auto& w : done[i].warnings) ctx.warn(paths[i].string() + ": " + w);
    stages[done[i].record.patient_id] = stages_json(done[i].stages);
    windows.insert(windows.end(), done[i].windows.begin(), done[i].windows.end());
  }
  fs::create_directories(ctx.out);
  io::write_windows(ctx.out / "windows.bin", windows);
  write_text(ctx.out / "windows.csv", window_csv(windows));
  write_text(ctx.out / "stages.json", stages.dump(2) + '\n');
  write_text(ctx.out / "betti.csv", betti_table(windows, ctx.cfg.experiment.bins));
  if (static_cast<int>(windows.size()) > ctx.cfg.experiment.pca_components) {
    const auto pca = features::pca_fit(features::window_matrix(windows), ctx.cfg.experiment.pca_components);
    write_text(ctx.out / "pca.json", pca.to_json());
    write_features(ctx, windows, pca);
  } else {
    ctx.warn("too few windows for PCA; features.csv not written");
  }
  ctx.info(std::to_string(windows.size()) + " windows from " + std::to_string(paths.size()) + " records");
  return windows;
}

Eigen::VectorXd parse_values(const std::string& text) {
  std::string body = text;
  if (fs::is_regular_file(text)) {
    std::ifstream in(text);
    std::stringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  std::replace(body.begin(), body.end(), ',', ' ');
  std::replace(body.begin(), body.end(), '\n', ' ');
  std::istringstream in(body);
  std::vector<double> v;
  for (std::string tok; in >> tok;) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ParseError("not a number: '" + tok + "'");
    }
  }
  if (v.empty()) throw InvalidInput("no values given");
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void cmd_tda(const Context& ctx, const Eigen::VectorXd& values, const std::string& title) {
  const auto sub = tda::sublevel_barcode(values);
  const auto super = tda::superlevel_barcode(values);
  const auto sub_curve = tda::betti_curve(sub, ctx.cfg.experiment.bins);
  const auto super_curve = tda::betti_curve(super, ctx.cfg.experiment.bins);
  write_text(ctx.out / "sublevel.csv", io::barcode_csv(sub));
  write_text(ctx.out / "superlevel.csv", io::barcode_csv(super));
  std::string betti = "alpha,sublevel,superlevel_alpha,superlevel\n";
  for (Eigen::Index i = 0; i < sub_curve.grid.size(); ++i)
    betti += io::format_number(sub_curve.grid[i]) + ',' + std::to_string(sub_curve.counts[i]) + ',' +
             io::format_number(super_curve.grid[i]) + ',' + std::to_string(super_curve.counts[i]) + '\n';
  write_text(ctx.out / "betti.csv", betti);
  write_text(ctx.out / "barcode.json", io::tda_json({sub, super, sub_curve, super_curve}));
  write_text(ctx.out / "barcode.svg", io::barcode_svg(sub, super, sub_curve, super_curve, title));
}

void cmd_features(const Context& ctx, const fs::path& windows_path, const fs::path& pca_path) {
  const auto windows = io::read_windows(windows_path);
  if (windows.empty()) throw InvalidInput("no windows in " + windows_path.string());
  features::PcaModel pca;
  if (!pca_path.empty()) {
    std::ifstream in(pca_path);
    if (!in) throw InvalidInput("cannot open " + pca_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    pca = features::PcaModel::from_json(ss.str());
  } else {
    pca = features::pca_fit(features::window_matrix(windows), ctx.cfg.experiment.pca_components);
  }
  write_text(ctx.out / "pca.json", pca.to_json());
  write_features(ctx, windows, pca);
}

ae::TrainResult cmd_train_ae(const Context& ctx, const fs::path& windows_path) {
  const auto windows = io::read_windows(windows_path);
  std::vector<const seg::BeatWindow*> normals;
  for (const auto& w : windows)
    if (ctx.cfg.experiment.normal_labels.count(w.label)) normals.push_back(&w);
  if (normals.empty()) throw InvalidInput("no normal windows to train on in " + windows_path.string());
  const auto length = normals.front()->samples.size();
  Eigen::MatrixXd cols(length, static_cast<Eigen::Index>(normals.size()));
  for (std::size_t i = 0; i < normals.size(); ++i) cols.col(static_cast<Eigen::Index>(i)) = normals[i]->samples;

  auto sizes = ctx.cfg.experiment.ae_sizes;
  sizes.front() = sizes.back() = static_cast<int>(length);
  auto model = ae::ae_init(ctx.cfg.experiment.seed, sizes);
  auto tc = ctx.cfg.experiment.ae_train;
  tc.seed = ctx.cfg.experiment.seed;
  const auto res = ae::ae_train(model, cols, tc);
  fs::create_directories(ctx.out);
  ae::save(model, ctx.out / "model");
  std::string csv = "epoch,loss,dropout\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
    csv += std::to_string(e) + ',' + io::format_number(res.epoch_loss[e]) + ',' + io::format_number(res.dropout[e]) + '\n';
  write_text(ctx.out / "loss.csv", csv);
  return res;
}

void cmd_score(const Context& ctx, const fs::path& model_path, const fs::path& windows_path) {
  const auto model = ae::load(model_path);
  const auto windows = io::read_windows(windows_path);
  std::vector<std::string> cols = {"score"};
  for (int i = 0; i < model.latent_size(); ++i) cols.push_back("z" + std::to_string(i));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < windows.size(); ++r) {
    const auto ch = ae::ae_channels(model, windows[r].samples);
    m(static_cast<Eigen::Index>(r), 0) = ch.score;
    m.row(static_cast<Eigen::Index>(r)).tail(ch.latent.size()) = ch.latent.transpose();
  }
  std::ostringstream out;
  io::write_window_table(out, cols, windows, m);
  write_text(ctx.out / "scores.csv", out.str());
}

CrossvalResult cmd_crossval(const Context& ctx, const CrossvalOptions& opt) {
  const auto& cfg = ctx.cfg;
  CrossvalResult res;
  std::vector<seg::BeatWindow> windows;
  std::vector<std::string> patients;
  if (opt.synthetic_patients > 0) {
    for (int i = 0; i < opt.synthetic_patients; ++i) patients.push_back(synth::patient_profile(i, cfg.experiment.seed).id);
    if (!opt.plan_only) {
      synth::RecordConfig rc;
      rc.duration_s = opt.synthetic_duration_s;
      rc.abnormal_mix = {{'V', 0.12}, {'A', 0.08}, {'L', 0.06}};
      windows = cohort_windows(ctx, synth::synth_cohort(opt.synthetic_patients, rc, cfg.experiment.seed));
    }
  } else {
    if (opt.windows.empty()) throw InvalidInput("crossval needs --windows or --synthetic");
    windows = io::read_windows(opt.windows);
    std::set<std::string> ids;
    for (const auto& w : windows) ids.insert(w.patient_id);
    patients.assign(ids.begin(), ids.end());
  }

  res.plan = eval::make_splits(patients, cfg.test_size, cfg.train_ratio, cfg.experiment.seed);
  ordered_json plan;
  plan["patients"] = patients.size();
  plan["test_size"] = res.plan.test_size;
  plan["train_ratio"] = res.plan.train_ratio;
  plan["seed"] = res.plan.seed;
  plan["fold_count"] = res.plan.folds.size();
  plan["consistent"] = eval::plan_is_consistent(res.plan);
  plan["folds"] = ordered_json::array();
  for (const auto& f : res.plan.folds)
    plan["folds"].push_back({{"train", f.train}, {"validation", f.validation}, {"test", f.test}});
  write_text(ctx.out / "plan.json", plan.dump(2) + '\n');
  if (opt.plan_only) return res;

  res.report = eval::run_experiment(windows, res.plan, cfg.experiment);
  res.leakage_free = eval::audit_no_leakage(res.report, res.plan);
  write_text(ctx.out / "report.json", res.report.to_json() + '\n');
  write_text(ctx.out / "folds.csv", res.report.folds_csv());
  if (opt.ablation) {
    const auto grid = eval::run_ablation(windows, res.plan, cfg.experiment);
    write_text(ctx.out / "ablation.csv", grid.to_csv());
  }
  if (!res.leakage_free) throw NumericFailure("leakage audit failed");
  return res;
}

void cmd_plot(const Context& ctx, const fs::path& csv, const std::string& title) {
  std::ifstream in(csv);
  if (!in) throw InvalidInput("cannot open " + csv.string());
  if (csv.extension() == ".json") {
    std::stringstream ss;
    ss << in.rdbuf();
    const auto b = io::tda_from_json(ss.str());
    write_text(ctx.out / "plot.svg", io::barcode_svg(b.sublevel, b.superlevel, b.sublevel_curve, b.superlevel_curve,
                                                    title.empty() ? csv.filename().string() : title));
    return;
  }
  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv.string() + ": empty file");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) names.push_back(tok);
  }
  std::vector<std::vector<double>> cols(names.size());
  std::vector<bool> numeric(names.size(), true);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::size_t c = 0;
    for (std::string tok; std::getline(ss, tok, ',') && c < names.size(); ++c) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) numeric[c] = false;
        else cols[c].push_back(v);
      } catch (const std::logic_error&) {
        numeric[c] = false;
      }
    }
  }
  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (std::size_t c = 0; c < names.size(); ++c)
    if (numeric[c] && !cols[c].empty()) series.emplace_back(names[c], cols[c]);
  if (series.empty()) throw ParseError(csv.string() + ": no numeric columns");
  write_text(ctx.out / "plot.svg", io::series_svg(series, title.empty() ? csv.filename().string() : title));
}

std::vector<fs::path> cmd_synth(const Context& ctx, int patients, double duration_s, double drift) {
  synth::RecordConfig rc;
  rc.duration_s = duration_s;
  rc.drift_amplitude = drift;
  rc.abnormal_mix = {{'V', 0.12}, {'A', 0.08}, {'L', 0.06}};
  std::vector<fs::path> out;
  for (const auto& rec : synth::synth_cohort(patients, rc, ctx.cfg.experiment.seed))
    out.push_back(synth::write_wfdb(rec, ctx.out, rec.patient_id));
  return out;
}

}  // namespace ecgtda::cli
