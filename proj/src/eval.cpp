#include "ecgtda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "ecgtda/features.hpp"
#include "ecgtda/tda.hpp"
#include "json.hpp"

namespace ecgtda::eval {

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (const double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / double(v.size() - 1));
  }
  return s;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

nlohmann::ordered_json metrics_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  std::vector<std::vector<int>> conf(static_cast<std::size_t>(m.confusion.rows()));
  for (Eigen::Index i = 0; i < m.confusion.rows(); ++i)
    for (Eigen::Index k = 0; k < m.confusion.cols(); ++k) conf[static_cast<std::size_t>(i)].push_back(m.confusion(i, k));
  j["confusion"] = conf;
  j["support"] = std::vector<int>(m.support.data(), m.support.data() + m.support.size());
  j["ppv"] = std::vector<double>(m.ppv.data(), m.ppv.data() + m.ppv.size());
  j["sensitivity"] = std::vector<double>(m.sensitivity.data(), m.sensitivity.data() + m.sensitivity.size());
  j["weighted_accuracy"] = m.weighted_accuracy;
  j["accuracy"] = m.accuracy;
  j["macro_ppv"] = m.macro_ppv;
  j["macro_sensitivity"] = m.macro_sensitivity;
  j["flags"] = m.flags;
  return j;
}

struct FittedChannels {
  features::PcaModel pca;
  ae::AEModel autoencoder;
  bool has_pca = false;
  bool has_ae = false;
};

ChannelLayout layout_for(const ChannelMask& mask, const ExperimentConfig& cfg, int window_length) {
  ChannelLayout l;
  auto add = [&l](const char* name, int width) {
    l.blocks.emplace_back(name, width);
    l.total += width;
  };
  if (mask.betti) add("betti", 2 * cfg.bins);
  if (mask.features) add("features", features::FeatureLayout::standard(features::kDftBins, cfg.pca_components).total);
  if (mask.latent) add("latent", cfg.ae_sizes[cfg.ae_sizes.size() / 2]);
  if (mask.residual) add("residual", 1 + window_length);
  return l;
}

Eigen::MatrixXd channel_matrix(const std::vector<const seg::BeatWindow*>& windows, const ChannelMask& mask,
                               const ExperimentConfig& cfg, const FittedChannels& fit, const ChannelLayout& layout) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(windows.size()), layout.total);
  for (std::size_t r = 0; r < windows.size(); ++r) {
    const auto& w = *windows[r];
    Eigen::Index col = 0;
    auto row = x.row(static_cast<Eigen::Index>(r));
    if (mask.betti) {
      const auto pair = tda::betti_pair(w.samples, cfg.bins);
      row.segment(col, cfg.bins) = pair.sublevel.counts.cast<double>().transpose();
      row.segment(col + cfg.bins, cfg.bins) = pair.superlevel.counts.cast<double>().transpose();
      col += 2 * cfg.bins;
    }
    if (mask.features) {
      const auto fv = features::extract(w, fit.pca);
      row.segment(col, fv.values.size()) = fv.values.transpose();
      col += fv.values.size();
    }
    if (mask.latent || mask.residual) {
      const auto ch = ae::ae_channels(fit.autoencoder, w.samples);
      if (mask.latent) {
        row.segment(col, ch.latent.size()) = ch.latent.transpose();
        col += ch.latent.size();
      }
      if (mask.residual) {
        row[col] = ch.score;
        row.segment(col + 1, ch.residual.size()) = ch.residual.transpose();
        col += 1 + ch.residual.size();
      }
    }
  }
  return x;
}

FoldReport run_fold(const std::vector<seg::BeatWindow>& dataset, const Fold& fold, int fold_index,
                    const std::vector<char>& classes, const ExperimentConfig& cfg) {
  FoldReport rep;
  rep.fold = fold_index;
  const std::uint64_t seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(fold_index));
  const std::set<std::string> train_p(fold.train.begin(), fold.train.end());
  const std::set<std::string> val_p(fold.validation.begin(), fold.validation.end());
  const std::set<std::string> test_p(fold.test.begin(), fold.test.end());

  std::map<char, int> class_of;
  for (std::size_t c = 0; c < classes.size(); ++c) class_of[classes[c]] = static_cast<int>(c);
  auto label_of = [&](const seg::BeatWindow& w) -> int {
    if (cfg.task == Task::detection) return cfg.normal_labels.count(w.label) ? 0 : 1;
    const auto it = class_of.find(w.label);
    return it == class_of.end() ? -1 : it->second;
  };

  std::vector<const seg::BeatWindow*> train, val, test, normals;
  std::vector<int> y_train, y_val, y_test;
  for (const auto& w : dataset) {
    const bool in_train = train_p.count(w.patient_id) > 0;
    if (in_train && cfg.normal_labels.count(w.label)) normals.push_back(&w);
    const int y = label_of(w);
    if (y < 0) continue;
    if (in_train) {
      train.push_back(&w);
      y_train.push_back(y);
    } else if (val_p.count(w.patient_id)) {
      val.push_back(&w);
      y_val.push_back(y);
    } else if (test_p.count(w.patient_id)) {
      test.push_back(&w);
      y_test.push_back(y);
    }
  }
  if (train.empty()) throw InvalidInput("fold " + std::to_string(fold_index) + ": no training windows");

  if (cfg.task == Task::detection) {
    const auto keep = balance_undersample(y_train, seed);
    std::vector<const seg::BeatWindow*> bt;
    std::vector<int> by;
    for (const auto i : keep) {
      bt.push_back(train[i]);
      by.push_back(y_train[i]);
    }
    train = std::move(bt);
    y_train = std::move(by);
  }
  rep.train_windows = train.size();
  const int window_length = static_cast<int>(train.front()->samples.size());

  FittedChannels fit;
  if (cfg.mask.features) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(train.size()), window_length);
    for (std::size_t i = 0; i < train.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = train[i]->samples.transpose();
      rep.audit.pca.insert(train[i]->patient_id);
    }
    fit.pca = features::pca_fit(rows, cfg.pca_components);
    fit.has_pca = true;
  }
  if (cfg.mask.latent || cfg.mask.residual) {
    if (normals.empty()) throw InvalidInput("fold " + std::to_string(fold_index) + ": no normal training windows");
    Eigen::MatrixXd cols(window_length, static_cast<Eigen::Index>(normals.size()));
    for (std::size_t i = 0; i < normals.size(); ++i) {
      cols.col(static_cast<Eigen::Index>(i)) = normals[i]->samples;
      rep.audit.autoencoder.insert(normals[i]->patient_id);
    }
    auto sizes = cfg.ae_sizes;
    sizes.front() = sizes.back() = window_length;
    fit.autoencoder = ae::ae_init(mix_seed(seed, 1), sizes);
    auto tc = cfg.ae_train;
    tc.seed = mix_seed(seed, 2);
    ae::ae_train(fit.autoencoder, cols, tc);
    fit.has_ae = true;
  }

  rep.layout = layout_for(cfg.mask, cfg, window_length);
  const Eigen::MatrixXd x_train = channel_matrix(train, cfg.mask, cfg, fit, rep.layout);
  for (const auto* w : train) {
    rep.audit.normalization.insert(w->patient_id);
    rep.audit.head.insert(w->patient_id);
  }
  const int nclass = static_cast<int>(classes.size());
  const auto head = softmax_head_train(x_train, y_train, nclass, cfg.head);

  auto evaluate = [&](const std::vector<const seg::BeatWindow*>& ws, const std::vector<int>& ys) {
    if (ws.empty()) {
      MetricsReport m = compute_metrics({}, {}, nclass);
      return m;
    }
    const auto pred = head.predict(channel_matrix(ws, cfg.mask, cfg, fit, rep.layout));
    return compute_metrics(pred, ys, nclass);
  };
  rep.validation = evaluate(val, y_val);
  rep.test = evaluate(test, y_test);
  if (val.empty()) rep.notes.emplace_back("empty validation set");
  if (test.empty()) rep.notes.emplace_back("empty test set");

  std::set<int> val_classes(y_val.begin(), y_val.end());
  if (val_classes.size() >= 2) {
    const auto keep = balance_undersample(y_val, mix_seed(seed, 3));
    std::vector<const seg::BeatWindow*> bv;
    std::vector<int> by;
    for (const auto i : keep) {
      bv.push_back(val[i]);
      by.push_back(y_val[i]);
    }
    rep.validation_balanced = evaluate(bv, by);
  } else {
    rep.validation_balanced = rep.validation;
    rep.notes.emplace_back("validation has a single class; balanced report equals raw");
  }
  return rep;
}

}  // namespace

// --- splits --------------------------------------------------------------

SplitPlan make_splits(std::vector<std::string> patients, int test_size, double train_ratio, std::uint64_t seed) {
  std::sort(patients.begin(), patients.end());
  patients.erase(std::unique(patients.begin(), patients.end()), patients.end());
  if (test_size < 1) throw InvalidInput("make_splits: test_size must be >= 1");
  if (static_cast<std::size_t>(test_size) >= patients.size())
    throw InvalidInput("make_splits: test_size must be smaller than the patient count");
  if (!(train_ratio > 0 && train_ratio <= 1)) throw InvalidInput("make_splits: train ratio must be in (0, 1]");

  std::mt19937_64 rng(seed);
  seeded_shuffle(patients, rng);

  SplitPlan plan;
  plan.test_size = test_size;
  plan.train_ratio = train_ratio;
  plan.seed = seed;
  const std::size_t ts = static_cast<std::size_t>(test_size);
  const std::size_t folds = patients.size() / ts;
  for (std::size_t f = 0; f < folds; ++f) {
    Fold fold;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      if (i >= f * ts && i < (f + 1) * ts) fold.test.push_back(patients[i]);
      else rest.push_back(patients[i]);
    }
    auto n_train = static_cast<std::size_t>(std::floor(train_ratio * double(rest.size()) + 0.5 + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, rest.size());
    if (n_train == rest.size() && rest.size() > 1 && train_ratio < 1) --n_train;
    fold.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
    fold.validation.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

bool plan_is_consistent(const SplitPlan& plan) {
  std::set<std::string> tested;
  for (const auto& f : plan.folds) {
    std::set<std::string> seen;
    for (const auto* group : {&f.train, &f.validation, &f.test})
      for (const auto& p : *group)
        if (!seen.insert(p).second) return false;
    for (const auto& p : f.test)
      if (!tested.insert(p).second) return false;
  }
  return true;
}

// --- balancing -----------------------------------------------------------

std::vector<std::size_t> balance_undersample(std::span<const int> labels, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  if (by_label.size() < 2) throw InvalidInput("balance_undersample: need at least two classes");
  std::size_t minority = labels.size();
  for (const auto& [_, idx] : by_label) minority = std::min(minority, idx.size());

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (auto& [_, idx] : by_label) {
    seeded_shuffle(idx, rng);
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  seeded_shuffle(out, rng);
  return out;
}

std::vector<seg::BeatWindow> balance_undersample(const std::vector<seg::BeatWindow>& windows, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (const auto& w : windows) labels.push_back(static_cast<unsigned char>(w.label));
  std::vector<seg::BeatWindow> out;
  for (const auto i : balance_undersample(labels, seed)) out.push_back(windows[i]);
  return out;
}

// --- classifier head -----------------------------------------------------

Eigen::MatrixXd SoftmaxHead::predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.cols() != features()) throw InvalidInput("softmax head: feature layout mismatch");
  const Eigen::MatrixXd z = (x.rowwise() - feature_mean.transpose()).array().rowwise() / feature_scale.transpose().array();
  Eigen::MatrixXd logits = z * weight.transpose();
  logits.rowwise() += bias.transpose();
  return softmax_rows(logits);
}

std::vector<int> SoftmaxHead::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const auto p = predict_proba(x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg;
    p.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

SoftmaxHead zero_head(int classes, int features) {
  SoftmaxHead h;
  h.weight = Eigen::MatrixXd::Zero(classes, features);
  h.bias = Eigen::VectorXd::Zero(classes);
  h.feature_mean = Eigen::VectorXd::Zero(features);
  h.feature_scale = Eigen::VectorXd::Ones(features);
  return h;
}

double head_loss(const SoftmaxHead& h, const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                 double l2, Eigen::MatrixXd* grad_w, Eigen::VectorXd* grad_b) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw InvalidInput("head_loss: label count mismatch");
  Eigen::MatrixXd logits = x * h.weight.transpose();
  logits.rowwise() += h.bias.transpose();
  Eigen::MatrixXd p = softmax_rows(logits);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss -= std::log(std::max(p(i, y), 1e-300));
    p(i, y) -= 1.0;
  }
  loss = loss / double(n) + 0.5 * l2 * h.weight.squaredNorm();
  if (grad_w) *grad_w = p.transpose() * x / double(n) + l2 * h.weight;
  if (grad_b) *grad_b = p.colwise().sum().transpose() / double(n);
  return loss;
}

SoftmaxHead softmax_head_train(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels, int classes,
                               const HeadConfig& cfg) {
  if (classes < 2) throw InvalidInput("softmax head needs at least two classes");
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != labels.size())
    throw InvalidInput("softmax head: need one label per training row");
  for (const int y : labels)
    if (y < 0 || y >= classes) throw InvalidInput("softmax head: label out of range");
  if (!x.allFinite()) throw InvalidInput("softmax head: non-finite features");

  SoftmaxHead h = zero_head(classes, static_cast<int>(x.cols()));
  h.feature_mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - h.feature_mean.transpose();
  h.feature_scale = (centered.colwise().squaredNorm().transpose() / double(x.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < h.feature_scale.size(); ++j)
    if (!(h.feature_scale[j] > 1e-12)) h.feature_scale[j] = 1.0;
  const Eigen::MatrixXd z = centered.array().rowwise() / h.feature_scale.transpose().array();

  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  for (int it = 0; it < cfg.iterations; ++it) {
    const double loss = head_loss(h, z, labels, cfg.l2, &gw, &gb);
    if (!std::isfinite(loss)) throw NumericFailure("softmax head: non-finite loss");
    h.weight -= cfg.learning_rate * gw;
    h.bias -= cfg.learning_rate * gb;
  }
  return h;
}

// --- metrics -------------------------------------------------------------

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels, int classes) {
  if (predictions.size() != labels.size()) throw InvalidInput("compute_metrics: length mismatch");
  if (classes < 1) throw InvalidInput("compute_metrics: need at least one class");
  MetricsReport m;
  m.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) throw InvalidInput("compute_metrics: class out of range");
    ++m.confusion(t, p);
  }
  if (labels.empty()) m.flags.emplace_back("no_samples");
  m.support = m.confusion.rowwise().sum();
  const Eigen::VectorXi predicted = m.confusion.colwise().sum().transpose();
  m.ppv = Eigen::VectorXd::Zero(classes);
  m.sensitivity = Eigen::VectorXd::Zero(classes);
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    const int tp = m.confusion(c, c);
    if (predicted[c] > 0) m.ppv[c] = double(tp) / predicted[c];
    else if (!labels.empty()) m.flags.push_back("ppv_undefined:" + std::to_string(c));
    if (m.support[c] == 0 && !labels.empty()) m.flags.push_back("sensitivity_undefined:" + std::to_string(c));
    if (m.support[c] > 0) {
      m.sensitivity[c] = double(tp) / m.support[c];
      m.weighted_accuracy += m.sensitivity[c];
      m.macro_sensitivity += m.sensitivity[c];
      m.macro_ppv += m.ppv[c];
      ++present;
    }
  }
  if (present > 0) {
    m.weighted_accuracy /= present;
    m.macro_sensitivity /= present;
    m.macro_ppv /= present;
  }
  if (!labels.empty()) m.accuracy = double(m.confusion.trace()) / double(labels.size());
  return m;
}

// --- experiments ---------------------------------------------------------

std::string ChannelMask::to_string() const {
  std::string s;
  auto add = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(betti, "betti");
  add(features, "features");
  add(latent, "latent");
  add(residual, "residual");
  return s;
}

ChannelMask ChannelMask::parse(const std::string& spec) {
  ChannelMask m{false, false, false, false};
  std::stringstream ss(spec);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok == "betti") m.betti = true;
    else if (tok == "features") m.features = true;
    else if (tok == "latent") m.latent = true;
    else if (tok == "residual") m.residual = true;
    else if (!tok.empty()) throw InvalidInput("unknown channel '" + tok + "'");
  }
  if (!m.any()) throw InvalidInput("at least one channel must be enabled");
  return m;
}

std::vector<char> task_classes(const std::vector<seg::BeatWindow>& windows, const ExperimentConfig& cfg) {
  if (cfg.task == Task::detection) return {'0', '1'};
  std::map<char, std::size_t> freq;
  for (const auto& w : windows)
    if (!cfg.normal_labels.count(w.label)) ++freq[w.label];
  std::vector<std::pair<char, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<char> out;
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < cfg.max_classes; ++i) out.push_back(ranked[i].first);
  return out;
}

ExperimentReport run_experiment(const std::vector<seg::BeatWindow>& dataset, const SplitPlan& plan,
                                const ExperimentConfig& cfg) {
  if (!cfg.mask.any()) throw InvalidInput("run_experiment: at least one channel must be enabled");
  if (plan.folds.empty()) throw InvalidInput("run_experiment: empty split plan");
  if (dataset.empty()) throw InvalidInput("run_experiment: empty dataset");

  ExperimentReport rep;
  rep.task = cfg.task;
  rep.mask = cfg.mask;
  const auto classes = task_classes(dataset, cfg);
  if (classes.size() < 2) throw InvalidInput("run_experiment: fewer than two classes for this task");
  if (cfg.task == Task::detection) rep.class_names = {"normal", "abnormal"};
  else
    for (const char c : classes) rep.class_names.emplace_back(1, c);

  const std::size_t nf = plan.folds.size();
  rep.folds.resize(nf);
  std::vector<std::exception_ptr> errors(nf);
  auto work = [&](std::size_t f) {
    try {
      rep.folds[f] = run_fold(dataset, plan.folds[f], static_cast<int>(f), classes, cfg);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
  if (jobs == 1) {
    for (std::size_t f = 0; f < nf; ++f) work(f);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t f = t; f < nf; f += jobs) work(f);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> twa, tppv, tsens, vwa;
  for (const auto& f : rep.folds) {
    twa.push_back(f.test.weighted_accuracy);
    tppv.push_back(f.test.macro_ppv);
    tsens.push_back(f.test.macro_sensitivity);
    vwa.push_back(f.validation.weighted_accuracy);
  }
  rep.test_weighted_accuracy = summarize(twa);
  rep.test_macro_ppv = summarize(tppv);
  rep.test_macro_sensitivity = summarize(tsens);
  rep.validation_weighted_accuracy = summarize(vwa);
  return rep;
}

bool audit_no_leakage(const ExperimentReport& report, const SplitPlan& plan) {
  if (report.folds.size() != plan.folds.size()) return false;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const std::set<std::string> train(plan.folds[f].train.begin(), plan.folds[f].train.end());
    const auto& a = report.folds[f].audit;
    for (const auto* s : {&a.normalization, &a.pca, &a.autoencoder, &a.head})
      for (const auto& p : *s)
        if (!train.count(p)) return false;
  }
  return true;
}

std::string ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task == Task::detection ? "detection" : "classification";
  j["channels"] = mask.to_string();
  j["classes"] = class_names;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["train_windows"] = f.train_windows;
    nlohmann::ordered_json layout = nlohmann::ordered_json::array();
    for (const auto& [name, width] : f.layout.blocks) layout.push_back({{"block", name}, {"width", width}});
    fj["layout"] = layout;
    fj["feature_width"] = f.layout.total;
    fj["validation"] = metrics_json(f.validation);
    fj["validation_balanced"] = metrics_json(f.validation_balanced);
    fj["test"] = metrics_json(f.test);
    fj["notes"] = f.notes;
    j["folds"].push_back(std::move(fj));
  }
  auto sj = [](const Summary& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.stddev}}; };
  j["aggregate"] = {{"test_weighted_accuracy", sj(test_weighted_accuracy)},
                    {"test_macro_ppv", sj(test_macro_ppv)},
                    {"test_macro_sensitivity", sj(test_macro_sensitivity)},
                    {"validation_weighted_accuracy", sj(validation_weighted_accuracy)}};
  return j.dump(2);
}

std::string ExperimentReport::folds_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "fold,train_windows,val_weighted_accuracy,val_balanced_weighted_accuracy,test_weighted_accuracy,"
         "test_macro_ppv,test_macro_sensitivity\n";
  for (const auto& f : folds)
    out << f.fold << ',' << f.train_windows << ',' << f.validation.weighted_accuracy << ','
        << f.validation_balanced.weighted_accuracy << ',' << f.test.weighted_accuracy << ',' << f.test.macro_ppv
        << ',' << f.test.macro_sensitivity << '\n';
  return out.str();
}

AblationGrid run_ablation(const std::vector<seg::BeatWindow>& dataset, const SplitPlan& plan,
                          const ExperimentConfig& cfg, std::vector<ChannelMask> masks) {
  if (masks.empty()) {
    masks.push_back(cfg.mask);
    ChannelMask without = cfg.mask;
    without.betti = false;
    if (!cfg.mask.betti) {
      masks.front().betti = true;
      without = cfg.mask;
    }
    masks.push_back(without);
  }
  AblationGrid grid;
  grid.task = cfg.task;
  for (const auto& mask : masks) {
    auto c = cfg;
    c.mask = mask;
    const auto rep = run_experiment(dataset, plan, c);
    AblationRow row;
    row.mask = mask;
    row.feature_width = rep.folds.front().layout.total;
    for (const auto& f : rep.folds) row.test_weighted_accuracy.push_back(f.test.weighted_accuracy);
    row.summary = rep.test_weighted_accuracy;
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

std::string AblationGrid::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "fold";
  for (const auto& r : rows) out << ",\"" << r.mask.to_string() << "\"";
  out << '\n';
  for (std::size_t f = 0; f < fold_count(); ++f) {
    out << f;
    for (const auto& r : rows) out << ',' << r.test_weighted_accuracy[f];
    out << '\n';
  }
  out << "mean";
  for (const auto& r : rows) out << ',' << r.summary.mean;
  out << "\nstd";
  for (const auto& r : rows) out << ',' << r.summary.stddev;
  out << "\nfeature_width";
  for (const auto& r : rows) out << ',' << r.feature_width;
  out << '\n';
  return out.str();
}

}  // namespace ecgtda::eval
