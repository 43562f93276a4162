#pragma once

// Patient-based cross-validation: split plans, class balancing, a softmax
// classifier head over concatenated channels, and metric reports.

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ecgtda/autoencoder.hpp"
#include "ecgtda/segmentation.hpp"

namespace ecgtda::eval {

// --- splits --------------------------------------------------------------

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct SplitPlan {
  std::vector<Fold> folds;
  int test_size = 5;
  double train_ratio = 0.7;
  std::uint64_t seed = 0;
};

/// Seeded permutation of the (deduplicated, sorted) patients cut into
/// consecutive disjoint test blocks of `test_size`; leftover patients are
/// never tested. The remaining patients of each fold keep the permuted order
/// and are split round(ratio * m) / rest into train / validation.
SplitPlan make_splits(std::vector<std::string> patients, int test_size, double train_ratio = 0.7,
                      std::uint64_t seed = 0);

/// Checks fold-internal disjointness and test-set disjointness across folds.
bool plan_is_consistent(const SplitPlan& plan);

// --- balancing -----------------------------------------------------------

/// Indices selecting an equal number (the minority count) of each label,
/// drawn without replacement and shuffled. Throws unless >= 2 labels occur.
std::vector<std::size_t> balance_undersample(std::span<const int> labels, std::uint64_t seed);

std::vector<seg::BeatWindow> balance_undersample(const std::vector<seg::BeatWindow>& windows, std::uint64_t seed);

// --- classifier head -----------------------------------------------------

struct HeadConfig {
  int iterations = 500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
};

/// Multinomial logistic regression on z-scored inputs. Weights are
/// (classes x features).
struct SoftmaxHead {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;

  int classes() const { return static_cast<int>(weight.rows()); }
  int features() const { return static_cast<int>(weight.cols()); }

  /// Rows of `x` are samples; returns rows of class probabilities.
  Eigen::MatrixXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  std::vector<int> predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

/// A head with all-zero weights and identity scaling.
SoftmaxHead zero_head(int classes, int features);

/// Mean cross-entropy plus (l2/2)·||W||² on already-standardized `x`.
/// Gradient w.r.t. weight and bias is written when the outputs are non-null.
double head_loss(const SoftmaxHead& h, const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                 double l2, Eigen::MatrixXd* grad_w, Eigen::VectorXd* grad_b);

/// Full-batch gradient descent from zero weights; deterministic.
SoftmaxHead softmax_head_train(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                               int classes, const HeadConfig& cfg = {});

// --- metrics -------------------------------------------------------------

struct MetricsReport {
  Eigen::MatrixXi confusion;  // rows: true class, columns: predicted
  Eigen::VectorXi support;
  Eigen::VectorXd ppv;
  Eigen::VectorXd sensitivity;
  double weighted_accuracy = 0;  // mean recall over classes with support
  double accuracy = 0;
  double macro_ppv = 0;
  double macro_sensitivity = 0;
  std::vector<std::string> flags;  // "no_samples", "ppv_undefined:c", "sensitivity_undefined:c"
};

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels, int classes);

// --- experiments ---------------------------------------------------------

enum class Task { detection, classification };

struct ChannelMask {
  bool betti = true;
  bool features = true;
  bool latent = true;
  bool residual = true;

  bool any() const { return betti || features || latent || residual; }
  std::string to_string() const;
  /// Comma-separated subset of "betti,features,latent,residual".
  static ChannelMask parse(const std::string& spec);
};

struct ExperimentConfig {
  Task task = Task::detection;
  ChannelMask mask;
  int bins = 100;
  int pca_components = 10;
  std::vector<int> ae_sizes = ae::default_sizes();
  ae::TrainConfig ae_train;
  HeadConfig head;
  std::set<char> normal_labels = {'N'};
  int max_classes = 13;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Patients whose windows reached each fitted component.
struct FitAudit {
  std::set<std::string> normalization;
  std::set<std::string> pca;
  std::set<std::string> autoencoder;
  std::set<std::string> head;
};

struct ChannelLayout {
  std::vector<std::pair<std::string, int>> blocks;  // name, width
  int total = 0;
};

struct FoldReport {
  int fold = 0;
  MetricsReport validation;           // raw validation windows
  MetricsReport validation_balanced;  // undersampled validation windows
  MetricsReport test;
  ChannelLayout layout;
  FitAudit audit;
  std::size_t train_windows = 0;
  std::vector<std::string> notes;
};

struct Summary {
  double mean = 0;
  double stddev = 0;
};

struct ExperimentReport {
  Task task = Task::detection;
  ChannelMask mask;
  std::vector<std::string> class_names;  // index -> label
  std::vector<FoldReport> folds;
  Summary test_weighted_accuracy, test_macro_ppv, test_macro_sensitivity;
  Summary validation_weighted_accuracy;

  std::string to_json() const;
  std::string folds_csv() const;
};

/// Class list for a task. Detection returns the placeholders '0' (normal) and
/// '1' (abnormal), since windows map through `normal_labels` rather than by
/// symbol; classification returns the most frequent non-normal labels (ties
/// by symbol).
std::vector<char> task_classes(const std::vector<seg::BeatWindow>& windows, const ExperimentConfig& cfg);

/// Fits normalization, PCA, autoencoder and head on each fold's train
/// patients only, then scores validation and test patients.
ExperimentReport run_experiment(const std::vector<seg::BeatWindow>& dataset, const SplitPlan& plan,
                                const ExperimentConfig& cfg);

/// True when every fitted component saw only that fold's train patients.
bool audit_no_leakage(const ExperimentReport& report, const SplitPlan& plan);

struct AblationRow {
  ChannelMask mask;
  int feature_width = 0;
  std::vector<double> test_weighted_accuracy;  // per fold
  Summary summary;
};

struct AblationGrid {
  Task task = Task::detection;
  std::vector<AblationRow> rows;

  std::size_t fold_count() const { return rows.empty() ? 0 : rows.front().test_weighted_accuracy.size(); }
  std::string to_csv() const;
};

/// Runs `run_experiment` once per mask; default masks are all channels with
/// and without the Betti channel.
AblationGrid run_ablation(const std::vector<seg::BeatWindow>& dataset, const SplitPlan& plan,
                          const ExperimentConfig& cfg, std::vector<ChannelMask> masks = {});

}  // namespace ecgtda::eval
