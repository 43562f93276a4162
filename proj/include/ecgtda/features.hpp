#pragma once

// Handcrafted per-window features: DFT magnitudes, PQRST fiducial relations,
// amplitude statistics and a PCA projection fitted on training windows.

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "ecgtda/segmentation.hpp"

namespace ecgtda::features {

inline constexpr int kDftBins = 50;
inline constexpr int kFiducialSize = 19;
inline constexpr int kStatSize = 8;
inline constexpr int kPcaComponents = 10;
inline constexpr int kHistogramBins = 50;

/// |DFT| of bins 0..bins-1, no tapering window.
Eigen::VectorXd dft_features(const Eigen::Ref<const Eigen::VectorXd>& window, int bins = kDftBins);

/// Search ranges relative to R, in milliseconds (open intervals).
struct FiducialRanges {
  double q_ms = 60, s_ms = 60;
  double p_from_ms = 250, p_to_ms = 80;
  double t_from_ms = 80, t_to_ms = 400;
};

struct Fiducials {
  // P, Q, R, S, T in that order; positions in window samples, -1 when not found.
  std::array<double, 5> amplitude{};
  std::array<long, 5> position{-1, -1, -1, -1, -1};
  /// amplitudes(5), PR/QRS/QT/ST in ms (4), pairwise amplitude differences (10).
  Eigen::VectorXd block = Eigen::VectorXd::Zero(kFiducialSize);
  bool degenerate = false;
  bool missing = false;
};

Fiducials fiducial_features(const Eigen::Ref<const Eigen::VectorXd>& window, double center_position,
                            double ms_per_sample, const FiducialRanges& ranges = {});

struct Stats {
  /// min, max, mean, std, excess kurtosis, skewness, histogram entropy, mean crossings.
  Eigen::VectorXd block = Eigen::VectorXd::Zero(kStatSize);
  bool degenerate = false;
};

Stats stat_features(const Eigen::Ref<const Eigen::VectorXd>& window);

/// Principal axes of training windows. Axes are the columns of `axes`.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd axes;
  Eigen::VectorXd explained_variance;
  double total_variance = 0;

  int components() const { return static_cast<int>(axes.cols()); }
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& window) const;

  std::string to_json() const;
  static PcaModel from_json(const std::string& text);
};

/// Rows of `data` are windows. Needs more rows than components. Each axis is
/// sign-canonicalized so its largest-magnitude entry is positive.
PcaModel pca_fit(const Eigen::Ref<const Eigen::MatrixXd>& data, int components = kPcaComponents);

struct LayoutBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

struct FeatureLayout {
  static constexpr int kVersion = 1;
  std::vector<LayoutBlock> blocks;
  int total = 0;

  static FeatureLayout standard(int dft_bins = kDftBins, int pca_components = kPcaComponents);
  std::vector<std::string> column_names() const;
  const LayoutBlock& block(const std::string& name) const;
};

struct FeatureVector {
  Eigen::VectorXd values;
  std::vector<std::string> flags;
};

/// All blocks concatenated in FeatureLayout::standard() order.
FeatureVector extract(const seg::BeatWindow& w, const PcaModel& pca);

/// One row per window.
Eigen::MatrixXd feature_matrix(const std::vector<seg::BeatWindow>& windows, const PcaModel& pca);

/// Windows stacked as rows, for pca_fit.
Eigen::MatrixXd window_matrix(const std::vector<seg::BeatWindow>& windows);

}  // namespace ecgtda::features
