#pragma once

// Dense symmetric autoencoder with PReLU hidden units, a linear output layer,
// MSE loss, annealed inverted dropout and Adadelta updates.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ecgtda/errors.hpp"

namespace ecgtda::ae {

inline const std::vector<int>& default_sizes() {
  static const std::vector<int> sizes = {400, 200, 100, 20, 100, 200, 400};
  return sizes;
}

/// Weight matrix is (out x in). `slope` holds per-unit PReLU slopes; it is
/// empty for the linear output layer.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd slope;

  bool linear() const noexcept { return slope.size() == 0; }
};

/// Per-tensor running averages of squared gradients and squared updates.
struct AdadeltaSlot {
  Eigen::MatrixXd grad_sq_w, update_sq_w;
  Eigen::VectorXd grad_sq_b, update_sq_b;
  Eigen::VectorXd grad_sq_a, update_sq_a;
};

struct Adadelta {
  double rho = 0.95;
  double epsilon = 1e-6;
  double learning_rate = 1.0;
  std::vector<AdadeltaSlot> slots;
};

struct AEModel {
  std::vector<int> sizes;
  std::vector<DenseLayer> layers;
  Adadelta optimizer;
  int epoch = 0;  // completed training epochs
  std::uint64_t seed = 0;

  int input_size() const { return sizes.front(); }
  int latent_size() const { return sizes[sizes.size() / 2]; }
  std::size_t parameter_count() const;
};

struct TrainConfig {
  int epochs = 150;
  int batch_size = 128;
  double dropout_start = 0.5;
  int dropout_anneal_epochs = 100;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Linear anneal: dropout_start * max(0, 1 - epoch / dropout_anneal_epochs).
  double dropout_rate(int epoch) const;
  void validate() const;
};

/// He-normal weights N(0, sqrt(2 / fan_in)), zero biases, PReLU slopes 0.25.
/// `sizes` must be symmetric with an odd count (even number of weight layers).
AEModel ae_init(std::uint64_t seed, const std::vector<int>& sizes = default_sizes());

struct ForwardResult {
  Eigen::VectorXd latent;
  Eigen::VectorXd reconstruction;
};

/// Inference (training_mode=false) ignores dropout and is deterministic.
/// In training mode, hidden activations are dropped with probability
/// `dropout_rate` and survivors scaled by 1/(1-rate), using `rng`.
ForwardResult ae_forward(const AEModel& m, const Eigen::Ref<const Eigen::VectorXd>& window,
                         double dropout_rate = 0.0, bool training_mode = false, std::mt19937_64* rng = nullptr);

/// Gradients laid out like the model's parameters.
struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  std::vector<Eigen::VectorXd> slope;
};

/// Columns of `batch` are windows. Loss is the mean over all entries of the
/// squared reconstruction error. Dropout is active when `dropout_rate > 0`.
double loss_and_gradient(const AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& batch, Gradients* grad,
                         double dropout_rate = 0.0, std::mt19937_64* rng = nullptr);

double batch_loss(const AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// One Adadelta step. Zero gradients leave parameters unchanged.
void adadelta_step(AEModel& m, const Gradients& g);

struct TrainResult {
  std::vector<double> epoch_loss;   // mean training loss per epoch (with dropout)
  std::vector<double> dropout;      // rate used in each epoch
};

/// Columns of `windows` are normal-beat windows. Throws NumericFailure on a
/// non-finite loss.
TrainResult ae_train(AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& windows, const TrainConfig& cfg);

struct Channels {
  Eigen::VectorXd latent;
  Eigen::VectorXd residual;  // input - reconstruction
  double score = 0;          // mean squared residual
};

Channels ae_channels(const AEModel& m, const Eigen::Ref<const Eigen::VectorXd>& window);

// Flat parameter access in layer order: weight (column-major), bias, slope.
double& parameter(AEModel& m, std::size_t index);
Eigen::VectorXd flatten(const AEModel& m);
Eigen::VectorXd flatten(const Gradients& g);

/// Writes `<stem>.json` (metadata) and `<stem>.bin` (parameters + optimizer state).
void save(const AEModel& m, const std::filesystem::path& stem);
/// `path` may be the stem, the .json or the .bin. Throws ParseError on
/// malformed or mismatched files.
AEModel load(const std::filesystem::path& path);

}  // namespace ecgtda::ae
