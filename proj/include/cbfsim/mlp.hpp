#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "cbfsim/param_search.hpp"

namespace cbfsim {

/// Fully-connected network mapping a normalized obstacle radius to a pair
/// of normalized gains: tanh hidden layers, logistic output layer, so raw
/// outputs live in (0,1) and scale to (0, kappa_max].
struct MlpModel {
  std::vector<int> layer_sizes;          // e.g. {1, 16, 16, 2}
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;   // biases[l]: layer_sizes[l+1]
  double input_min = 0.0;  // trained radius range, mapped onto [-1, 1]
  double input_max = 1.0;
  double kappa_max = 100.0;

  // Training provenance, carried in the model file.
  unsigned int seed = 0;
  int epochs_run = 0;
  double final_loss = 0.0;

  void validate() const;  // shape consistency; throws ConfigError
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 20000;
  unsigned int seed = 1;
  int patience = 0;  // stop after this many epochs without a new best loss; 0 disables
  std::vector<int> hidden = {16, 16};
  double kappa_max = 100.0;

  void validate() const;
};

/// One normalized training pair: x in [-1,1], targets in (0,1).
struct MlpSample {
  double x = 0.0;
  Eigen::VectorXd target;
};

/// Seeded uniform +-1/sqrt(fan_in) weights, zero biases.
MlpModel init_mlp(std::vector<int> layer_sizes, double input_min, double input_max,
                  double kappa_max, unsigned int seed);

double normalize_input(const MlpModel& model, double r_o);

/// Raw network outputs in (0,1) for a normalized input.
Eigen::VectorXd mlp_forward_normalized(const MlpModel& model, double x);

/// Gain prediction for an obstacle radius. Radii outside the trained range
/// clamp to it; `clamped` (optional) reports that. Both outputs are
/// strictly positive and at most kappa_max.
Eigen::Vector2d mlp_predict(const MlpModel& model, double r_o, bool* clamped = nullptr);

/// Summed cross-entropy sum_i sum_j [-t ln p - (1-t) ln(1-p)] with outputs
/// clipped to [1e-6, 1-1e-6] so the value stays finite.
double mlp_loss(const MlpModel& model, const std::vector<MlpSample>& data);

/// Backpropagated gradients of the unclipped cross-entropy; output shapes
/// mirror weights/biases.
void mlp_gradients(const MlpModel& model, const std::vector<MlpSample>& data,
                   std::vector<Eigen::MatrixXd>& grad_w, std::vector<Eigen::VectorXd>& grad_b);

/// Dataset rows -> normalized samples; the radius range and kappa_max come
/// back through the model built around these samples.
std::vector<MlpSample> normalize_dataset(const std::vector<DatasetRow>& rows, double kappa_max,
                                         double& input_min, double& input_max);

/// Full-batch gradient descent on the cross-entropy; returns the snapshot
/// with the lowest recorded loss. Appends one loss value per epoch to
/// `loss_curve` when given. Throws RuntimeFault on non-finite loss.
MlpModel train_mlp(const std::vector<DatasetRow>& rows, const TrainConfig& config,
                   std::vector<double>* loss_curve = nullptr);

void save_mlp(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

struct RunResult;   // sim_engine
struct SimOptions;  // sim_engine

/// Predicts gains for the radius, swaps radius and gains into the base
/// scenario, and simulates the filtered run. Throws PreconditionError when
/// the scenario no longer starts inside the safe set at the new radius.
RunResult predict_and_filter(const MlpModel& model, double r_o, const Scenario& base,
                             const SimOptions& options);

}  // namespace cbfsim
