#include "cbfsim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "cbfsim/errors.hpp"
#include "cbfsim/sim_engine.hpp"

namespace cbfsim {

namespace {

constexpr double kClip = 1e-6;

double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

/// Uniform double in (-lim, lim) from the raw generator stream; avoids
/// std::uniform_real_distribution, whose output is implementation-defined.
double uniform_pm(std::mt19937& rng, double lim) {
  const double u = (static_cast<double>(rng()) + 0.5) / 4294967296.0;  // (0,1)
  return lim * (2.0 * u - 1.0);
}

/// Forward pass keeping the per-layer activations for backprop. acts[0] is
/// the input; acts.back() the clip-free logistic outputs.
void forward_layers(const MlpModel& m, double x, std::vector<Eigen::VectorXd>& acts) {
  const std::size_t n_layers = m.layer_sizes.size();
  acts.resize(n_layers);
  acts[0] = Eigen::VectorXd::Constant(1, x);
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Eigen::VectorXd y = m.weights[l] * acts[l] + m.biases[l];
    if (l + 2 < n_layers) {
      acts[l + 1] = y.array().tanh();
    } else {
      acts[l + 1] = y.unaryExpr([](double v) { return logistic(v); });
    }
  }
}

}  // namespace

void MlpModel::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("network needs at least two layers");
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer sizes must be >= 1");
  }
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw ConfigError("weight/bias count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw ConfigError("weight/bias shapes do not match layer_sizes");
    }
  }
  if (!(kappa_max > 0.0)) throw ConfigError("kappa_max must be > 0");
  if (!(input_max >= input_min)) throw ConfigError("input scale must have max >= min");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
  if (!(kappa_max > 0.0)) throw ConfigError("kappa_max must be > 0");
}

MlpModel init_mlp(std::vector<int> layer_sizes, double input_min, double input_max,
                  double kappa_max, unsigned int seed) {
  MlpModel m;
  m.layer_sizes = std::move(layer_sizes);
  m.input_min = input_min;
  m.input_max = input_max;
  m.kappa_max = kappa_max;
  m.seed = seed;

  std::mt19937 rng(seed);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const int fan_in = m.layer_sizes[l];
    const int fan_out = m.layer_sizes[l + 1];
    const double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = uniform_pm(rng, lim);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  m.validate();
  return m;
}

double normalize_input(const MlpModel& model, double r_o) {
  if (model.input_max > model.input_min) {
    return 2.0 * (r_o - model.input_min) / (model.input_max - model.input_min) - 1.0;
  }
  return 0.0;  // degenerate single-radius range
}

Eigen::VectorXd mlp_forward_normalized(const MlpModel& model, double x) {
  std::vector<Eigen::VectorXd> acts;
  forward_layers(model, x, acts);
  return acts.back();
}

Eigen::Vector2d mlp_predict(const MlpModel& model, double r_o, bool* clamped) {
  if (model.layer_sizes.front() != 1 || model.layer_sizes.back() != 2) {
    throw ConfigError("gain prediction needs a 1-input, 2-output network");
  }
  const double r = std::clamp(r_o, model.input_min, model.input_max);
  if (clamped) *clamped = r != r_o;
  Eigen::VectorXd out = mlp_forward_normalized(model, normalize_input(model, r));
  // The logistic output is positive in exact arithmetic; the floor guards
  // the kappa > 0 contract against underflow at extreme preactivations.
  return model.kappa_max * out.array().max(1e-12);
}

double mlp_loss(const MlpModel& model, const std::vector<MlpSample>& data) {
  double j = 0.0;
  std::vector<Eigen::VectorXd> acts;
  for (const MlpSample& s : data) {
    forward_layers(model, s.x, acts);
    const Eigen::VectorXd& out = acts.back();
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double p = std::clamp(out[i], kClip, 1.0 - kClip);
      const double t = s.target[i];
      j += -t * std::log(p) - (1.0 - t) * std::log(1.0 - p);
    }
  }
  return j;
}

void mlp_gradients(const MlpModel& model, const std::vector<MlpSample>& data,
                   std::vector<Eigen::MatrixXd>& grad_w, std::vector<Eigen::VectorXd>& grad_b) {
  const std::size_t n_w = model.weights.size();
  grad_w.resize(n_w);
  grad_b.resize(n_w);
  for (std::size_t l = 0; l < n_w; ++l) {
    grad_w[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
    grad_b[l] = Eigen::VectorXd::Zero(model.biases[l].size());
  }

  std::vector<Eigen::VectorXd> acts;
  for (const MlpSample& s : data) {
    forward_layers(model, s.x, acts);
    // Cross-entropy through the logistic output collapses to p - t.
    Eigen::VectorXd delta = acts.back() - s.target;
    for (std::size_t l = n_w; l-- > 0;) {
      grad_w[l] += delta * acts[l].transpose();
      grad_b[l] += delta;
      if (l > 0) {
        // tanh'(y) = 1 - a^2 with a the stored activation.
        delta = (model.weights[l].transpose() * delta).cwiseProduct(
            (1.0 - acts[l].array().square()).matrix());
      }
    }
  }
}

std::vector<MlpSample> normalize_dataset(const std::vector<DatasetRow>& rows, double kappa_max,
                                         double& input_min, double& input_max) {
  if (rows.empty()) throw ConfigError("dataset is empty");
  input_min = std::numeric_limits<double>::infinity();
  input_max = -std::numeric_limits<double>::infinity();
  for (const DatasetRow& row : rows) {
    input_min = std::min(input_min, row.r_o);
    input_max = std::max(input_max, row.r_o);
  }

  MlpModel scale;  // only for normalize_input
  scale.input_min = input_min;
  scale.input_max = input_max;

  std::vector<MlpSample> samples;
  samples.reserve(rows.size());
  for (const DatasetRow& row : rows) {
    MlpSample s;
    s.x = normalize_input(scale, row.r_o);
    s.target = Eigen::Vector2d(std::clamp(row.kappa1 / kappa_max, kClip, 1.0 - kClip),
                               std::clamp(row.kappa2 / kappa_max, kClip, 1.0 - kClip));
    samples.push_back(std::move(s));
  }
  return samples;
}

MlpModel train_mlp(const std::vector<DatasetRow>& rows, const TrainConfig& config,
                   std::vector<double>* loss_curve) {
  config.validate();

  double input_min = 0.0;
  double input_max = 0.0;
  const std::vector<MlpSample> data =
      normalize_dataset(rows, config.kappa_max, input_min, input_max);

  std::vector<int> layer_sizes;
  layer_sizes.push_back(1);
  layer_sizes.insert(layer_sizes.end(), config.hidden.begin(), config.hidden.end());
  layer_sizes.push_back(2);

  MlpModel model = init_mlp(layer_sizes, input_min, input_max, config.kappa_max, config.seed);

  MlpModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<Eigen::MatrixXd> grad_w;
  std::vector<Eigen::VectorXd> grad_b;

  int epoch = 0;
  for (; epoch <= config.epochs; ++epoch) {
    const double j = mlp_loss(model, data);
    if (!std::isfinite(j)) {
      throw RuntimeFault("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                         " (lower the learning rate)");
    }
    if (loss_curve) loss_curve->push_back(j);
    if (j < best_loss) {
      best_loss = j;
      best = model;
      best_epoch = epoch;
    } else if (config.patience > 0 && epoch - best_epoch >= config.patience) {
      break;
    }
    if (epoch == config.epochs) break;  // final evaluation only

    mlp_gradients(model, data, grad_w, grad_b);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      model.weights[l] -= config.learning_rate * grad_w[l];
      model.biases[l] -= config.learning_rate * grad_b[l];
    }
  }

  best.epochs_run = epoch;
  best.final_loss = best_loss;
  return best;
}

void save_mlp(const MlpModel& model, const std::filesystem::path& path) {
  model.validate();
  nlohmann::json j;
  j["layer_sizes"] = model.layer_sizes;
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    nlohmann::json wl = nlohmann::json::array();
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
        row.push_back(model.weights[l](r, c));
      }
      wl.push_back(std::move(row));
    }
    weights.push_back(std::move(wl));
    nlohmann::json bl = nlohmann::json::array();
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) bl.push_back(model.biases[l][r]);
    biases.push_back(std::move(bl));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["input_scale"] = {{"min", model.input_min}, {"max", model.input_max}};
  j["output_scale"] = {{"kappa_max", model.kappa_max}};
  j["training"] = {{"seed", model.seed},
                   {"epochs", model.epochs_run},
                   {"final_loss", model.final_loss}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + path.string());
  out << j.dump(2) << "\n";
}

MlpModel load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + ": " + e.what());
  }

  MlpModel m;
  try {
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& wl : j.at("weights")) {
      Eigen::MatrixXd w(wl.size(), wl.empty() ? 0 : wl[0].size());
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = wl[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
      }
      m.weights.push_back(std::move(w));
    }
    for (const auto& bl : j.at("biases")) {
      Eigen::VectorXd b(bl.size());
      for (Eigen::Index r = 0; r < b.size(); ++r) {
        b[r] = bl[static_cast<std::size_t>(r)].get<double>();
      }
      m.biases.push_back(std::move(b));
    }
    m.input_min = j.at("input_scale").at("min").get<double>();
    m.input_max = j.at("input_scale").at("max").get<double>();
    m.kappa_max = j.at("output_scale").at("kappa_max").get<double>();
    if (j.contains("training")) {
      m.seed = j["training"].value("seed", 0u);
      m.epochs_run = j["training"].value("epochs", 0);
      m.final_loss = j["training"].value("final_loss", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

RunResult predict_and_filter(const MlpModel& model, double r_o, const Scenario& base,
                             const SimOptions& options) {
  const Eigen::Vector2d pred = mlp_predict(model, r_o);
  const Scenario sc = with_params(base, r_o, CbfParams{pred[0], pred[1]});
  sc.check_safe_start();
  return simulate(sc, options);
}

}  // namespace cbfsim
