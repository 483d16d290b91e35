#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentlens/dataset.hpp"

namespace latentlens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LatentVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

struct AffineLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
};

// Encoder: input -> hidden... -> 2M (mean head rows [0,M), log-variance rows
// [M,2M)). Decoder: M -> reversed hidden... -> input, sigmoid output. Hidden
// layers use tanh.
struct VaeParameters {
  std::vector<AffineLayer> encoder;
  std::vector<AffineLayer> decoder;
  int latent_dim = 0;
  int input_dim = 0;

  std::size_t parameter_count() const;
  void validate() const;
};

constexpr double kLogVarClamp = 10.0;

struct GaussianPosterior {
  std::vector<double> mean;
  std::vector<double> log_variance;

  GaussianPosterior() = default;
  // Clamps log_variance to [-10, 10].
  GaussianPosterior(std::vector<double> mean, std::vector<double> log_variance);
};

enum class VaeVariant { Vae, BetaVae, BetaTcvae };

const char* to_string(VaeVariant v);
VaeVariant parse_variant(const std::string& name);

struct TrainingConfig {
  VaeVariant variant = VaeVariant::Vae;
  double beta = 1.0;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::vector<int> hidden_sizes = {256, 128};
  int latent_dim = 6;

  // beta as used by the loss: forced to 1 for the plain VAE.
  double effective_beta() const { return variant == VaeVariant::Vae ? 1.0 : beta; }
};

struct LossTerms {
  double reconstruction = 0.0;  // Bernoulli NLL, nats/sample
  double kl_analytic = 0.0;
  double mutual_info_est = 0.0;
  double total_correlation_est = 0.0;
  double dimwise_kl_est = 0.0;
};

VaeParameters init_params(int input_dim, int latent_dim, std::span<const int> hidden_sizes,
                          std::uint64_t seed);

GaussianPosterior encode(const VaeParameters& params, const ImageSample& image);
LatentVector reparameterize(const GaussianPosterior& posterior, std::span<const double> noise);
ImageSample decode(const VaeParameters& params, const LatentVector& z);

double kl_diag_gaussian(const GaussianPosterior& posterior);

double loss(VaeVariant variant, const LossTerms& terms, double beta);

// Batch inputs are columns of `inputs` (input_dim x B); `noise` is M x B.
Matrix stack_columns(const ImageDataset& dataset, std::span<const std::size_t> indices);
Matrix standard_normal_noise(int latent_dim, int batch, std::uint64_t seed);

// Reconstruction and analytic KL plus the total-correlation decomposition of
// the KL term estimated on the batch. The aggregate posterior is estimated by
// minibatch stratified sampling over the same batch, with `dataset_size` the
// population size the batch was drawn from.
LossTerms decomposition_estimates(const VaeParameters& params, const Matrix& inputs,
                                  const Matrix& noise, std::size_t dataset_size);
LossTerms decomposition_estimates(const VaeParameters& params, const Matrix& inputs,
                                  std::size_t dataset_size, std::uint64_t seed);

struct Gradients {
  std::vector<AffineLayer> encoder;
  std::vector<AffineLayer> decoder;
};

struct LossAndGradient {
  LossTerms terms;
  double loss = 0.0;
  Gradients grad;
};

// Exact gradient of the batch-mean loss for `config.variant`, using the given
// noise for the pathwise (reparameterized) samples.
LossAndGradient loss_and_gradient(const VaeParameters& params, const Matrix& inputs,
                                  const Matrix& noise, const TrainingConfig& config,
                                  std::size_t dataset_size);
Gradients gradient(const VaeParameters& params, const Matrix& inputs, const Matrix& noise,
                   const TrainingConfig& config, std::size_t dataset_size);

struct EpochRecord {
  LossTerms terms;
  double loss = 0.0;
};

struct TrainResult {
  VaeParameters params;
  std::vector<EpochRecord> history;
};

// Adam (0.9, 0.999, 1e-8) over seeded minibatches.
TrainResult train(const ImageDataset& dataset, const TrainingConfig& config);

std::vector<std::uint8_t> save_params(const VaeParameters& params);
VaeParameters load_params(std::span<const std::uint8_t> bytes);

}  // namespace latentlens
