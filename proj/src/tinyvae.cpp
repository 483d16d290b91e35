#include "latentlens/tinyvae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::DimensionMismatch, what);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sum(exp(v))) skipping -inf entries.
double logsumexp(const double* v, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, v[i]);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

struct MlpTrace {
  std::vector<Matrix> acts;  // acts[l] is the input to layer l
  Matrix output;             // pre-activation of the final layer
};

MlpTrace forward_mlp(const std::vector<AffineLayer>& layers, const Matrix& input) {
  MlpTrace t;
  t.acts.reserve(layers.size());
  t.acts.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix a = layers[l].weight * t.acts.back();
    a.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) {
      t.acts.push_back(a.array().tanh().matrix());
    } else {
      t.output = std::move(a);
    }
  }
  return t;
}

// Backpropagates d(loss)/d(output) through the MLP; returns d(loss)/d(input).
Matrix backward_mlp(const std::vector<AffineLayer>& layers, const MlpTrace& t, Matrix d_out,
                    std::vector<AffineLayer>& grads) {
  grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weight = d_out * t.acts[l].transpose();
    grads[l].bias = d_out.rowwise().sum();
    Matrix d_in = layers[l].weight.transpose() * d_out;
    if (l > 0) {
      d_out = (d_in.array() * (1.0 - t.acts[l].array().square())).matrix();
    } else {
      return d_in;
    }
  }
  return {};
}

struct Forward {
  MlpTrace enc;
  MlpTrace dec;
  Matrix mean;        // M x B
  Matrix log_var;     // clamped
  Matrix clamp_pass;  // 1 where the raw log-variance was inside the clamp
  Matrix sigma;
  Matrix z;
};

Forward forward(const VaeParameters& params, const Matrix& inputs, const Matrix& noise) {
  const int m = params.latent_dim;
  require(inputs.rows() == params.input_dim, "input rows differ from input_dim");
  require(noise.rows() == m && noise.cols() == inputs.cols(), "noise must be M x B");
  Forward f;
  f.enc = forward_mlp(params.encoder, inputs);
  f.mean = f.enc.output.topRows(m);
  const Matrix raw = f.enc.output.bottomRows(m);
  f.log_var = raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  f.clamp_pass = raw.unaryExpr([](double v) { return std::abs(v) <= kLogVarClamp ? 1.0 : 0.0; });
  f.sigma = (0.5 * f.log_var.array()).exp().matrix();
  f.z = f.mean + f.sigma.cwiseProduct(noise);
  f.dec = forward_mlp(params.decoder, f.z);
  return f;
}

double bernoulli_nll(const Matrix& logits, const Matrix& targets) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double a = logits(r, c);
      total += softplus(a) - targets(r, c) * a;
    }
  }
  return total;
}

double kl_sum(const Matrix& mean, const Matrix& log_var) {
  return 0.5 * (mean.array().square() + log_var.array().exp() - 1.0 - log_var.array()).sum();
}

// Stratified-sampling estimate of the KL decomposition and, optionally, the
// gradient of  mean_i[log q(z_i|x_i) - log p(z_i) + c*(log q(z_i) - log prod_d q(z_id))]
// with respect to z, mean and log-variance.
struct Decomposition {
  double mi = 0.0;
  double tc = 0.0;
  double dwkl = 0.0;
  Matrix d_z, d_mean, d_log_var;
};

Decomposition decompose(const Matrix& z, const Matrix& mean, const Matrix& log_var,
                        std::size_t dataset_size, double tc_extra_weight, bool with_grad) {
  const Eigen::Index m = z.rows();
  const Eigen::Index b = z.cols();
  if (b < 2) throw Error(ErrorCode::BatchTooSmall, "decomposition needs at least 2 samples");
  const double d = static_cast<double>(std::max<std::size_t>(dataset_size, 1));
  const double lw_self = -std::log(d);
  const double lw_other = d > 1.0 ? std::log((d - 1.0) / (d * static_cast<double>(b - 1)))
                                  : -std::numeric_limits<double>::infinity();
  const Matrix inv_var = (-log_var.array()).exp().matrix();

  // lg(j, d) for fixed i, stored per i while looping.
  Matrix lg(b, m);
  std::vector<double> scratch(static_cast<std::size_t>(b));
  Decomposition out;
  if (with_grad) {
    out.d_z = Matrix::Zero(m, b);
    out.d_mean = Matrix::Zero(m, b);
    out.d_log_var = Matrix::Zero(m, b);
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  Vector joint(b);
  Matrix marg_soft(b, m);

  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      for (Eigen::Index k = 0; k < m; ++k) {
        const double diff = z(k, i) - mean(k, j);
        lg(j, k) = -kHalfLog2Pi - 0.5 * log_var(k, j) - 0.5 * diff * diff * inv_var(k, j);
      }
    }
    double log_qzx = 0.0;
    double log_pz = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      log_qzx += lg(i, k);
      log_pz += -kHalfLog2Pi - 0.5 * z(k, i) * z(k, i);
    }
    for (Eigen::Index j = 0; j < b; ++j) {
      joint(j) = lg.row(j).sum() + (j == i ? lw_self : lw_other);
    }
    const double log_qz = logsumexp(joint.data(), static_cast<std::size_t>(b));
    double log_prod = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index j = 0; j < b; ++j) {
        scratch[static_cast<std::size_t>(j)] = lg(j, k) + (j == i ? lw_self : lw_other);
      }
      const double lse = logsumexp(scratch.data(), scratch.size());
      log_prod += lse;
      if (with_grad) {
        for (Eigen::Index j = 0; j < b; ++j) {
          marg_soft(j, k) = std::exp(scratch[static_cast<std::size_t>(j)] - lse);
        }
      }
    }
    out.mi += log_qzx - log_qz;
    out.tc += log_qz - log_prod;
    out.dwkl += log_prod - log_pz;

    if (!with_grad) continue;
    out.d_z(Eigen::all, i) += inv_b * z.col(i);  // from -log p(z_i)
    for (Eigen::Index j = 0; j < b; ++j) {
      const double joint_soft = std::exp(joint(j) - log_qz);
      for (Eigen::Index k = 0; k < m; ++k) {
        const double g = inv_b * ((i == j ? 1.0 : 0.0) +
                                  tc_extra_weight * (joint_soft - marg_soft(j, k)));
        if (g == 0.0) continue;
        const double diff = z(k, i) - mean(k, j);
        const double scaled = diff * inv_var(k, j);
        out.d_z(k, i) -= g * scaled;
        out.d_mean(k, j) += g * scaled;
        out.d_log_var(k, j) += g * (-0.5 + 0.5 * diff * scaled);
      }
    }
  }
  out.mi *= inv_b;
  out.tc *= inv_b;
  out.dwkl *= inv_b;
  return out;
}

}  // namespace

const char* to_string(VaeVariant v) {
  switch (v) {
    case VaeVariant::Vae: return "vae";
    case VaeVariant::BetaVae: return "beta_vae";
    case VaeVariant::BetaTcvae: return "beta_tcvae";
  }
  return "unknown";
}

VaeVariant parse_variant(const std::string& name) {
  if (name == "vae") return VaeVariant::Vae;
  if (name == "beta_vae") return VaeVariant::BetaVae;
  if (name == "beta_tcvae") return VaeVariant::BetaTcvae;
  throw Error(ErrorCode::InvalidArgument, "unknown VAE variant '" + name + "'");
}

std::size_t VaeParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto* side : {&encoder, &decoder}) {
    for (const auto& l : *side) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

void VaeParameters::validate() const {
  if (encoder.empty() || decoder.empty() || latent_dim <= 0 || input_dim <= 0) {
    throw Error(ErrorCode::InvalidArgument, "incomplete VAE parameters");
  }
  require(encoder.front().in() == input_dim, "encoder input differs from input_dim");
  require(encoder.back().out() == 2 * latent_dim, "encoder output must be 2*latent_dim");
  require(decoder.front().in() == latent_dim, "decoder input differs from latent_dim");
  require(decoder.back().out() == input_dim, "decoder output differs from input_dim");
  for (const auto* side : {&encoder, &decoder}) {
    for (std::size_t l = 0; l < side->size(); ++l) {
      const auto& layer = (*side)[l];
      require(layer.bias.size() == layer.out(), "bias length differs from layer output");
      if (l > 0) require((*side)[l - 1].out() == layer.in(), "adjacent layer sizes differ");
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "non-finite parameter entry");
      }
    }
  }
}

GaussianPosterior::GaussianPosterior(std::vector<double> mean_in, std::vector<double> log_var_in)
    : mean(std::move(mean_in)), log_variance(std::move(log_var_in)) {
  if (mean.size() != log_variance.size()) {
    throw Error(ErrorCode::DimensionMismatch, "posterior mean and log-variance lengths differ");
  }
  for (double& v : log_variance) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
}

VaeParameters init_params(int input_dim, int latent_dim, std::span<const int> hidden_sizes,
                          std::uint64_t seed) {
  if (input_dim <= 0 || latent_dim <= 0) {
    throw Error(ErrorCode::InvalidArgument, "dimensions must be positive");
  }
  SplitMix64 rng(seed);
  auto make = [&rng](int in, int out) {
    AffineLayer l;
    l.weight.resize(out, in);
    const double limit = std::sqrt(6.0 / (in + out));
    // Row-major fill order keeps the draw sequence independent of storage order.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    }
    l.bias = Vector::Zero(out);
    return l;
  };
  VaeParameters p;
  p.input_dim = input_dim;
  p.latent_dim = latent_dim;
  int prev = input_dim;
  for (int h : hidden_sizes) {
    p.encoder.push_back(make(prev, h));
    prev = h;
  }
  p.encoder.push_back(make(prev, 2 * latent_dim));
  prev = latent_dim;
  for (auto it = hidden_sizes.rbegin(); it != hidden_sizes.rend(); ++it) {
    p.decoder.push_back(make(prev, *it));
    prev = *it;
  }
  p.decoder.push_back(make(prev, input_dim));
  return p;
}

GaussianPosterior encode(const VaeParameters& params, const ImageSample& image) {
  require(static_cast<int>(image.size()) == params.input_dim, "image size differs from input_dim");
  const Matrix x = Eigen::Map<const Vector>(image.pixels.data(), params.input_dim);
  const Matrix out = forward_mlp(params.encoder, x).output;
  const int m = params.latent_dim;
  std::vector<double> mean(m), log_var(m);
  for (int k = 0; k < m; ++k) {
    mean[k] = out(k, 0);
    log_var[k] = out(m + k, 0);
  }
  return {std::move(mean), std::move(log_var)};
}

LatentVector reparameterize(const GaussianPosterior& posterior, std::span<const double> noise) {
  require(noise.size() == posterior.mean.size(), "noise length differs from latent dimension");
  LatentVector z;
  z.values.resize(noise.size());
  for (std::size_t k = 0; k < noise.size(); ++k) {
    z.values[k] = posterior.mean[k] + std::exp(0.5 * posterior.log_variance[k]) * noise[k];
  }
  return z;
}

ImageSample decode(const VaeParameters& params, const LatentVector& z) {
  require(static_cast<int>(z.size()) == params.latent_dim, "latent length differs from latent_dim");
  const Matrix zin = Eigen::Map<const Vector>(z.values.data(), params.latent_dim);
  const Matrix logits = forward_mlp(params.decoder, zin).output;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(params.input_dim))));
  ImageSample img;
  if (side * side == params.input_dim) {
    img = ImageSample(side, side);
  } else {
    img = ImageSample(1, params.input_dim);
  }
  for (int p = 0; p < params.input_dim; ++p) img.pixels[p] = sigmoid(logits(p, 0));
  return img;
}

double kl_diag_gaussian(const GaussianPosterior& posterior) {
  double kl = 0.0;
  for (std::size_t k = 0; k < posterior.mean.size(); ++k) {
    const double lv = posterior.log_variance[k];
    const double mu = posterior.mean[k];
    kl += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
  }
  return std::max(kl, 0.0);
}

double loss(VaeVariant variant, const LossTerms& t, double beta) {
  switch (variant) {
    case VaeVariant::Vae: return t.reconstruction + t.kl_analytic;
    case VaeVariant::BetaVae: return t.reconstruction + beta * t.kl_analytic;
    case VaeVariant::BetaTcvae:
      return t.reconstruction + t.mutual_info_est + beta * t.total_correlation_est +
             t.dimwise_kl_est;
  }
  return 0.0;
}

Matrix stack_columns(const ImageDataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  const auto n = static_cast<Eigen::Index>(dataset.samples.at(indices[0]).size());
  Matrix x(n, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto& s = dataset.samples.at(indices[c]);
    require(static_cast<Eigen::Index>(s.size()) == n, "batch mixes image sizes");
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(s.pixels.data(), n);
  }
  return x;
}

Matrix standard_normal_noise(int latent_dim, int batch, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix e(latent_dim, batch);
  for (int c = 0; c < batch; ++c) {
    for (int r = 0; r < latent_dim; ++r) e(r, c) = rng.normal();
  }
  return e;
}

LossTerms decomposition_estimates(const VaeParameters& params, const Matrix& inputs,
                                  const Matrix& noise, std::size_t dataset_size) {
  if (inputs.cols() < 2) throw Error(ErrorCode::BatchTooSmall, "batch needs at least 2 samples");
  const Forward f = forward(params, inputs, noise);
  const double inv_b = 1.0 / static_cast<double>(inputs.cols());
  LossTerms t;
  t.reconstruction = bernoulli_nll(f.dec.output, inputs) * inv_b;
  t.kl_analytic = kl_sum(f.mean, f.log_var) * inv_b;
  const Decomposition d = decompose(f.z, f.mean, f.log_var, dataset_size, 0.0, false);
  t.mutual_info_est = d.mi;
  t.total_correlation_est = d.tc;
  t.dimwise_kl_est = d.dwkl;
  return t;
}

LossTerms decomposition_estimates(const VaeParameters& params, const Matrix& inputs,
                                  std::size_t dataset_size, std::uint64_t seed) {
  const Matrix noise =
      standard_normal_noise(params.latent_dim, static_cast<int>(inputs.cols()), seed);
  return decomposition_estimates(params, inputs, noise, dataset_size);
}

LossAndGradient loss_and_gradient(const VaeParameters& params, const Matrix& inputs,
                                  const Matrix& noise, const TrainingConfig& config,
                                  std::size_t dataset_size) {
  if (inputs.cols() < 1) throw Error(ErrorCode::InvalidArgument, "empty batch");
  const Forward f = forward(params, inputs, noise);
  const double inv_b = 1.0 / static_cast<double>(inputs.cols());
  const double beta = config.effective_beta();

  LossAndGradient out;
  out.terms.reconstruction = bernoulli_nll(f.dec.output, inputs) * inv_b;
  out.terms.kl_analytic = kl_sum(f.mean, f.log_var) * inv_b;

  Matrix d_mean, d_log_var, d_z;
  if (config.variant == VaeVariant::BetaTcvae) {
    Decomposition d = decompose(f.z, f.mean, f.log_var, dataset_size, beta - 1.0, true);
    out.terms.mutual_info_est = d.mi;
    out.terms.total_correlation_est = d.tc;
    out.terms.dimwise_kl_est = d.dwkl;
    d_mean = std::move(d.d_mean);
    d_log_var = std::move(d.d_log_var);
    d_z = std::move(d.d_z);
  } else {
    if (inputs.cols() >= 2) {
      const Decomposition d = decompose(f.z, f.mean, f.log_var, dataset_size, 0.0, false);
      out.terms.mutual_info_est = d.mi;
      out.terms.total_correlation_est = d.tc;
      out.terms.dimwise_kl_est = d.dwkl;
    }
    d_mean = (beta * inv_b) * f.mean;
    d_log_var = ((beta * inv_b * 0.5) * (f.log_var.array().exp() - 1.0)).matrix();
    d_z = Matrix::Zero(f.z.rows(), f.z.cols());
  }
  out.loss = loss(config.variant, out.terms, beta);

  // Reconstruction: d/dlogits of softplus(a) - x*a is sigmoid(a) - x.
  const Matrix d_logits =
      (f.dec.output.unaryExpr([](double a) { return sigmoid(a); }) - inputs) * inv_b;
  d_z += backward_mlp(params.decoder, f.dec, d_logits, out.grad.decoder);

  // z = mean + exp(0.5 lv) * eps
  d_mean += d_z;
  d_log_var += (d_z.array() * noise.array() * 0.5 * f.sigma.array()).matrix();
  d_log_var = d_log_var.cwiseProduct(f.clamp_pass);

  Matrix d_enc_out(2 * params.latent_dim, inputs.cols());
  d_enc_out.topRows(params.latent_dim) = d_mean;
  d_enc_out.bottomRows(params.latent_dim) = d_log_var;
  backward_mlp(params.encoder, f.enc, std::move(d_enc_out), out.grad.encoder);
  return out;
}

Gradients gradient(const VaeParameters& params, const Matrix& inputs, const Matrix& noise,
                   const TrainingConfig& config, std::size_t dataset_size) {
  return loss_and_gradient(params, inputs, noise, config, dataset_size).grad;
}

namespace {

struct AdamState {
  std::vector<AffineLayer> m_enc, v_enc, m_dec, v_dec;
  long step = 0;
};

std::vector<AffineLayer> zeros_like(const std::vector<AffineLayer>& layers) {
  std::vector<AffineLayer> z;
  for (const auto& l : layers) {
    z.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return z;
}

void adam_update(std::vector<AffineLayer>& params, const std::vector<AffineLayer>& grads,
                 std::vector<AffineLayer>& m, std::vector<AffineLayer>& v, double lr, long step) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  auto apply = [&](auto& p, const auto& g, auto& mm, auto& vv) {
    mm = b1 * mm + (1.0 - b1) * g;
    vv = (b2 * vv.array() + (1.0 - b2) * g.array().square()).matrix();
    p.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    apply(params[l].weight, grads[l].weight, m[l].weight, v[l].weight);
    apply(params[l].bias, grads[l].bias, m[l].bias, v[l].bias);
  }
}

}  // namespace

TrainResult train(const ImageDataset& dataset, const TrainingConfig& config) {
  if (dataset.samples.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  if (config.epochs < 0 || config.batch_size <= 0 || config.learning_rate <= 0.0 ||
      config.beta <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
  }
  const int input_dim = static_cast<int>(dataset.samples.front().size());
  TrainResult result;
  result.params = init_params(input_dim, config.latent_dim, config.hidden_sizes,
                              derive_seed(config.seed, 0));
  AdamState adam{zeros_like(result.params.encoder), zeros_like(result.params.encoder),
                 zeros_like(result.params.decoder), zeros_like(result.params.decoder)};
  const std::size_t n = dataset.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto batches = minibatches(n, batch, derive_seed(config.seed, 1000 + epoch));
    // A trailing single-sample batch is folded into its predecessor; the
    // decomposition estimators need pairs.
    if (batches.size() > 1 && batches.back().size() == 1) {
      batches[batches.size() - 2].push_back(batches.back().front());
      batches.pop_back();
    }
    EpochRecord rec;
    std::size_t seen = 0;
    for (const auto& idx : batches) {
      const Matrix x = stack_columns(dataset, idx);
      ++adam.step;
      const Matrix noise = standard_normal_noise(
          config.latent_dim, static_cast<int>(idx.size()),
          derive_seed(config.seed, 1'000'000 + static_cast<std::uint64_t>(adam.step)));
      const LossAndGradient lg = loss_and_gradient(result.params, x, noise, config, n);
      const double w = static_cast<double>(idx.size());
      rec.terms.reconstruction += w * lg.terms.reconstruction;
      rec.terms.kl_analytic += w * lg.terms.kl_analytic;
      rec.terms.mutual_info_est += w * lg.terms.mutual_info_est;
      rec.terms.total_correlation_est += w * lg.terms.total_correlation_est;
      rec.terms.dimwise_kl_est += w * lg.terms.dimwise_kl_est;
      rec.loss += w * lg.loss;
      seen += idx.size();
      adam_update(result.params.encoder, lg.grad.encoder, adam.m_enc, adam.v_enc,
                  config.learning_rate, adam.step);
      adam_update(result.params.decoder, lg.grad.decoder, adam.m_dec, adam.v_dec,
                  config.learning_rate, adam.step);
    }
    const double inv = 1.0 / static_cast<double>(seen);
    rec.terms.reconstruction *= inv;
    rec.terms.kl_analytic *= inv;
    rec.terms.mutual_info_est *= inv;
    rec.terms.total_correlation_est *= inv;
    rec.terms.dimwise_kl_est *= inv;
    rec.loss *= inv;
    result.history.push_back(rec);
  }
  return result;
}

namespace {

constexpr char kParamMagic[] = "TVAEPRM1";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::TruncatedPayload, "parameter payload ends early");
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 8;
};

}  // namespace

// Each affine layer is stored as an out x (in+1) matrix with the bias in the
// last column; encoder layers come first and the decoder mirrors them, so the
// split point is half the layer count.
std::vector<std::uint8_t> save_params(const VaeParameters& params) {
  params.validate();
  std::vector<std::uint8_t> out(kParamMagic, kParamMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(params.encoder.size() + params.decoder.size()));
  for (const auto* side : {&params.encoder, &params.decoder}) {
    for (const auto& l : *side) {
      put_u32(out, static_cast<std::uint32_t>(l.out()));
      put_u32(out, static_cast<std::uint32_t>(l.in() + 1));
      for (int r = 0; r < l.out(); ++r) {
        for (int c = 0; c < l.in(); ++c) put_f64(out, l.weight(r, c));
        put_f64(out, l.bias(r));
      }
    }
  }
  return out;
}

VaeParameters load_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kParamMagic, 7) != 0) {
    throw Error(ErrorCode::BadHeader, "not a TVAEPRM parameter file");
  }
  if (bytes[7] != static_cast<std::uint8_t>(kParamMagic[7])) {
    throw Error(ErrorCode::VersionMismatch,
                std::string("unsupported parameter format version '") +
                    static_cast<char>(bytes[7]) + "'");
  }
  Reader rd(bytes);
  const std::uint32_t count = rd.u32();
  if (count < 2 || count % 2 != 0) {
    throw Error(ErrorCode::BadHeader, "layer count must be a positive even number");
  }
  VaeParameters p;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = rd.u32();
    const std::uint32_t cols = rd.u32();
    if (rows == 0 || cols < 2) throw Error(ErrorCode::BadHeader, "degenerate layer shape");
    rd.need(static_cast<std::size_t>(rows) * cols * 8);
    AffineLayer layer{Matrix(rows, cols - 1), Vector(rows)};
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c + 1 < cols; ++c) layer.weight(r, c) = rd.f64();
      layer.bias(r) = rd.f64();
    }
    (l < count / 2 ? p.encoder : p.decoder).push_back(std::move(layer));
  }
  p.input_dim = p.encoder.front().in();
  p.latent_dim = p.decoder.front().in();
  p.validate();
  return p;
}

}  // namespace latentlens
