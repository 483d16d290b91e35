#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "latentlens/error.hpp"
#include "latentlens/tinyvae.hpp"
#include "oracles.hpp"

using namespace latentlens;

namespace {

VaeParameters zero_params(int input_dim, int latent_dim, std::vector<int> hidden) {
  VaeParameters p = init_params(input_dim, latent_dim, hidden, 1);
  for (auto* layers : {&p.encoder, &p.decoder}) {
    for (auto& l : *layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  return p;
}

ImageSample random_image(int side, std::uint64_t seed) {
  SplitMix64 g(seed);
  ImageSample img(side, side);
  for (auto& v : img.pixels) v = g.uniform();
  return img;
}

Matrix random_batch(int input_dim, int batch, std::uint64_t seed) {
  SplitMix64 g(seed);
  Matrix m(input_dim, batch);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g.uniform();
  return m;
}

}  // namespace

TEST_SUITE("tinyvae") {
  TEST_CASE("zero network encodes to the prior and decodes to one half") {
    const auto p = zero_params(16, 3, {8});
    const auto post = encode(p, random_image(4, 1));
    CHECK(post.mean == std::vector<double>(3, 0.0));
    CHECK(post.log_variance == std::vector<double>(3, 0.0));
    const auto img = decode(p, LatentVector{{0.3, -1.0, 2.0}});
    CHECK(img.height == 4);
    for (double v : img.pixels) CHECK(v == 0.5);
  }

  TEST_CASE("random networks give finite, clamped posteriors and open-interval outputs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto p = init_params(16, 4, std::vector<int>{10, 6}, seed);
      const auto img = random_image(4, seed + 1000);
      const auto post = encode(p, img);
      CHECK(post.mean.size() == 4);
      for (std::size_t j = 0; j < 4; ++j) {
        REQUIRE(std::isfinite(post.mean[j]));
        REQUIRE(std::abs(post.log_variance[j]) <= kLogVarClamp);
      }
      const auto again = encode(p, img);
      CHECK(again.mean == post.mean);
      SplitMix64 g(seed);
      LatentVector z{{3 * g.normal(), 3 * g.normal(), 3 * g.normal(), 3 * g.normal()}};
      const auto out = decode(p, z);
      for (double v : out.pixels) REQUIRE((v > 0.0 && v < 1.0));
      CHECK(decode(p, z) == out);
    }
  }

  TEST_CASE("dimension mismatches are rejected") {
    const auto p = init_params(16, 3, std::vector<int>{8}, 1);
    CHECK_THROWS_AS(encode(p, random_image(5, 1)), Error);
    CHECK_THROWS_AS(decode(p, LatentVector{{1.0}}), Error);
    GaussianPosterior post({0, 0, 0}, {0, 0, 0});
    const std::vector<double> noise{1.0};
    CHECK_THROWS_AS(reparameterize(post, noise), Error);
  }

  TEST_CASE("posterior construction clamps log-variance") {
    GaussianPosterior post({0, 0}, {-50, 50});
    CHECK(post.log_variance == std::vector<double>{-10, 10});
  }

  TEST_CASE("reparameterization") {
    GaussianPosterior post({0.5, -1.0}, {0.3, 0.7});
    const std::vector<double> zero{0, 0};
    CHECK(reparameterize(post, zero).values == post.mean);
    GaussianPosterior unit({0, 0, 0}, {0, 0, 0});
    const std::vector<double> ones{1, 1, 1};
    CHECK(reparameterize(unit, ones).values == std::vector<double>{1, 1, 1});
    GaussianPosterior wide({0, 0}, {2 * std::log(2.0), 2 * std::log(2.0)});
    const auto z = reparameterize(wide, std::vector<double>{1, 1});
    CHECK(z.values[0] == doctest::Approx(2.0).epsilon(1e-15));
  }

  TEST_CASE("closed-form KL") {
    CHECK(kl_diag_gaussian({std::vector<double>(6, 0.0), std::vector<double>(6, 0.0)}) == 0.0);
    CHECK(kl_diag_gaussian({std::vector<double>(6, 1.0), std::vector<double>(6, 0.0)}) ==
          doctest::Approx(3.0).epsilon(1e-15));
    CHECK(kl_diag_gaussian({{0.0}, {1.0}}) ==
          doctest::Approx(0.5 * (std::numbers::e - 2)).epsilon(1e-14));
    SplitMix64 g(5);
    for (int i = 0; i < 1000; ++i) {
      GaussianPosterior p({4 * g.normal(), 4 * g.normal()}, {g.uniform(-12, 12), g.uniform(-12, 12)});
      REQUIRE(kl_diag_gaussian(p) >= 0.0);
    }
  }

  TEST_CASE("loss variants") {
    LossTerms t{10, 2, 0.5, 1.0, 0.3};
    CHECK(loss(VaeVariant::Vae, t, 7.0) == 12.0);
    CHECK(loss(VaeVariant::BetaVae, t, 1.0) == loss(VaeVariant::Vae, t, 1.0));
    CHECK(loss(VaeVariant::BetaTcvae, t, 6.0) == doctest::Approx(16.8).epsilon(1e-15));
    TrainingConfig c;
    c.variant = VaeVariant::Vae;
    c.beta = 9;
    CHECK(c.effective_beta() == 1.0);
  }

  TEST_CASE("decomposition: identical factorized posteriors have no total correlation") {
    const auto p = init_params(16, 3, std::vector<int>{8}, 4);
    Matrix x = random_batch(16, 1, 9).replicate(1, 16);
    const auto t = decomposition_estimates(p, x, 512, 3);
    CHECK(std::abs(t.total_correlation_est) < 0.05);
  }

  TEST_CASE("decomposition: copied latent coordinates have positive total correlation") {
    VaeParameters p = zero_params(16, 3, {});
    REQUIRE(p.encoder.size() == 1);
    SplitMix64 g(2);
    Eigen::RowVectorXd w(16);
    for (int i = 0; i < 16; ++i) w(i) = g.uniform(-1, 1);
    for (int j = 0; j < 3; ++j) {
      p.encoder[0].weight.row(j) = w;
      p.encoder[0].bias(3 + j) = -10.0;
    }
    const auto t = decomposition_estimates(p, random_batch(16, 32, 8), 32, 1);
    CHECK(t.total_correlation_est > 0.0);
  }

  TEST_CASE("decomposition: analytic KL is the batch mean") {
    const auto p = init_params(16, 3, std::vector<int>{8}, 6);
    const Matrix x = random_batch(16, 10, 2);
    const auto t = decomposition_estimates(p, x, 100, 5);
    double kl = 0;
    for (int b = 0; b < 10; ++b) {
      ImageSample img(4, 4);
      for (int i = 0; i < 16; ++i) img.pixels[i] = x(i, b);
      kl += kl_diag_gaussian(encode(p, img));
    }
    CHECK(t.kl_analytic == doctest::Approx(kl / 10).epsilon(1e-12));
    CHECK_THROWS_AS(decomposition_estimates(p, random_batch(16, 1, 1), 10, 1), Error);
  }

  TEST_CASE("decomposition terms add up to KL when the batch is the dataset") {
    const auto ds = generate_shapes_dataset(32, 16, 3);
    std::vector<std::size_t> all(32);
    for (std::size_t i = 0; i < 32; ++i) all[i] = i;
    const Matrix x = stack_columns(ds, all);
    const auto p = init_params(256, 6, std::vector<int>{32, 16}, 12);

    // For a fixed draw the three terms telescope to the single-sample estimate
    // mean_b [log q(z_b|x_b) - log p(z_b)], computed here from encode() alone.
    const Matrix noise = standard_normal_noise(6, 32, 99);
    const auto t = decomposition_estimates(p, x, noise, 32);
    double direct = 0;
    for (std::size_t b = 0; b < 32; ++b) {
      const auto q = encode(p, ds.samples[b]);
      for (int d = 0; d < 6; ++d) {
        const double e = noise(d, static_cast<Eigen::Index>(b));
        const double z = q.mean[d] + std::exp(0.5 * q.log_variance[d]) * e;
        direct += -0.5 * q.log_variance[d] - 0.5 * e * e + 0.5 * z * z;
      }
    }
    direct /= 32;
    const double sum = t.mutual_info_est + t.total_correlation_est + t.dimwise_kl_est;
    CHECK(sum == doctest::Approx(direct).epsilon(1e-9));

    // Averaged over draws the estimate converges to the analytic KL.
    double mean_sum = 0;
    const int draws = 64;
    for (int s = 0; s < draws; ++s) {
      const auto ts = decomposition_estimates(p, x, 32, 1000 + s);
      mean_sum += ts.mutual_info_est + ts.total_correlation_est + ts.dimwise_kl_est;
    }
    CHECK(std::abs(mean_sum / draws - t.kl_analytic) < 0.1);
  }

  TEST_CASE("KL gradient vanishes for the mean-head bias at the prior") {
    VaeParameters p = zero_params(16, 2, {4});
    const Matrix x = random_batch(16, 4, 1);
    // Decoder frozen at zero: reconstruction does not depend on the encoder.
    TrainingConfig c;
    c.variant = VaeVariant::Vae;
    const Matrix noise = standard_normal_noise(2, 4, 3);
    const auto g = gradient(p, x, noise, c, 100);
    CHECK(g.encoder.back().bias.head(2).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("analytic gradients match central differences for every variant") {
    const auto p = init_params(16, 2, std::vector<int>{12, 8}, 21);
    const Matrix x = random_batch(16, 6, 4);
    const Matrix noise = standard_normal_noise(2, 6, 5);
    for (auto v : {VaeVariant::Vae, VaeVariant::BetaVae, VaeVariant::BetaTcvae}) {
      TrainingConfig c;
      c.variant = v;
      c.beta = v == VaeVariant::Vae ? 1.0 : 4.0;
      const auto r = oracle::check_gradient(p, x, noise, c, 64);
      CAPTURE(to_string(v));
      CHECK(r.parameters <= 2000);
      CHECK(r.max_rel_error < 1e-4);
    }
  }

  TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
    const auto p = init_params(16, 2, std::vector<int>{6}, 8);
    const Matrix x = random_batch(16, 5, 4);
    const Matrix noise = standard_normal_noise(2, 5, 6);
    Matrix x2(16, 10), n2(2, 10);
    x2 << x, x;
    n2 << noise, noise;
    for (auto v : {VaeVariant::Vae, VaeVariant::BetaVae}) {
      TrainingConfig c;
      c.variant = v;
      c.beta = 3.0;
      const auto a = oracle::flatten(gradient(p, x, noise, c, 100));
      const auto b = oracle::flatten(gradient(p, x2, n2, c, 100));
      double worst = 0;
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      CHECK(worst < 1e-10);
    }
  }

  TEST_CASE("training: zero epochs, determinism, improvement, beta reduction") {
    const auto ds = generate_shapes_dataset(64, 16, 5);
    TrainingConfig c;
    c.epochs = 0;
    c.hidden_sizes = {32, 16};
    c.latent_dim = 3;
    c.batch_size = 16;
    c.seed = 9;
    const auto init = init_params(256, 3, c.hidden_sizes, derive_seed(9, 0));
    const auto r0 = train(ds, c);
    CHECK(r0.history.empty());
    CHECK(save_params(r0.params) == save_params(init));

    c.epochs = 8;
    c.learning_rate = 3e-3;
    const auto r1 = train(ds, c);
    const auto r2 = train(ds, c);
    CHECK(save_params(r1.params) == save_params(r2.params));
    REQUIRE(r1.history.size() == 8);
    CHECK(r1.history.back().loss < r1.history.front().loss);

    TrainingConfig b = c;
    b.variant = VaeVariant::BetaVae;
    b.beta = 1.0;
    const auto rb = train(ds, b);
    for (std::size_t e = 0; e < 8; ++e) CHECK(rb.history[e].loss == r1.history[e].loss);
  }

  TEST_CASE("parameter files round trip and reject damage") {
    const auto p = init_params(16, 3, std::vector<int>{7, 5}, 3);
    const auto bytes = save_params(p);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "TVAEPRM1");
    const auto back = load_params(bytes);
    CHECK(save_params(back) == bytes);
    CHECK(back.latent_dim == 3);
    CHECK(back.input_dim == 16);
    for (std::size_t i = 0; i < p.encoder.size(); ++i) {
      CHECK(back.encoder[i].weight == p.encoder[i].weight);
      CHECK(back.encoder[i].bias == p.encoder[i].bias);
    }

    auto bad = bytes;
    bad[0] = 'X';
    try {
      load_params(bad);
      FAIL("expected BadHeader");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadHeader);
    }
    auto newer = bytes;
    newer[7] = '2';
    try {
      load_params(newer);
      FAIL("expected VersionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::VersionMismatch);
    }
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
    try {
      load_params(cut);
      FAIL("expected TruncatedPayload");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TruncatedPayload);
    }
  }

  TEST_CASE("variant names") {
    for (auto v : {VaeVariant::Vae, VaeVariant::BetaVae, VaeVariant::BetaTcvae}) {
      CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK_THROWS_AS(parse_variant("gan"), Error);
  }
}
