// latent-lens: train -> traverse -> explain -> calibrate -> select -> evaluate -> report
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>

#include "latentlens/error.hpp"
#include "latentlens/pipeline.hpp"

namespace ll = latentlens;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Run configuration (JSON)");
  cmd->add_option("--out", args.out, "Run directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "Override the configured seed");
}

ll::RunConfig resolve_config(const CommonArgs& args) {
  ll::RunConfig config;
  if (!args.config.empty()) {
    config = ll::load_run_config(args.config);
  } else if (fs::exists(fs::path(args.out) / "config.json")) {
    config = ll::load_run_config(fs::path(args.out) / "config.json");
  }
  if (args.seed) config.seed = *args.seed;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explain VAE latent variables from traversal strips, with certainty gating"};
  app.require_subcommand(1);

  CommonArgs train_args, traverse_args, explain_args, calibrate_args, select_args, evaluate_args,
      report_args;

  auto* train = app.add_subcommand("train", "Train vae, beta_vae and beta_tcvae");
  add_common(train, train_args);

  auto* traverse = app.add_subcommand("traverse", "Decode latent traversals into strips");
  add_common(traverse, traverse_args);

  auto* explain = app.add_subcommand("explain", "Sample explanations, score certainty, select");
  add_common(explain, explain_args);

  auto* calibrate = app.add_subcommand("calibrate", "Fit the display threshold from labels");
  add_common(calibrate, calibrate_args);
  std::string annotations_path, scores_path;
  calibrate->add_option("--annotations", annotations_path, "Labeled sequences (JSONL)");
  calibrate->add_option("--scores", scores_path, "Certainty records (default: <out>/certainty.jsonl)");

  auto* select = app.add_subcommand("select", "Re-apply the display threshold");
  add_common(select, select_args);
  std::optional<double> epsilon;
  select->add_option("--epsilon", epsilon, "Threshold (default: calibrated, else configured)");

  auto* evaluate = app.add_subcommand("evaluate", "Score explanations against references");
  add_common(evaluate, evaluate_args);
  std::vector<std::string> explanation_paths;
  std::string eval_annotations, provider = "local", metrics_out;
  evaluate->add_option("--explanations", explanation_paths,
                       "Explanation JSONL files (default: <out>/selections.jsonl)");
  evaluate->add_option("--annotations", eval_annotations, "Reference explanations (JSONL)")
      ->required();
  evaluate->add_option("--provider", provider, "Token similarity: local or remote")
      ->check(CLI::IsMember({"local", "remote"}))
      ->capture_default_str();
  evaluate->add_option("--metrics-out", metrics_out, "CSV path (default: <out>/metrics.csv)");

  auto* report = app.add_subcommand("report", "Render report.md from a run directory");
  add_common(report, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto config = resolve_config(train_args);
      ll::cmd_train(config, train_args.out);
      std::cout << "trained " << config.variants.size() << " models into " << train_args.out
                << "\n";
    } else if (traverse->parsed()) {
      ll::cmd_traverse(resolve_config(traverse_args), traverse_args.out);
      std::cout << "wrote strips to " << (fs::path(traverse_args.out) / "strips").string() << "\n";
    } else if (explain->parsed()) {
      const auto s = ll::cmd_explain(resolve_config(explain_args), explain_args.out);
      std::cout << s.sequences << " sequences, " << s.displayed << " displayed, " << s.failures
                << " failed\n";
      if (s.failures > 0) return 3;
    } else if (calibrate->parsed()) {
      const fs::path out = calibrate_args.out;
      if (annotations_path.empty()) {
        const auto config = resolve_config(calibrate_args);
        annotations_path = config.calibration_annotations;
      }
      if (annotations_path.empty()) {
        throw ll::Error(ll::ErrorCode::InvalidArgument, "--annotations is required");
      }
      if (scores_path.empty()) scores_path = (out / "certainty.jsonl").string();
      for (const auto& [kind, r] : ll::cmd_calibrate(annotations_path, scores_path, out)) {
        std::printf("%-17s AUC %.4f  F1 %.4f  epsilon %.4f\n", ll::to_string(kind), r.auc, r.f1,
                    r.epsilon);
      }
    } else if (select->parsed()) {
      const fs::path out = select_args.out;
      double eps = ll::kDefaultEpsilon;
      if (epsilon) {
        eps = *epsilon;
      } else {
        const auto config = resolve_config(select_args);
        if (fs::exists(out / "calibration.json")) {
          const auto j = nlohmann::json::parse(ll::read_text(out / "calibration.json"));
          eps = j.at(ll::to_string(config.similarity_kind)).at("epsilon").get<double>();
        } else if (config.epsilon) {
          eps = *config.epsilon;
        }
      }
      ll::cmd_select(out, eps);
      std::printf("selection applied with epsilon %.4f\n", eps);
    } else if (evaluate->parsed()) {
      const fs::path out = evaluate_args.out;
      std::vector<fs::path> paths(explanation_paths.begin(), explanation_paths.end());
      if (paths.empty()) paths.push_back(out / "selections.jsonl");
      if (metrics_out.empty()) metrics_out = (out / "metrics.csv").string();
      std::unique_ptr<ll::TokenEmbedder> embedder;
      std::unique_ptr<ll::EmbeddingProvider> remote;
      if (provider == "remote") {
        const auto config = resolve_config(evaluate_args);
        ll::RetryPolicy policy = config.explainer.retry;
        policy.max_retries = config.explainer.max_retries;
        remote = std::make_unique<ll::RemoteEmbeddingProvider>(
            config.embedding_endpoint.empty() ? config.explainer.endpoint
                                              : config.embedding_endpoint,
            config.embedding_model, config.explainer.timeout_s, policy);
        embedder = std::make_unique<ll::ProviderTokenEmbedder>(*remote);
      } else {
        embedder = std::make_unique<ll::HashedTokenEmbedder>();
      }
      const auto rows = ll::cmd_evaluate(paths, eval_annotations, *embedder, metrics_out);
      std::cout << rows.size() << " rows written to " << metrics_out << "\n";
    } else if (report->parsed()) {
      ll::cmd_report(report_args.out);
      std::cout << "wrote " << (fs::path(report_args.out) / "report.md").string() << "\n";
    }
  } catch (const ll::Error& e) {
    std::cerr << "latent-lens: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "latent-lens: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
