#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentlens/calibration.hpp"
#include "latentlens/explainers.hpp"
#include "latentlens/similarity.hpp"
#include "latentlens/tinyvae.hpp"
#include "latentlens/traversal.hpp"

namespace latentlens {

namespace fs = std::filesystem;

struct DatasetSource {
  enum class Kind { Shapes, Idx };
  Kind kind = Kind::Shapes;
  std::size_t count = 512;  // shapes
  int side = 64;            // shapes
  std::string images_path;  // idx
  std::string labels_path;  // idx, optional
  std::size_t limit = 0;    // idx; 0 keeps every image
};

struct RunConfig {
  std::string dataset_name = "shapes";
  DatasetSource dataset;

  std::vector<VaeVariant> variants = {VaeVariant::Vae, VaeVariant::BetaVae, VaeVariant::BetaTcvae};
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::vector<int> hidden_sizes = {256, 128};
  int latent_dim = 6;
  double beta_vae_beta = 4.0;
  double beta_tcvae_beta = 6.0;

  GridOptions traversal;
  int separator_px = 2;

  ExplainerConfig explainer;
  std::string scenarios_path;
  std::string prompt_template;  // empty selects the default

  SimilarityKind similarity_kind = SimilarityKind::CosineEmbedding;
  std::string embedding_provider = "local";  // local | remote
  std::string embedding_endpoint;
  std::string embedding_model;

  // Exactly one of these is set.
  std::optional<double> epsilon = kDefaultEpsilon;
  std::string calibration_annotations;

  std::uint64_t seed = 0;

  // Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  nlohmann::json to_json() const;
  void validate() const;

  TrainingConfig training_config(VaeVariant v) const;
};

RunConfig load_run_config(const fs::path& path);

ImageDataset load_dataset(const RunConfig& config);

struct AnnotationRecord {
  std::string sequence_id;
  int label = 0;
  std::vector<std::string> references;
};

std::vector<AnnotationRecord> load_annotations(const fs::path& path);

// Writes params/<variant>.tvae and history_<variant>.csv.
void cmd_train(const RunConfig& config, const fs::path& out_dir);

// Writes strips/<sequence_id>.{png,pgm} and sequences.jsonl.
void cmd_traverse(const RunConfig& config, const fs::path& out_dir);

struct ExplainSummary {
  std::size_t sequences = 0;
  std::size_t failures = 0;
  std::size_t displayed = 0;
};

// Per sequence: strip, n responses, certainty under both similarity kinds,
// selection with the configured kind. Backend failures are recorded and do
// not stop the run.
ExplainSummary cmd_explain(const RunConfig& config, const fs::path& out_dir, Sleeper sleeper = {});

// Joins labels to certainties and writes calibration.csv (one row per
// similarity kind present) and calibration.json.
std::map<SimilarityKind, CalibrationResult> cmd_calibrate(const fs::path& annotations_path,
                                                          const fs::path& scores_path,
                                                          const fs::path& out_dir);

// Re-applies the selection rule to certainty.jsonl with `epsilon`.
void cmd_select(const fs::path& out_dir, double epsilon);

std::vector<TableRow> cmd_evaluate(const std::vector<fs::path>& explanation_paths,
                                   const fs::path& annotations_path, TokenEmbedder& embedder,
                                   const fs::path& metrics_csv_path);

// Renders report.md from a complete run directory.
std::string cmd_report(const fs::path& run_dir);

// Records the command, wall-clock times and timings; the only file in a
// run directory that carries timestamps.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const RunConfig* config, const nlohmann::json& extra = {});

std::vector<nlohmann::json> read_jsonl(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace latentlens
