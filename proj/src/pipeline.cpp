#include "latentlens/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "latentlens/error.hpp"
#include "latentlens/imgcodec.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_text(path, out);
}

ImageSample load_pgm_or_png_exists(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::IncompleteRun, "missing " + p.string());
  return {};
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.dataset_name = j.value("dataset_name", c.dataset_name);
    c.seed = j.value("seed", c.seed);
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      const std::string kind = d.value("kind", "shapes");
      if (kind == "shapes") {
        c.dataset.kind = DatasetSource::Kind::Shapes;
        c.dataset.count = d.value("count", c.dataset.count);
        c.dataset.side = d.value("side", c.dataset.side);
      } else if (kind == "idx") {
        c.dataset.kind = DatasetSource::Kind::Idx;
        c.dataset.images_path = resolve(d.at("images").get<std::string>(), base_dir);
        c.dataset.labels_path = resolve(d.value("labels", ""), base_dir);
        c.dataset.limit = d.value("limit", std::size_t{0});
      } else {
        throw Error(ErrorCode::InvalidArgument, "dataset.kind must be shapes or idx");
      }
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      if (t.contains("variants")) {
        c.variants.clear();
        for (const auto& v : t["variants"]) c.variants.push_back(parse_variant(v.get<std::string>()));
      }
      c.epochs = t.value("epochs", c.epochs);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.learning_rate = t.value("learning_rate", c.learning_rate);
      c.hidden_sizes = t.value("hidden_sizes", c.hidden_sizes);
      c.latent_dim = t.value("latent_dim", c.latent_dim);
      c.beta_vae_beta = t.value("beta_vae_beta", c.beta_vae_beta);
      c.beta_tcvae_beta = t.value("beta_tcvae_beta", c.beta_tcvae_beta);
    }
    if (j.contains("traversal")) {
      const auto& t = j["traversal"];
      c.traversal.low = t.value("low", c.traversal.low);
      c.traversal.high = t.value("high", c.traversal.high);
      c.traversal.step = t.value("step", c.traversal.step);
      c.traversal.resample_per_dim = t.value("resample_per_dim", c.traversal.resample_per_dim);
      c.separator_px = t.value("separator_px", c.separator_px);
    }
    if (j.contains("explainer")) {
      const auto& e = j["explainer"];
      c.explainer.backend = parse_backend(e.value("backend", "heuristic"));
      c.explainer.endpoint = e.value("endpoint", "");
      c.explainer.model_name = e.value("model_name", "");
      c.explainer.temperature = e.value("temperature", 1.0);
      c.explainer.top_p = e.value("top_p", 1.0);
      c.explainer.samples_n = e.value("samples_n", 5);
      c.explainer.timeout_s = e.value("timeout_s", 60.0);
      c.explainer.max_retries = e.value("max_retries", 4);
      c.explainer.max_in_flight = e.value("max_in_flight", 4);
      c.scenarios_path = resolve(e.value("scenarios", ""), base_dir);
      c.prompt_template = e.value("prompt_template", "");
    }
    if (j.contains("similarity")) {
      const auto& s = j["similarity"];
      c.similarity_kind = parse_similarity_kind(s.value("kind", "cosine_embedding"));
      c.embedding_provider = s.value("provider", "local");
      c.embedding_endpoint = s.value("endpoint", "");
      c.embedding_model = s.value("model", "");
    }
    if (j.contains("epsilon")) {
      const auto& e = j["epsilon"];
      if (e.is_string() && e.get<std::string>() == "calibrate") {
        c.epsilon.reset();
        c.calibration_annotations = resolve(j.at("calibration").at("annotations"), base_dir);
      } else {
        c.epsilon = e.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad run config: ") + e.what());
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json d;
  if (dataset.kind == DatasetSource::Kind::Shapes) {
    d = {{"kind", "shapes"}, {"count", dataset.count}, {"side", dataset.side}};
  } else {
    d = {{"kind", "idx"}, {"images", dataset.images_path}, {"labels", dataset.labels_path},
         {"limit", dataset.limit}};
  }
  std::vector<std::string> vs;
  for (auto v : variants) vs.emplace_back(latentlens::to_string(v));
  json j = {
      {"dataset_name", dataset_name},
      {"dataset", d},
      {"seed", seed},
      {"training",
       {{"variants", vs}, {"epochs", epochs}, {"batch_size", batch_size},
        {"learning_rate", learning_rate}, {"hidden_sizes", hidden_sizes}, {"latent_dim", latent_dim},
        {"beta_vae_beta", beta_vae_beta}, {"beta_tcvae_beta", beta_tcvae_beta}}},
      {"traversal",
       {{"low", traversal.low}, {"high", traversal.high}, {"step", traversal.step},
        {"resample_per_dim", traversal.resample_per_dim}, {"separator_px", separator_px}}},
      {"explainer",
       {{"backend", latentlens::to_string(explainer.backend)}, {"endpoint", explainer.endpoint},
        {"model_name", explainer.model_name}, {"temperature", explainer.temperature},
        {"top_p", explainer.top_p}, {"samples_n", explainer.samples_n},
        {"timeout_s", explainer.timeout_s}, {"max_retries", explainer.max_retries},
        {"max_in_flight", explainer.max_in_flight}, {"scenarios", scenarios_path},
        {"prompt_template", prompt_template}}},
      {"similarity",
       {{"kind", latentlens::to_string(similarity_kind)}, {"provider", embedding_provider},
        {"endpoint", embedding_endpoint}, {"model", embedding_model}}},
  };
  if (epsilon) {
    j["epsilon"] = *epsilon;
  } else {
    j["epsilon"] = "calibrate";
    j["calibration"] = {{"annotations", calibration_annotations}};
  }
  return j;
}

void RunConfig::validate() const {
  if (epsilon.has_value() == !calibration_annotations.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "set either an explicit epsilon or a calibration annotations file, not both");
  }
  if (dataset.kind == DatasetSource::Kind::Idx && dataset.images_path.empty()) {
    throw Error(ErrorCode::InvalidArgument, "idx dataset needs an images path");
  }
  if (dataset.kind == DatasetSource::Kind::Shapes && (dataset.count == 0 || dataset.side < 16)) {
    throw Error(ErrorCode::InvalidArgument, "shapes dataset needs count >= 1 and side >= 16");
  }
  if (variants.empty() || latent_dim < 1 || epochs < 0 || batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid training section");
  }
  if (embedding_provider != "local" && embedding_provider != "remote") {
    throw Error(ErrorCode::InvalidArgument, "similarity.provider must be local or remote");
  }
  explainer.validate();
}

TrainingConfig RunConfig::training_config(VaeVariant v) const {
  TrainingConfig t;
  t.variant = v;
  t.beta = v == VaeVariant::BetaVae ? beta_vae_beta
           : v == VaeVariant::BetaTcvae ? beta_tcvae_beta
                                        : 1.0;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.seed = seed;
  t.hidden_sizes = hidden_sizes;
  t.latent_dim = latent_dim;
  return t;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j, fs::absolute(path).parent_path());
}

ImageDataset load_dataset(const RunConfig& config) {
  if (config.dataset.kind == DatasetSource::Kind::Shapes) {
    return generate_shapes_dataset(config.dataset.count, config.dataset.side,
                                   derive_seed(config.seed, 77));
  }
  ImageDataset ds = load_idx_images(read_file_bytes(config.dataset.images_path));
  if (!config.dataset.labels_path.empty()) {
    ds.labels = load_idx_labels(read_file_bytes(config.dataset.labels_path));
  }
  if (config.dataset.limit > 0 && ds.size() > config.dataset.limit) {
    ds.samples.resize(config.dataset.limit);
    if (ds.labels) ds.labels->resize(config.dataset.limit);
  }
  ds.validate();
  return ds;
}

std::vector<AnnotationRecord> load_annotations(const fs::path& path) {
  std::vector<AnnotationRecord> out;
  for (const auto& j : read_jsonl(path)) {
    AnnotationRecord a;
    try {
      a.sequence_id = j.at("sequence_id").get<std::string>();
      a.label = j.at("label").get<int>();
      a.references = j.value("references", std::vector<std::string>{});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    if (a.label != 0 && a.label != 1) {
      throw Error(ErrorCode::InvalidArgument, "annotation label must be 0 or 1");
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const RunConfig* config,
                    const json& extra) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json m = {{"command", command}, {"finished_at", stamp}, {"version", kVersion}};
  if (config != nullptr) {
    m["seed"] = config->seed;
    m["config"] = config->to_json();
  }
  if (!extra.is_null()) m["details"] = extra;
  const fs::path p = out_dir / "manifest.json";
  json all = json::object();
  if (fs::exists(p)) {
    try {
      all = json::parse(read_text(p));
    } catch (const json::parse_error&) {
      all = json::object();
    }
  }
  all[command] = m;
  write_text(p, all.dump(2) + "\n");
}

void cmd_train(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  const ImageDataset ds = load_dataset(config);
  fs::create_directories(out_dir / "params");
  json timings = json::object();
  for (VaeVariant v : config.variants) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(ds, config.training_config(v));
    timings[to_string(v)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file((out_dir / "params" / (std::string(to_string(v)) + ".tvae")).string(),
               save_params(r.params));
    std::string csv =
        "epoch,loss,reconstruction,kl_analytic,mutual_info_est,total_correlation_est,"
        "dimwise_kl_est\n";
    for (std::size_t e = 0; e < r.history.size(); ++e) {
      const auto& h = r.history[e];
      csv += std::to_string(e + 1) + "," + fmt("%.10g", h.loss) + "," +
             fmt("%.10g", h.terms.reconstruction) + "," + fmt("%.10g", h.terms.kl_analytic) + "," +
             fmt("%.10g", h.terms.mutual_info_est) + "," +
             fmt("%.10g", h.terms.total_correlation_est) + "," +
             fmt("%.10g", h.terms.dimwise_kl_est) + "\n";
    }
    write_text(out_dir / ("history_" + std::string(to_string(v)) + ".csv"), csv);
  }
  write_text(out_dir / "config.json", config.to_json().dump(2) + "\n");
  write_manifest(out_dir, "train", &config, {{"train_seconds", timings}});
}

namespace {

VaeParameters load_variant_params(const fs::path& out_dir, VaeVariant v) {
  const fs::path p = out_dir / "params" / (std::string(to_string(v)) + ".tvae");
  if (!fs::exists(p)) {
    throw Error(ErrorCode::IncompleteRun, "missing " + p.string() + "; run train first");
  }
  return load_params(read_file_bytes(p.string()));
}

struct StripFiles {
  std::string png;
  std::string pgm;
};

StripFiles write_strip(const fs::path& out_dir, const TraversalSequence& seq, int separator_px) {
  const ImageSample strip = compose_strip(seq, separator_px);
  StripFiles f{"strips/" + seq.sequence_id + ".png", "strips/" + seq.sequence_id + ".pgm"};
  fs::create_directories(out_dir / "strips");
  write_file((out_dir / f.png).string(), encode_png(strip).bytes);
  write_file((out_dir / f.pgm).string(), encode_pgm(strip).bytes);
  return f;
}

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
  if (config.embedding_provider == "remote") {
    RetryPolicy policy = config.explainer.retry;
    policy.max_retries = config.explainer.max_retries;
    return std::make_unique<RemoteEmbeddingProvider>(
        config.embedding_endpoint.empty() ? config.explainer.endpoint : config.embedding_endpoint,
        config.embedding_model, config.explainer.timeout_s, policy);
  }
  return std::make_unique<LocalTfidfEmbedder>();
}

double epsilon_for(const RunConfig& config, const fs::path& out_dir) {
  if (config.epsilon) return *config.epsilon;
  const fs::path p = out_dir / "calibration.json";
  if (fs::exists(p)) {
    const json j = json::parse(read_text(p));
    return j.at(to_string(config.similarity_kind)).at("epsilon").get<double>();
  }
  return kDefaultEpsilon;
}

}  // namespace

void cmd_traverse(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  std::vector<json> meta;
  for (VaeVariant v : config.variants) {
    const VaeParameters params = load_variant_params(out_dir, v);
    for (const auto& seq : generate_grid(params, config.seed, to_string(v), config.traversal)) {
      const StripFiles f = write_strip(out_dir, seq, config.separator_px);
      meta.push_back(sequence_metadata(seq, {f.png, f.pgm}));
    }
  }
  write_jsonl(out_dir / "sequences.jsonl", meta);
  write_manifest(out_dir, "traverse", &config);
}

ExplainSummary cmd_explain(const RunConfig& config, const fs::path& out_dir, Sleeper sleeper) {
  config.validate();
  std::vector<ScriptedScenario> scenarios;
  if (config.explainer.backend == Backend::Scripted) {
    if (config.scenarios_path.empty()) {
      throw Error(ErrorCode::InvalidArgument, "scripted backend needs explainer.scenarios");
    }
    scenarios = parse_scenarios(json::parse(read_text(config.scenarios_path)));
  }
  auto explainer = make_explainer(config.explainer, scenarios, sleeper);
  const PromptTemplate tmpl = config.prompt_template.empty()
                                  ? PromptTemplate::default_template()
                                  : PromptTemplate{config.prompt_template};
  tmpl.validate();
  auto provider = make_provider(config);
  const double epsilon = epsilon_for(config, out_dir);

  std::vector<json> meta, certainty_rows, selection_rows, failures;
  json timings = json::object();
  ExplainSummary summary;
  std::size_t ordinal = 0;
  fs::create_directories(out_dir / "responses");
  for (VaeVariant v : config.variants) {
    const VaeParameters params = load_variant_params(out_dir, v);
    for (const auto& seq : generate_grid(params, config.seed, to_string(v), config.traversal)) {
      const StripFiles f = write_strip(out_dir, seq, config.separator_px);
      meta.push_back(sequence_metadata(seq, {f.png, f.pgm}));
      json rec = {{"sequence_id", seq.sequence_id},
                  {"model", to_string(v)},
                  {"dim_index", seq.spec.dim_index},
                  {"strip", f.png},
                  {"similarity_kind", to_string(config.similarity_kind)},
                  {"epsilon", epsilon}};
      ++summary.sequences;
      try {
        const Prompt prompt = build_prompt(tmpl, seq, config.separator_px);
        ExplainRequest req{&seq, &prompt, ordinal, derive_seed(config.seed, 5000 + ordinal)};
        ResponseSet rs = explainer->explain(req);
        rs.sequence_id = seq.sequence_id;
        rs.validate();
        timings[seq.sequence_id] = {{"elapsed_s", rs.elapsed_s}, {"attempts", rs.attempts}};

        std::vector<json> lines;
        for (std::size_t i = 0; i < rs.responses.size(); ++i) {
          lines.push_back({{"sequence_id", seq.sequence_id},
                           {"index", i},
                           {"backend", rs.backend_label},
                           {"prompt", prompt.text},
                           {"response", rs.responses[i]}});
        }
        write_jsonl(out_dir / "responses" / (seq.sequence_id + ".jsonl"), lines);

        const CertaintyReport lexical = certainty(rs, SimilarityKind::LexicalRougeL);
        const CertaintyReport cosine_r =
            certainty(rs, SimilarityKind::CosineEmbedding, provider.get());
        const CertaintyReport& chosen =
            config.similarity_kind == SimilarityKind::LexicalRougeL ? lexical : cosine_r;
        const std::string displayed = select_explanation(chosen, rs, epsilon);
        if (displayed != kNoClearExplanation) ++summary.displayed;
        rec["status"] = "ok";
        rec["scores"] = {{to_string(SimilarityKind::LexicalRougeL), lexical.certainty},
                         {to_string(SimilarityKind::CosineEmbedding), cosine_r.certainty}};
        rec["certainty"] = chosen.certainty;
        rec["selected_index"] = chosen.selected_index;
        rec["selected"] = rs.responses[static_cast<std::size_t>(chosen.selected_index)];
        rec["displayed"] = displayed;
        rec["report"] = to_json(chosen);
        selection_rows.push_back({{"sequence_id", seq.sequence_id},
                                  {"dataset", config.dataset_name},
                                  {"vae_variant", to_string(v)},
                                  {"backend", explainer->label()},
                                  {"certainty", chosen.certainty},
                                  {"explanation", rec["selected"]},
                                  {"displayed", displayed}});
      } catch (const Error& e) {
        ++summary.failures;
        rec["status"] = "error";
        rec["error"] = e.what();
        failures.push_back({{"sequence_id", seq.sequence_id}, {"error", e.what()}});
      }
      certainty_rows.push_back(std::move(rec));
      ++ordinal;
    }
  }
  write_jsonl(out_dir / "sequences.jsonl", meta);
  write_jsonl(out_dir / "certainty.jsonl", certainty_rows);
  write_jsonl(out_dir / "selections.jsonl", selection_rows);
  write_text(out_dir / "failures.json", json(failures).dump(2) + "\n");
  write_manifest(out_dir, "explain", &config, {{"timings", timings}});
  return summary;
}

std::map<SimilarityKind, CalibrationResult> cmd_calibrate(const fs::path& annotations_path,
                                                          const fs::path& scores_path,
                                                          const fs::path& out_dir) {
  std::map<std::string, int> labels;
  for (const auto& a : load_annotations(annotations_path)) labels[a.sequence_id] = a.label;
  std::map<SimilarityKind, std::vector<LabeledScore>> joined;
  for (const auto& row : read_jsonl(scores_path)) {
    if (row.value("status", "ok") != "ok") continue;
    const std::string id = row.at("sequence_id").get<std::string>();
    const auto it = labels.find(id);
    if (it == labels.end()) continue;
    if (row.contains("scores")) {
      for (const auto& [kind, value] : row["scores"].items()) {
        joined[parse_similarity_kind(kind)].push_back({id, value.get<double>(), it->second});
      }
    } else {
      const auto kind = parse_similarity_kind(row.value("similarity_kind", "cosine_embedding"));
      joined[kind].push_back({id, row.at("certainty").get<double>(), it->second});
    }
  }
  if (joined.empty()) {
    throw Error(ErrorCode::NoOverlap, "no scored sequence has an annotation label");
  }
  std::map<SimilarityKind, CalibrationResult> results;
  std::string csv = calibration_csv_header();
  json out = json::object();
  for (const auto& [kind, scores] : joined) {
    const CalibrationResult r = calibrate_threshold(scores);
    results[kind] = r;
    const std::string name =
        kind == SimilarityKind::LexicalRougeL ? "lexical similarity" : "cosine similarity";
    csv += calibration_csv_row(name, r);
    out[to_string(kind)] = {{"epsilon", r.epsilon},
                            {"auc", r.auc},
                            {"f1", r.f1},
                            {"precision", r.precision},
                            {"recall", r.recall},
                            {"threshold_candidates_evaluated", r.threshold_candidates_evaluated},
                            {"labeled_sequences", scores.size()}};
  }
  write_text(out_dir / "calibration.csv", csv);
  write_text(out_dir / "calibration.json", out.dump(2) + "\n");
  return results;
}

void cmd_select(const fs::path& out_dir, double epsilon) {
  const fs::path cpath = out_dir / "certainty.jsonl";
  if (!fs::exists(cpath)) throw Error(ErrorCode::IncompleteRun, "missing certainty.jsonl");
  std::vector<json> rows = read_jsonl(cpath);
  std::map<std::string, json> previous;
  const fs::path spath = out_dir / "selections.jsonl";
  if (fs::exists(spath)) {
    for (auto& s : read_jsonl(spath)) previous[s.at("sequence_id").get<std::string>()] = s;
  }
  std::vector<json> selections;
  for (auto& row : rows) {
    row["epsilon"] = epsilon;
    if (row.value("status", "ok") != "ok") continue;
    const std::string displayed = row.at("certainty").get<double>() >= epsilon
                                      ? row.at("selected").get<std::string>()
                                      : std::string(kNoClearExplanation);
    row["displayed"] = displayed;
    json s = previous.count(row["sequence_id"]) ? previous[row["sequence_id"]] : json::object();
    s["sequence_id"] = row["sequence_id"];
    s["certainty"] = row["certainty"];
    s["explanation"] = row["selected"];
    s["displayed"] = displayed;
    selections.push_back(std::move(s));
  }
  write_jsonl(cpath, rows);
  write_jsonl(spath, selections);
}

std::vector<TableRow> cmd_evaluate(const std::vector<fs::path>& explanation_paths,
                                   const fs::path& annotations_path, TokenEmbedder& embedder,
                                   const fs::path& metrics_csv_path) {
  std::map<std::string, std::vector<std::string>> refs;
  for (const auto& a : load_annotations(annotations_path)) {
    if (!a.references.empty()) refs[a.sequence_id] = a.references;
  }
  std::vector<ExplanationRecord> records;
  for (const auto& p : explanation_paths) {
    for (const auto& j : read_jsonl(p)) {
      ExplanationRecord r;
      r.sequence_id = j.at("sequence_id").get<std::string>();
      r.dataset = j.value("dataset", "");
      r.vae_variant = j.value("vae_variant", "");
      r.backend = j.value("backend", "");
      r.text = j.contains("explanation") ? j["explanation"].get<std::string>()
                                         : j.at("text").get<std::string>();
      records.push_back(std::move(r));
    }
  }
  std::vector<TableRow> rows = evaluate_table(records, refs, embedder);
  write_text(metrics_csv_path, metrics_csv(rows));
  return rows;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string markdown_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "";
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += "\n";
  };
  line(rows.front());
  out += "|";
  for (std::size_t i = 0; i < rows.front().size(); ++i) out += " --- |";
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) line(rows[r]);
  return out;
}

}  // namespace

std::string cmd_report(const fs::path& run_dir) {
  const fs::path cpath = run_dir / "certainty.jsonl";
  if (!fs::exists(cpath)) {
    throw Error(ErrorCode::IncompleteRun, "missing certainty.jsonl; run explain first");
  }
  const std::vector<json> rows = read_jsonl(cpath);
  if (rows.empty()) throw Error(ErrorCode::IncompleteRun, "certainty.jsonl has no records");

  std::string md = "# Latent variable explanations\n\n";
  std::string current_model;
  for (const auto& r : rows) {
    const std::string model = r.at("model").get<std::string>();
    if (model != current_model) {
      md += "## Model: " + model + "\n\n";
      current_model = model;
    }
    const int dim = r.at("dim_index").get<int>();
    const std::string strip = r.at("strip").get<std::string>();
    load_pgm_or_png_exists(run_dir / strip);
    md += "### **z" + std::to_string(dim + 1) + "** (" + r.at("sequence_id").get<std::string>() +
          ")\n\n";
    md += "![traversal of z" + std::to_string(dim + 1) + "](" + strip + ")\n\n";
    if (r.value("status", "ok") != "ok") {
      md += "- status: error\n- error: " + r.value("error", "") + "\n\n";
      continue;
    }
    md += "- certainty (" + r.at("similarity_kind").get<std::string>() +
          "): " + fmt("%.4f", r.at("certainty").get<double>()) + "\n";
    md += "- threshold: " + fmt("%.4f", r.at("epsilon").get<double>()) + "\n\n";
    md += "> " + r.at("displayed").get<std::string>() + "\n\n";
  }
  if (fs::exists(run_dir / "calibration.csv")) {
    md += "## Threshold calibration\n\n" +
          markdown_table(parse_csv(read_text(run_dir / "calibration.csv"))) + "\n";
  }
  if (fs::exists(run_dir / "metrics.csv")) {
    md += "## Explanation quality\n\n" +
          markdown_table(parse_csv(read_text(run_dir / "metrics.csv"))) + "\n";
  }
  write_text(run_dir / "report.md", md);
  return md;
}

}  // namespace latentlens
