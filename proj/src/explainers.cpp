#include "latentlens/explainers.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

void replace_all(std::string& s, const std::string& needle, const std::string& value) {
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + value.size())) {
    s.replace(pos, needle.size(), value);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

PromptTemplate PromptTemplate::default_template() {
  return {"This row shows {k} images decoded while one latent variable increases from {low} to "
          "{high}, left to right. What is the latent variable, and how does it change across the "
          "images?"};
}

void PromptTemplate::validate() const {
  if (count_occurrences(text, "{k}") != 1) {
    throw Error(ErrorCode::InvalidArgument, "prompt template must contain {k} exactly once");
  }
}

Prompt build_prompt(const PromptTemplate& tmpl, const TraversalSequence& sequence,
                    int separator_px) {
  tmpl.validate();
  Prompt p;
  p.text = tmpl.text;
  replace_all(p.text, "{k}", std::to_string(sequence.frames.size()));
  replace_all(p.text, "{low}", format_number(sequence.spec.low));
  replace_all(p.text, "{high}", format_number(sequence.spec.high));
  p.image = encode_png(compose_strip(sequence, separator_px));
  return p;
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::Remote: return "remote";
    case Backend::Scripted: return "scripted";
    case Backend::Heuristic: return "heuristic";
  }
  return "unknown";
}

Backend parse_backend(const std::string& name) {
  if (name == "remote") return Backend::Remote;
  if (name == "scripted") return Backend::Scripted;
  if (name == "heuristic") return Backend::Heuristic;
  throw Error(ErrorCode::InvalidArgument, "unknown explainer backend '" + name + "'");
}

void ExplainerConfig::validate() const {
  if (samples_n < 2) throw Error(ErrorCode::InvalidArgument, "samples_n must be >= 2");
  if (timeout_s <= 0.0 || max_retries < 0 || max_in_flight < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid timeout, retry or concurrency setting");
  }
  if (backend == Backend::Remote && (endpoint.empty() || model_name.empty())) {
    throw Error(ErrorCode::InvalidArgument, "remote backend needs endpoint and model_name");
  }
}

void ResponseSet::validate() const {
  for (const auto& r : responses) {
    if (trim(r).empty()) throw Error(ErrorCode::MalformedResponse, "empty response text");
  }
}

void ScriptedScenario::validate() const {
  if (on_topic_pool.empty() || off_topic_pool.empty()) {
    throw Error(ErrorCode::InvalidArgument, "scenario pools must be nonempty");
  }
  if (!(noise_p >= 0.0 && noise_p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "noise_p must lie in [0,1]");
  }
}

std::vector<ScriptedScenario> parse_scenarios(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "scenario file must be a JSON list");
  std::vector<ScriptedScenario> out;
  try {
    for (const auto& e : j) {
      ScriptedScenario s;
      s.scenario_id = e.at("scenario_id").get<std::string>();
      s.on_topic_pool = e.at("on_topic_pool").get<std::vector<std::string>>();
      s.off_topic_pool = e.at("off_topic_pool").get<std::vector<std::string>>();
      s.noise_p = e.at("noise_p").get<double>();
      s.validate();
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad scenario entry: ") + e.what());
  }
  return out;
}

nlohmann::json scenarios_to_json(const std::vector<ScriptedScenario>& scenarios) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : scenarios) {
    j.push_back({{"scenario_id", s.scenario_id},
                 {"on_topic_pool", s.on_topic_pool},
                 {"off_topic_pool", s.off_topic_pool},
                 {"noise_p", s.noise_p}});
  }
  return j;
}

ResponseSet scripted_respond(const ScriptedScenario& scenario, std::uint64_t seed, int n) {
  scenario.validate();
  SplitMix64 rng(seed);
  ResponseSet rs;
  rs.backend_label = "scripted:" + scenario.scenario_id;
  for (int i = 0; i < n; ++i) {
    const bool off = rng.uniform() < scenario.noise_p;
    const auto& pool = off ? scenario.off_topic_pool : scenario.on_topic_pool;
    rs.responses.push_back(pool[rng.below(pool.size())]);
    rs.elapsed_s.push_back(0.0);
    rs.attempts.push_back(1);
  }
  return rs;
}

const char* to_string(HeuristicFinding::Statistic s) {
  using S = HeuristicFinding::Statistic;
  switch (s) {
    case S::HorizontalPosition: return "horizontal_position";
    case S::VerticalPosition: return "vertical_position";
    case S::Size: return "size";
    case S::Brightness: return "brightness";
    case S::None: return "none";
  }
  return "none";
}

namespace {

// Statistics whose range stays below this are treated as constant so that
// rounding-level jitter is not amplified by range normalization. All
// statistics are fractions of the image extent or intensity in [0,1].
constexpr double kConstantRange = 1e-3;
constexpr double kMinNormalizedSlope = 0.05;
// A higher-priority statistic wins when within this factor of the best.
constexpr double kPriorityTolerance = 0.9;

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx == 0.0 ? 0.0 : sxy / sxx;
}

}  // namespace

HeuristicFinding heuristic_analyze(const TraversalSequence& sequence) {
  if (sequence.frames.size() < 2 || sequence.frames.size() != sequence.assigned_values.size()) {
    throw Error(ErrorCode::InvalidArgument, "heuristic needs >= 2 frames with assigned values");
  }
  constexpr int kStats = 4;
  std::vector<std::vector<double>> stats(kStats);
  for (const auto& f : sequence.frames) {
    double mass = 0.0, sx = 0.0, sy = 0.0, area = 0.0;
    for (int r = 0; r < f.height; ++r) {
      for (int c = 0; c < f.width; ++c) {
        const double v = f.at(r, c);
        mass += v;
        sx += v * (c + 0.5);
        sy += v * (r + 0.5);
        if (v > 0.5) area += 1.0;
      }
    }
    const double pixels = static_cast<double>(f.size());
    stats[0].push_back(mass > 0.0 ? sx / mass / f.width : 0.5);
    stats[1].push_back(mass > 0.0 ? sy / mass / f.height : 0.5);
    stats[2].push_back(area / pixels);
    stats[3].push_back(mass / pixels);
  }

  HeuristicFinding out;
  for (const auto& s : stats) {
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double range = *hi - *lo;
    if (range < kConstantRange) {
      out.normalized_slopes.push_back(0.0);
    } else {
      out.normalized_slopes.push_back(least_squares_slope(sequence.assigned_values, s) /
                                      (range + 1e-9));
    }
  }
  double best = 0.0;
  for (double v : out.normalized_slopes) best = std::max(best, std::abs(v));
  if (best < kMinNormalizedSlope) return out;
  // Earlier statistics take precedence when close to the best; area and mean
  // intensity move together when a shape grows.
  for (int i = 0; i < kStats; ++i) {
    if (std::abs(out.normalized_slopes[i]) >= kPriorityTolerance * best) {
      out.statistic = static_cast<HeuristicFinding::Statistic>(i);
      out.normalized_slope = out.normalized_slopes[i];
      break;
    }
  }
  return out;
}

ResponseSet heuristic_explain(const TraversalSequence& sequence, int n) {
  using S = HeuristicFinding::Statistic;
  const HeuristicFinding f = heuristic_analyze(sequence);
  const bool up = f.normalized_slope > 0.0;
  std::vector<std::string> templates;
  // A detected trend is reported with near-identical wording so that the
  // response set is self-consistent; no trend yields deliberately divergent
  // guesses, which the certainty gate then suppresses.
  auto phrased = [&templates](const std::string& what, const std::string& change) {
    templates = {"The latent variable controls " + what + ": " + change + ".",
                 "The latent variable controls the " + what + ": " + change + ".",
                 "This latent variable controls " + what + ": " + change + "."};
  };
  switch (f.statistic) {
    case S::HorizontalPosition:
      phrased("horizontal position",
              std::string("the object moves from ") + (up ? "left to right" : "right to left"));
      break;
    case S::VerticalPosition:
      phrased("vertical position",
              std::string("the object moves from ") + (up ? "top to bottom" : "bottom to top"));
      break;
    case S::Size:
      phrased("size",
              std::string("the object goes from ") + (up ? "smaller to larger" : "larger to smaller"));
      break;
    case S::Brightness:
      phrased("brightness",
              std::string("the image goes from ") + (up ? "darker to brighter" : "brighter to darker"));
      break;
    case S::None:
      templates = {"There is no consistent change across the images.",
                   "Perhaps the shape rotates slightly, but it is hard to tell.",
                   "The frames look almost the same; any variation is subtle."};
      break;
  }
  ResponseSet rs;
  rs.sequence_id = sequence.sequence_id;
  rs.backend_label = "heuristic";
  for (int i = 0; i < n; ++i) {
    rs.responses.push_back(templates[static_cast<std::size_t>(i) % templates.size()]);
    rs.elapsed_s.push_back(0.0);
    rs.attempts.push_back(1);
  }
  return rs;
}

nlohmann::json chat_request_body(const ExplainerConfig& config, const Prompt& prompt) {
  const std::string url = "data:image/png;base64," + base64_encode(prompt.image.bytes);
  return {{"model", config.model_name},
          {"temperature", config.temperature},
          {"top_p", config.top_p},
          {"messages",
           nlohmann::json::array(
               {{{"role", "user"},
                 {"content",
                  nlohmann::json::array({{{"type", "text"}, {"text", prompt.text}},
                                         {{"type", "image_url"}, {"image_url", {{"url", url}}}}})}}})}};
}

std::string extract_message_content(const nlohmann::json& response) {
  const auto* content = [&]() -> const nlohmann::json* {
    if (!response.is_object() || !response.contains("choices")) return nullptr;
    const auto& choices = response["choices"];
    if (!choices.is_array() || choices.empty() || !choices[0].is_object()) return nullptr;
    const auto& msg = choices[0].value("message", nlohmann::json());
    if (!msg.is_object() || !msg.contains("content")) return nullptr;
    return &choices[0]["message"]["content"];
  }();
  if (content == nullptr) {
    throw Error(ErrorCode::MalformedResponse, "response has no choices[0].message.content");
  }
  std::string text;
  if (content->is_string()) {
    text = content->get<std::string>();
  } else if (content->is_array()) {
    // Some providers return content parts.
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
          part["text"].is_string()) {
        text += part["text"].get<std::string>();
      }
    }
  }
  if (trim(text).empty()) {
    throw Error(ErrorCode::MalformedResponse, "message content is empty");
  }
  return text;
}

ResponseSet sample_responses(const ExplainerConfig& config, const Prompt& prompt,
                             const std::string& sequence_id, std::uint64_t seed,
                             Sleeper sleeper) {
  config.validate();
  RetryPolicy policy = config.retry;
  policy.max_retries = config.max_retries;
  const JsonHttpClient client(config.endpoint, api_key_from_env(), config.timeout_s, policy,
                              std::move(sleeper));
  const nlohmann::json body = chat_request_body(config, prompt);
  const auto n = static_cast<std::size_t>(config.samples_n);

  ResponseSet rs;
  rs.sequence_id = sequence_id;
  rs.backend_label = "remote:" + config.model_name;
  rs.responses.resize(n);
  rs.elapsed_s.resize(n);
  rs.attempts.resize(n);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::size_t first_error_index = n;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const HttpCallResult r =
            client.post_json("/chat/completions", body, derive_seed(seed, i));
        rs.responses[i] = extract_message_content(r.body);
        rs.attempts[i] = r.attempts;
      } catch (...) {
        std::lock_guard lock(err_mu);
        // Report the lowest-index failure so errors are order-deterministic.
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
      rs.elapsed_s[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(config.max_in_flight));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return rs;
}

namespace {

class RemoteExplainer final : public Explainer {
 public:
  RemoteExplainer(ExplainerConfig config, Sleeper sleeper)
      : config_(std::move(config)), sleeper_(std::move(sleeper)) {}

  ResponseSet explain(const ExplainRequest& req) override {
    return sample_responses(config_, *req.prompt, req.sequence->sequence_id, req.seed, sleeper_);
  }
  std::string label() const override { return "remote:" + config_.model_name; }

 private:
  ExplainerConfig config_;
  Sleeper sleeper_;
};

class ScriptedExplainer final : public Explainer {
 public:
  ScriptedExplainer(int n, std::vector<ScriptedScenario> scenarios)
      : n_(n), scenarios_(std::move(scenarios)) {
    if (scenarios_.empty()) throw Error(ErrorCode::InvalidArgument, "scripted backend needs scenarios");
    for (const auto& s : scenarios_) s.validate();
  }

  ResponseSet explain(const ExplainRequest& req) override {
    ResponseSet rs = scripted_respond(scenarios_[req.ordinal % scenarios_.size()], req.seed, n_);
    rs.sequence_id = req.sequence->sequence_id;
    return rs;
  }
  std::string label() const override { return "scripted"; }

 private:
  int n_;
  std::vector<ScriptedScenario> scenarios_;
};

class HeuristicExplainer final : public Explainer {
 public:
  explicit HeuristicExplainer(int n) : n_(n) {}
  ResponseSet explain(const ExplainRequest& req) override {
    return heuristic_explain(*req.sequence, n_);
  }
  std::string label() const override { return "heuristic"; }

 private:
  int n_;
};

}  // namespace

std::unique_ptr<Explainer> make_explainer(const ExplainerConfig& config,
                                          std::vector<ScriptedScenario> scenarios,
                                          Sleeper sleeper) {
  config.validate();
  switch (config.backend) {
    case Backend::Remote: return std::make_unique<RemoteExplainer>(config, std::move(sleeper));
    case Backend::Scripted:
      return std::make_unique<ScriptedExplainer>(config.samples_n, std::move(scenarios));
    case Backend::Heuristic: return std::make_unique<HeuristicExplainer>(config.samples_n);
  }
  return nullptr;
}

}  // namespace latentlens
