#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentlens/imgcodec.hpp"
#include "latentlens/remote.hpp"
#include "latentlens/traversal.hpp"

namespace latentlens {

// Text with exactly one "{k}" placeholder (frame count). "{low}" and
// "{high}" are optional and receive the traversal range.
struct PromptTemplate {
  std::string text;

  static PromptTemplate default_template();
  void validate() const;
};

struct Prompt {
  std::string text;
  EncodedImage image;  // PNG of the composed strip
};

Prompt build_prompt(const PromptTemplate& tmpl, const TraversalSequence& sequence,
                    int separator_px = 2);

enum class Backend { Remote, Scripted, Heuristic };

const char* to_string(Backend b);
Backend parse_backend(const std::string& name);

struct ExplainerConfig {
  Backend backend = Backend::Heuristic;
  std::string endpoint;  // remote only, e.g. https://api.openai.com/v1
  std::string model_name;
  double temperature = 1.0;
  double top_p = 1.0;
  int samples_n = 5;
  double timeout_s = 60.0;
  int max_retries = 4;
  int max_in_flight = 4;
  RetryPolicy retry;  // max_retries above overrides retry.max_retries

  void validate() const;
};

struct ResponseSet {
  std::string sequence_id;
  std::vector<std::string> responses;
  std::string backend_label;
  std::vector<double> elapsed_s;
  std::vector<int> attempts;  // per response; 1 for offline backends

  void validate() const;
};

struct ScriptedScenario {
  std::string scenario_id;
  std::vector<std::string> on_topic_pool;
  std::vector<std::string> off_topic_pool;
  double noise_p = 0.0;

  void validate() const;
};

std::vector<ScriptedScenario> parse_scenarios(const nlohmann::json& j);
nlohmann::json scenarios_to_json(const std::vector<ScriptedScenario>& scenarios);

// Each draw picks the off-topic pool with probability noise_p, then a
// uniform template from the chosen pool.
ResponseSet scripted_respond(const ScriptedScenario& scenario, std::uint64_t seed, int n);

struct HeuristicFinding {
  enum class Statistic { HorizontalPosition, VerticalPosition, Size, Brightness, None };
  Statistic statistic = Statistic::None;
  double normalized_slope = 0.0;  // signed
  std::vector<double> normalized_slopes;  // x, y, area, mean intensity
};

const char* to_string(HeuristicFinding::Statistic s);

HeuristicFinding heuristic_analyze(const TraversalSequence& sequence);

// Names the image statistic with the strongest linear trend across frames.
ResponseSet heuristic_explain(const TraversalSequence& sequence, int n);

// OpenAI-compatible chat completions; one request per sample, fanned out up
// to max_in_flight, collected in request order.
nlohmann::json chat_request_body(const ExplainerConfig& config, const Prompt& prompt);
std::string extract_message_content(const nlohmann::json& response);

ResponseSet sample_responses(const ExplainerConfig& config, const Prompt& prompt,
                             const std::string& sequence_id, std::uint64_t seed,
                             Sleeper sleeper = {});

struct ExplainRequest {
  const TraversalSequence* sequence = nullptr;
  const Prompt* prompt = nullptr;
  std::size_t ordinal = 0;  // position of the sequence in the run
  std::uint64_t seed = 0;
};

class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual ResponseSet explain(const ExplainRequest& request) = 0;
  virtual std::string label() const = 0;
};

// Scripted backend assigns scenarios round-robin by ordinal.
std::unique_ptr<Explainer> make_explainer(const ExplainerConfig& config,
                                          std::vector<ScriptedScenario> scenarios = {},
                                          Sleeper sleeper = {});

}  // namespace latentlens
