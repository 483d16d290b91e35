#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace latentlens {

constexpr const char* kApiKeyEnv = "LATENTLENS_API_KEY";

// Reads LATENTLENS_API_KEY; throws AuthMissing when unset or empty.
std::string api_key_from_env();

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // e.g. "/v1", no trailing slash
};

Endpoint parse_endpoint(const std::string& url);

// Exponential backoff: base * factor^attempt, jittered by +-jitter, capped,
// and never shorter than the previous delay. Retries 408, 429, 5xx and
// transport failures only.
struct RetryPolicy {
  int max_retries = 4;
  double base_s = 0.5;
  double factor = 2.0;
  double jitter = 0.25;
  double cap_s = 8.0;
};

bool is_retryable_status(int status);

// Delays (seconds) before retries 1..max_retries for a given jitter seed.
std::vector<double> backoff_schedule(const RetryPolicy& policy, std::uint64_t seed);

struct HttpCallResult {
  nlohmann::json body;
  int attempts = 0;
  std::vector<double> delays_s;
};

using Sleeper = std::function<void(double seconds)>;

class JsonHttpClient {
 public:
  JsonHttpClient(const std::string& endpoint_url, std::string api_key, double timeout_s,
                 RetryPolicy policy, Sleeper sleeper = {});

  // POST base_path + path. Throws HttpError (non-retryable status or retries
  // exhausted), Timeout, or MalformedResponse for a non-JSON body.
  HttpCallResult post_json(const std::string& path, const nlohmann::json& body,
                           std::uint64_t jitter_seed) const;

  const RetryPolicy& policy() const { return policy_; }

 private:
  Endpoint endpoint_;
  std::string api_key_;
  double timeout_s_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

}  // namespace latentlens
