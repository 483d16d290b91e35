#include "latentlens/remote.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnv);
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::AuthMissing, std::string(kApiKeyEnv) + " is not set");
  }
  return key;
}

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "endpoint must include a scheme: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::InvalidArgument, "endpoint scheme must be http or https: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

bool is_retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

std::vector<double> backoff_schedule(const RetryPolicy& policy, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> delays;
  double prev = 0.0;
  for (int k = 0; k < policy.max_retries; ++k) {
    const double nominal = policy.base_s * std::pow(policy.factor, k);
    const double jittered = nominal * (1.0 + policy.jitter * (2.0 * rng.uniform() - 1.0));
    const double d = std::max(prev, std::min(policy.cap_s, jittered));
    delays.push_back(d);
    prev = d;
  }
  return delays;
}

JsonHttpClient::JsonHttpClient(const std::string& endpoint_url, std::string api_key,
                               double timeout_s, RetryPolicy policy, Sleeper sleeper)
    : endpoint_(parse_endpoint(endpoint_url)),
      api_key_(std::move(api_key)),
      timeout_s_(timeout_s),
      policy_(policy),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](double s) {
      std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
  }
}

HttpCallResult JsonHttpClient::post_json(const std::string& path, const nlohmann::json& body,
                                         std::uint64_t jitter_seed) const {
  httplib::Client cli(endpoint_.scheme_host_port);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(timeout_s_));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_},
                                    {"Accept", "application/json"}};
  const std::string payload = body.dump();
  const std::vector<double> delays = backoff_schedule(policy_, jitter_seed);

  HttpCallResult result;
  for (int attempt = 0;; ++attempt) {
    result.attempts = attempt + 1;
    auto res = cli.Post(endpoint_.base_path + path, headers, payload, "application/json");
    ErrorCode failure;
    std::string detail;
    int status = 0;
    if (!res) {
      const auto err = res.error();
      failure = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                    ? ErrorCode::Timeout
                    : ErrorCode::HttpError;
      detail = "transport failure: " + httplib::to_string(err);
    } else if (res->status >= 200 && res->status < 300) {
      try {
        result.body = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
      }
      return result;
    } else {
      status = res->status;
      failure = ErrorCode::HttpError;
      detail = "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200);
      if (!is_retryable_status(status)) throw Error(failure, detail, status);
    }
    if (attempt >= policy_.max_retries) throw Error(failure, detail, status);
    const double d = delays[static_cast<std::size_t>(attempt)];
    result.delays_s.push_back(d);
    sleeper_(d);
  }
}

}  // namespace latentlens
