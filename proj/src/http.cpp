#include "forge/http.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "forge/error.hpp"

namespace forge {

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  // attempt is 1-based; the first attempt never waits.
  if (attempt <= 1) return std::chrono::milliseconds(0);
  double ms = static_cast<double>(initial_backoff.count());
  for (int i = 2; i < attempt; ++i) ms *= multiplier;
  return std::min(max_backoff, std::chrono::milliseconds(static_cast<long long>(ms)));
}

void with_retry(const RetryPolicy& policy, const std::function<void()>& fn,
                const std::function<void(std::chrono::milliseconds)>& sleep) {
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    const auto wait = policy.backoff_before(attempt);
    if (wait.count() > 0) {
      if (sleep) {
        sleep(wait);
      } else {
        std::this_thread::sleep_for(wait);
      }
    }
    try {
      fn();
      return;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= attempts) throw;
    }
  }
}

JsonHttpClient::JsonHttpClient(std::string base_url, std::string module, RetryPolicy policy,
                               std::chrono::seconds timeout)
    : base_url_(std::move(base_url)),
      module_(std::move(module)),
      policy_(policy),
      timeout_(timeout) {}

nlohmann::json JsonHttpClient::post(const std::string& path, const nlohmann::json& body) const {
  const std::string text = body.dump();
  nlohmann::json result;
  with_retry(policy_, [&] { result = post_once(path, text); });
  return result;
}

nlohmann::json JsonHttpClient::post_once(const std::string& path, const std::string& body) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    throw TransportError(module_, "POST " + base_url_ + path + " failed: " +
                                      httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    const bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
    throw TransportError(module_,
                         "POST " + base_url_ + path + " returned HTTP " +
                             std::to_string(res->status) + ": " + res->body,
                         res->status, res->body, retryable);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(module_, "POST " + path + " returned non-JSON body",
                                 res->body);
  }
}

}  // namespace forge
