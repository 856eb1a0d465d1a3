#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace forge {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};

  std::chrono::milliseconds backoff_before(int attempt) const;
};

// Runs fn until it succeeds, throws something other than a retryable
// TransportError, or the attempt budget is spent. The last error propagates.
void with_retry(const RetryPolicy& policy, const std::function<void()>& fn,
                const std::function<void(std::chrono::milliseconds)>& sleep = {});

// POSTs JSON bodies to one base URL ("http://host:port"). Each call opens its
// own connection, so one client may be shared across threads.
class JsonHttpClient {
 public:
  JsonHttpClient(std::string base_url, std::string module, RetryPolicy policy = {},
                 std::chrono::seconds timeout = std::chrono::seconds(120));

  // Non-2xx and connection failures raise TransportError (4xx other than
  // 408/429 is not retried); a 2xx body that is not JSON raises
  // MalformedResponseError.
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const std::string& base_url() const { return base_url_; }

 private:
  nlohmann::json post_once(const std::string& path, const std::string& body) const;

  std::string base_url_;
  std::string module_;
  RetryPolicy policy_;
  std::chrono::seconds timeout_;
};

}  // namespace forge
